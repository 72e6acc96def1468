#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lhs::math {

// Deterministic random source. The engine (mt19937_64) and every transform
// below are pinned by this codebase, so a given seed yields the same draw
// sequence on every platform and build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random mantissa bits.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via the Marsaglia polar method (one cached spare).
  double normal();

  // Inclusive integer range, rejection sampled (no modulo bias).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Index into [0, n), n > 0.
  std::size_t index(std::size_t n);

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent stream derived from the construction seed, unaffected by
  // draws already taken from this generator.
  Rng child(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace lhs::math

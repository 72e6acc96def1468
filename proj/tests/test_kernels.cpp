#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "lhs/kernels/kernels.hpp"

using namespace lhs::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo = -5.0,
                               double hi = 5.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Tables to compare against the scalar reference on this machine.
std::vector<const KernelTable*> simd_tables() {
  std::vector<const KernelTable*> out;
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2_supported()) out.push_back(&avx2_table());
#endif
#if defined(__aarch64__)
  out.push_back(&neon_table());
#endif
  return out;
}

}  // namespace

TEST_CASE("scalar protected division") {
  const KernelTable& t = scalar_table();
  double a[4] = {1.0, 1.0, -3.0, 2.0};
  double b[4] = {2.0, 0.0, 1e-9, -1e-9};
  double out[4];
  t.pdiv(a, b, out, 4);
  CHECK(out[0] == 0.5);
  CHECK(out[1] == 1.0 / 1e-6);   // zero denominator clamps to +eps
  CHECK(out[2] == -3.0 / 1e-6);  // tiny positive clamps, sign of b kept
  CHECK(out[3] == 2.0 / -1e-6);
}

TEST_CASE("scalar matmul against naive triple loop") {
  std::mt19937_64 rng(7);
  const std::size_t m = 5, k = 7, n = 6;
  auto a = random_vec(rng, m * k);
  auto b = random_vec(rng, k * n);
  std::vector<double> c(m * n);
  scalar_table().matmul(a.data(), b.data(), c.data(), m, k, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc = acc + a[i * k + p] * b[p * n + j];
      CHECK(c[i * n + j] == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("simd elementwise kernels are bit-identical to scalar") {
  const KernelTable& ref = scalar_table();
  for (const KernelTable* t : simd_tables()) {
    CAPTURE(t->name);
    std::mt19937_64 rng(42);
    // Odd lengths exercise the vector tail paths.
    for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 16u, 33u, 255u, 1024u, 1027u}) {
      auto a = random_vec(rng, n);
      auto b = random_vec(rng, n);
      // Sprinkle denormal-ish and exact-zero denominators into b.
      if (n >= 4) {
        b[0] = 0.0;
        b[1] = 5e-7;
        b[2] = -5e-7;
        b[3] = -0.0;
      }
      std::vector<double> r(n), s(n);

      ref.add(a.data(), b.data(), r.data(), n);
      t->add(a.data(), b.data(), s.data(), n);
      CHECK(bitwise_equal(r, s));

      ref.sub(a.data(), b.data(), r.data(), n);
      t->sub(a.data(), b.data(), s.data(), n);
      CHECK(bitwise_equal(r, s));

      ref.mul(a.data(), b.data(), r.data(), n);
      t->mul(a.data(), b.data(), s.data(), n);
      CHECK(bitwise_equal(r, s));

      ref.pdiv(a.data(), b.data(), r.data(), n);
      t->pdiv(a.data(), b.data(), s.data(), n);
      CHECK(bitwise_equal(r, s));

      ref.vmin(a.data(), b.data(), r.data(), n);
      t->vmin(a.data(), b.data(), s.data(), n);
      CHECK(bitwise_equal(r, s));

      ref.vmax(a.data(), b.data(), r.data(), n);
      t->vmax(a.data(), b.data(), s.data(), n);
      CHECK(bitwise_equal(r, s));

      ref.neg(a.data(), r.data(), n);
      t->neg(a.data(), s.data(), n);
      CHECK(bitwise_equal(r, s));

      ref.vabs(a.data(), r.data(), n);
      t->vabs(a.data(), s.data(), n);
      CHECK(bitwise_equal(r, s));

      ref.relu(a.data(), r.data(), n);
      t->relu(a.data(), s.data(), n);
      CHECK(bitwise_equal(r, s));

      ref.lrelu(a.data(), 0.2, r.data(), n);
      t->lrelu(a.data(), 0.2, s.data(), n);
      CHECK(bitwise_equal(r, s));

      ref.scale(a.data(), 1.7, r.data(), n);
      t->scale(a.data(), 1.7, s.data(), n);
      CHECK(bitwise_equal(r, s));

      r = b;
      s = b;
      ref.axpy(0.3, a.data(), r.data(), n);
      t->axpy(0.3, a.data(), s.data(), n);
      CHECK(bitwise_equal(r, s));

      ref.fill(3.25, r.data(), n);
      t->fill(3.25, s.data(), n);
      CHECK(bitwise_equal(r, s));
    }
  }
}

TEST_CASE("simd matmul is bit-identical to scalar") {
  const KernelTable& ref = scalar_table();
  for (const KernelTable* t : simd_tables()) {
    CAPTURE(t->name);
    std::mt19937_64 rng(9);
    for (auto [m, k, n] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1},
                           {3, 5, 7},
                           {8, 8, 8},
                           {13, 17, 11},
                           {64, 64, 64},
                           {2, 128, 129}}) {
      auto a = random_vec(rng, m * k);
      auto b = random_vec(rng, k * n);
      std::vector<double> r(m * n), s(m * n);
      ref.matmul(a.data(), b.data(), r.data(), m, k, n);
      t->matmul(a.data(), b.data(), s.data(), m, k, n);
      CHECK(bitwise_equal(r, s));
    }
  }
}

TEST_CASE("signed zero and tie handling match scalar exactly") {
  const KernelTable& ref = scalar_table();
  for (const KernelTable* t : simd_tables()) {
    CAPTURE(t->name);
    std::vector<double> a = {-0.0, 0.0, -0.0, 0.0, 1.0, -1.0, 2.5, 2.5};
    std::vector<double> b = {0.0, -0.0, -0.0, 0.0, 1.0, -1.0, 2.5, -2.5};
    std::vector<double> r(a.size()), s(a.size());

    ref.vmin(a.data(), b.data(), r.data(), a.size());
    t->vmin(a.data(), b.data(), s.data(), a.size());
    CHECK(bitwise_equal(r, s));

    ref.vmax(a.data(), b.data(), r.data(), a.size());
    t->vmax(a.data(), b.data(), s.data(), a.size());
    CHECK(bitwise_equal(r, s));

    ref.relu(a.data(), r.data(), a.size());
    t->relu(a.data(), s.data(), a.size());
    CHECK(bitwise_equal(r, s));

    ref.lrelu(a.data(), 0.2, r.data(), a.size());
    t->lrelu(a.data(), 0.2, s.data(), a.size());
    CHECK(bitwise_equal(r, s));

    ref.neg(a.data(), r.data(), a.size());
    t->neg(a.data(), s.data(), a.size());
    CHECK(bitwise_equal(r, s));
  }
}

TEST_CASE("backend selection") {
  select("scalar");
  CHECK(std::string(active().name) == "scalar");
  CHECK_THROWS(select("no-such-backend"));
  // A failed select leaves the previous choice in place.
  CHECK(std::string(active().name) == "scalar");
  select("auto");
}

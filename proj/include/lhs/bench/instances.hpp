#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lhs/dsl/vocab.hpp"
#include "lhs/math/rng.hpp"

namespace lhs::bench {

struct Point {
  double x = 0.0, y = 0.0;
};

double dist(const Point& a, const Point& b);

struct TspInstance {
  std::vector<Point> coords;
  std::uint64_t seed = 0;
  std::size_t n() const { return coords.size(); }
};

struct CvrpInstance {
  Point depot;
  std::vector<Point> customers;
  std::vector<int> demands;
  int capacity = 40;
  std::uint64_t seed = 0;
  std::size_t n() const { return customers.size(); }
};

enum class KnapsackFamily { UNCORRELATED, WEAK, STRONG };
const char* family_name(KnapsackFamily f);
KnapsackFamily family_from_name(const std::string& s);

struct KnapsackInstance {
  std::vector<int> weights;
  std::vector<int> values;
  int capacity = 100;
  KnapsackFamily family = KnapsackFamily::UNCORRELATED;
  std::uint64_t seed = 0;
  std::size_t n() const { return weights.size(); }
};

struct ObpInstance {
  std::vector<int> sizes;  // arrival order
  int capacity = 100;
  std::uint64_t seed = 0;
  std::size_t n() const { return sizes.size(); }
};

// Uniform unit-square coordinates; CVRP demands uniform in [1,9]; knapsack
// weights uniform [1,100] with family-specific values; OBP sizes from
// Weibull(shape 3, scale 45) rounded and clipped to [1,100].
TspInstance gen_tsp(std::size_t n, lhs::math::Rng& rng);
CvrpInstance gen_cvrp(std::size_t n, int capacity, lhs::math::Rng& rng);
KnapsackInstance gen_knapsack(KnapsackFamily family, std::size_t n, int capacity,
                              lhs::math::Rng& rng);
ObpInstance gen_obp(std::size_t length, lhs::math::Rng& rng);

// One benchmark holds instances of exactly one task.
struct Benchmark {
  dsl::Task task = dsl::Task::TSP;
  std::vector<TspInstance> tsp;
  std::vector<CvrpInstance> cvrp;
  std::vector<KnapsackInstance> knapsack;
  std::vector<ObpInstance> obp;
  double timeout_seconds = 60.0;

  std::size_t size() const;
  // -1 for minimization (TSP/CVRP/OBP), +1 for knapsack value maximization.
  int alpha() const { return task == dsl::Task::KNAPSACK ? 1 : -1; }
};

void write_benchmark_json(const std::string& path, const Benchmark& b);
Benchmark read_benchmark_json(const std::string& path);

}  // namespace lhs::bench

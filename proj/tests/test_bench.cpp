#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lhs/bench/instances.hpp"
#include "lhs/bench/rollout.hpp"
#include "lhs/math/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

using namespace lhs;
using bench::Benchmark;
using bench::Policy;
using bench::Point;

namespace {

dsl::Program P(dsl::Task task, const std::vector<std::string>& spellings) {
  return dsl::parse_spellings(task, spellings);
}

bench::TspInstance square_tsp(double side = 1.0) {
  bench::TspInstance t;
  t.coords = {{0.0, 0.0}, {0.0, side}, {side, side}, {side, 0.0}};
  t.seed = 0;
  return t;
}

// Exhaustive tour search, fixed start at city 0.
double tsp_oracle(const bench::TspInstance& inst) {
  const std::size_t n = inst.n();
  std::vector<int> perm(n - 1);
  std::iota(perm.begin(), perm.end(), 1);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = bench::dist(inst.coords[0], inst.coords[perm.front()]);
    for (std::size_t i = 0; i + 1 < perm.size(); ++i) {
      c += bench::dist(inst.coords[perm[i]], inst.coords[perm[i + 1]]);
    }
    c += bench::dist(inst.coords[perm.back()], inst.coords[0]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Bitmask subset search.
double knapsack_oracle(const bench::KnapsackInstance& inst) {
  const std::size_t n = inst.n();
  double best = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    int w = 0;
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        w += inst.weights[i];
        v += inst.values[i];
      }
    }
    if (w <= inst.capacity) best = std::max(best, v);
  }
  return best;
}

}  // namespace

TEST_CASE("generators are seed deterministic") {
  math::Rng a(7), b(7);
  const auto ta = bench::gen_tsp(50, a);
  const auto tb = bench::gen_tsp(50, b);
  REQUIRE(ta.n() == 50);
  CHECK(std::memcmp(ta.coords.data(), tb.coords.data(), sizeof(Point) * 50) == 0);
  CHECK(ta.seed == tb.seed);

  math::Rng c(9), d(9);
  const auto ca = bench::gen_cvrp(30, 40, c);
  const auto cb = bench::gen_cvrp(30, 40, d);
  CHECK(ca.demands == cb.demands);
  CHECK(std::memcmp(ca.customers.data(), cb.customers.data(), sizeof(Point) * 30) == 0);
}

TEST_CASE("tsp and cvrp ranges") {
  math::Rng rng(11);
  const auto t = bench::gen_tsp(200, rng);
  for (const auto& p : t.coords) {
    CHECK(p.x >= 0.0);
    CHECK(p.x < 1.0);
    CHECK(p.y >= 0.0);
    CHECK(p.y < 1.0);
  }
  const auto c = bench::gen_cvrp(100, 40, rng);
  CHECK(c.capacity == 40);
  for (int dm : c.demands) {
    CHECK(dm >= 1);
    CHECK(dm <= 9);
  }
}

TEST_CASE("knapsack families") {
  math::Rng rng(13);
  const auto u = bench::gen_knapsack(bench::KnapsackFamily::UNCORRELATED, 300, 100, rng);
  for (std::size_t i = 0; i < u.n(); ++i) {
    CHECK(u.weights[i] >= 1);
    CHECK(u.weights[i] <= 100);
    CHECK(u.values[i] >= 1);
    CHECK(u.values[i] <= 100);
  }
  const auto w = bench::gen_knapsack(bench::KnapsackFamily::WEAK, 300, 100, rng);
  for (std::size_t i = 0; i < w.n(); ++i) {
    CHECK(w.values[i] >= std::max(1, w.weights[i] - 10));
    CHECK(w.values[i] <= w.weights[i] + 10);
  }
  const auto s = bench::gen_knapsack(bench::KnapsackFamily::STRONG, 300, 100, rng);
  for (std::size_t i = 0; i < s.n(); ++i) {
    CHECK(s.values[i] == s.weights[i] + 10);
  }
}

TEST_CASE("obp sizes follow the truncated weibull") {
  math::Rng rng(17);
  const auto o = bench::gen_obp(5000, rng);
  double sum = 0.0;
  for (int sz : o.sizes) {
    CHECK(sz >= 1);
    CHECK(sz <= 100);
    sum += sz;
  }
  const double mean = sum / 5000.0;
  CHECK(mean > 38.0);
  CHECK(mean < 43.0);
}

TEST_CASE("unit square tour costs 4 under nearest neighbor and its program form") {
  const auto inst = square_tsp();
  const auto nn = bench::rollout(bench::reference_heuristic("funsearch_tsp_nn"), inst);
  REQUIRE(nn.valid);
  CHECK(nn.cost == doctest::Approx(4.0).epsilon(1e-12));

  // NEG F0 under argmax selection is exactly nearest neighbor
  const auto prog = bench::rollout(bench::program_policy(P(dsl::Task::TSP, {"NEG", "F0"})), inst);
  REQUIRE(prog.valid);
  CHECK(prog.cost == doctest::Approx(4.0).epsilon(1e-12));

  const auto soft = bench::rollout(bench::reference_heuristic("lhs_tsp"), inst);
  REQUIRE(soft.valid);
  CHECK(soft.cost >= 4.0 - 1e-12);
  CHECK(soft.cost <= 2.0 + 2.0 * std::sqrt(2.0) + 1e-12);
}

TEST_CASE("two city tour is the doubled edge") {
  bench::TspInstance t;
  t.coords = {{0.0, 0.0}, {3.0, 4.0}};
  const auto r = bench::rollout(bench::reference_heuristic("funsearch_tsp_nn"), t);
  REQUIRE(r.valid);
  CHECK(r.cost == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("cvrp splits into two single customer trips when capacity forces it") {
  bench::CvrpInstance inst;
  inst.depot = {0.0, 0.0};
  inst.customers = {{1.0, 0.0}, {0.0, 1.0}};
  inst.demands = {30, 30};
  inst.capacity = 40;
  const auto g = bench::rollout(bench::reference_heuristic("lhs_cvrp"), inst);
  REQUIRE(g.valid);
  CHECK(g.cost == doctest::Approx(4.0).epsilon(1e-12));

  const auto prog = bench::rollout(bench::program_policy(P(dsl::Task::CVRP, {"NEG", "F0"})), inst);
  REQUIRE(prog.valid);
  CHECK(prog.cost == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("cvrp single trip when capacity allows") {
  bench::CvrpInstance inst;
  inst.depot = {0.0, 0.0};
  inst.customers = {{1.0, 0.0}, {1.0, 1.0}};
  inst.demands = {10, 10};
  inst.capacity = 40;
  // depot -> (1,0) -> (1,1) -> depot
  const auto g = bench::rollout(bench::reference_heuristic("lhs_cvrp"), inst);
  REQUIRE(g.valid);
  CHECK(g.cost == doctest::Approx(2.0 + std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("knapsack greedy example and the density rescale improvement") {
  bench::KnapsackInstance inst;
  inst.weights = {5, 4, 6};
  inst.values = {10, 7, 12};
  inst.capacity = 10;
  const auto rg = bench::rollout(bench::reference_heuristic("ratio_greedy_knapsack"), inst);
  REQUIRE(rg.valid);
  CHECK(rg.cost == doctest::Approx(17.0));
  const auto eoh = bench::rollout(bench::reference_heuristic("eoh_knapsack_ratio"), inst);
  CHECK(eoh.cost == doctest::Approx(17.0));
  CHECK(knapsack_oracle(inst) == doctest::Approx(19.0));
  const auto lk = bench::rollout(bench::reference_heuristic("lhs_knapsack"), inst);
  REQUIRE(lk.valid);
  CHECK(lk.cost >= rg.cost);
}

TEST_CASE("obp best fit prefers the tightest feasible bin") {
  // open bins reach remaining [30, 50, 20]; the 20 item must land in bin 2,
  // which keeps a later 30 and 45 packable without a fourth bin
  bench::ObpInstance inst;
  inst.sizes = {70, 50, 80, 20, 30, 45};
  inst.capacity = 100;
  const auto lhs_r = bench::rollout(bench::reference_heuristic("lhs_obp"), inst);
  REQUIRE(lhs_r.valid);
  CHECK(lhs_r.cost == doctest::Approx(3.0));
  const auto bf = bench::rollout(bench::reference_heuristic("best_fit_obp"), inst);
  CHECK(bf.cost == doctest::Approx(3.0));
  const auto ff = bench::rollout(bench::reference_heuristic("first_fit_obp"), inst);
  REQUIRE(ff.valid);
  CHECK(ff.cost == doctest::Approx(4.0));
}

TEST_CASE("obp bin counts respect conservation bounds") {
  math::Rng rng(23);
  const auto inst = bench::gen_obp(200, rng);
  double total = 0.0;
  for (int s : inst.sizes) total += s;
  const double lower = std::ceil(total / inst.capacity);
  for (const char* name : {"lhs_obp", "best_fit_obp", "first_fit_obp"}) {
    const auto r = bench::rollout(bench::reference_heuristic(name), inst);
    REQUIRE(r.valid);
    CHECK(r.cost >= lower);
    CHECK(r.cost <= 200.0);
  }
  const auto prog =
      bench::rollout(bench::program_policy(P(dsl::Task::OBP, {"NEG", "F1"})), inst);
  REQUIRE(prog.valid);
  CHECK(prog.cost >= lower);
  // NEG of the residual is exactly best fit
  const auto bf = bench::rollout(bench::reference_heuristic("best_fit_obp"), inst);
  CHECK(prog.cost == doctest::Approx(bf.cost));
}

TEST_CASE("knapsack heuristics never beat the exhaustive oracle") {
  math::Rng rng(29);
  const bench::KnapsackFamily fams[] = {bench::KnapsackFamily::UNCORRELATED,
                                        bench::KnapsackFamily::WEAK,
                                        bench::KnapsackFamily::STRONG};
  int exact = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(8, 15));
    const auto inst = bench::gen_knapsack(fams[i % 3], n, 100, rng);
    const double opt = knapsack_oracle(inst);
    for (const char* name : {"lhs_knapsack", "ratio_greedy_knapsack"}) {
      const auto r = bench::rollout(bench::reference_heuristic(name), inst);
      REQUIRE(r.valid);
      CHECK(r.cost <= opt + 1e-9);
      if (std::abs(r.cost - opt) < 1e-9) ++exact;
    }
  }
  CHECK(exact > 0);
}

TEST_CASE("tsp heuristics never beat the exhaustive oracle") {
  math::Rng rng(31);
  int exact = 0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(4, 8));
    const auto inst = bench::gen_tsp(n, rng);
    const double opt = tsp_oracle(inst);
    for (const char* name : {"funsearch_tsp_nn", "lhs_tsp"}) {
      const auto r = bench::rollout(bench::reference_heuristic(name), inst);
      REQUIRE(r.valid);
      CHECK(r.cost >= opt - 1e-9);
      if (std::abs(r.cost - opt) < 1e-9) ++exact;
    }
  }
  CHECK(exact > 0);
}

TEST_CASE("non finite program score invalidates the rollout") {
  math::Rng rng(37);
  const auto inst = bench::gen_tsp(20, rng);
  // repeated EXP overflows past the largest double on unit square distances
  const auto p = P(dsl::Task::TSP, {"EXP", "EXP", "EXP", "EXP", "EXP", "EXP", "DIV", "C1.0", "F0"});
  const auto r = bench::rollout(bench::program_policy(p), inst);
  CHECK_FALSE(r.valid);
}

TEST_CASE("timeout marks the rollout invalid") {
  math::Rng rng(41);
  const auto inst = bench::gen_tsp(60, rng);
  const auto r = bench::rollout(bench::reference_heuristic("lhs_tsp"), inst, 0.0);
  CHECK_FALSE(r.valid);
}

TEST_CASE("policy task mismatch throws") {
  math::Rng rng(43);
  const auto inst = bench::gen_tsp(5, rng);
  CHECK_THROWS_AS(bench::rollout(bench::reference_heuristic("lhs_cvrp"), inst),
                  std::invalid_argument);
  CHECK_THROWS_AS(bench::reference_heuristic("no_such_heuristic"), std::invalid_argument);
}

TEST_CASE("evaluate averages costs and applies the sign convention") {
  Benchmark tb;
  tb.task = dsl::Task::TSP;
  tb.tsp = {square_tsp(1.0), square_tsp(1.5)};  // nn costs 4 and 6
  tb.timeout_seconds = 60.0;
  const auto sc = bench::evaluate(bench::reference_heuristic("funsearch_tsp_nn"), tb);
  REQUIRE(sc.valid);
  CHECK(sc.y == doctest::Approx(5.0).epsilon(1e-12));
  REQUIRE(sc.s.has_value());
  CHECK(*sc.s == doctest::Approx(-5.0).epsilon(1e-12));

  Benchmark kb;
  kb.task = dsl::Task::KNAPSACK;
  bench::KnapsackInstance k1;
  k1.weights = {5};
  k1.values = {4};
  k1.capacity = 10;
  bench::KnapsackInstance k2;
  k2.weights = {5};
  k2.values = {6};
  k2.capacity = 10;
  kb.knapsack = {k1, k2};
  kb.timeout_seconds = 20.0;
  const auto ks = bench::evaluate(bench::reference_heuristic("ratio_greedy_knapsack"), kb);
  REQUIRE(ks.valid);
  CHECK(ks.y == doctest::Approx(5.0));
  CHECK(*ks.s == doctest::Approx(5.0));  // maximization keeps the raw mean
}

TEST_CASE("evaluate rejects empty and mismatched benchmarks") {
  Benchmark empty;
  empty.task = dsl::Task::TSP;
  CHECK_THROWS_AS(bench::evaluate(bench::reference_heuristic("funsearch_tsp_nn"), empty),
                  std::invalid_argument);
  Benchmark tb;
  tb.task = dsl::Task::TSP;
  tb.tsp = {square_tsp()};
  CHECK_THROWS_AS(bench::evaluate(bench::reference_heuristic("lhs_cvrp"), tb),
                  std::invalid_argument);
}

TEST_CASE("evaluate is parallelism invariant") {
  math::Rng rng(47);
  Benchmark tb;
  tb.task = dsl::Task::TSP;
  for (int i = 0; i < 12; ++i) tb.tsp.push_back(bench::gen_tsp(12, rng));
  const auto one = bench::evaluate(bench::reference_heuristic("lhs_tsp"), tb, 1);
  const auto eight = bench::evaluate(bench::reference_heuristic("lhs_tsp"), tb, 8);
  REQUIRE(one.valid);
  REQUIRE(eight.valid);
  CHECK(std::memcmp(one.costs.data(), eight.costs.data(), sizeof(double) * 12) == 0);
  CHECK(one.y == eight.y);
}

TEST_CASE("a score below every feasible alternative still packs validly") {
  // constant scores tie; lowest index wins, mirroring first fit
  bench::ObpInstance inst;
  inst.sizes = {60, 50, 30, 40};
  inst.capacity = 100;
  const auto prog =
      bench::rollout(bench::program_policy(P(dsl::Task::OBP, {"MUL", "C0.0", "F0"})), inst);
  const auto ff = bench::rollout(bench::reference_heuristic("first_fit_obp"), inst);
  REQUIRE(prog.valid);
  CHECK(prog.cost == doctest::Approx(ff.cost));
}

TEST_CASE("benchmark json round trips exactly") {
  math::Rng rng(53);
  Benchmark b;
  b.task = dsl::Task::CVRP;
  for (int i = 0; i < 3; ++i) b.cvrp.push_back(bench::gen_cvrp(10, 40, rng));
  b.timeout_seconds = 120.0;
  const std::string path = "bench_roundtrip.json";
  bench::write_benchmark_json(path, b);
  const auto r = bench::read_benchmark_json(path);
  REQUIRE(r.task == dsl::Task::CVRP);
  REQUIRE(r.cvrp.size() == 3);
  CHECK(r.timeout_seconds == 120.0);
  for (int i = 0; i < 3; ++i) {
    CHECK(r.cvrp[i].demands == b.cvrp[i].demands);
    CHECK(r.cvrp[i].capacity == b.cvrp[i].capacity);
    CHECK(r.cvrp[i].seed == b.cvrp[i].seed);
    CHECK(std::memcmp(r.cvrp[i].customers.data(), b.cvrp[i].customers.data(),
                      sizeof(Point) * 10) == 0);
    CHECK(r.cvrp[i].depot.x == b.cvrp[i].depot.x);
    CHECK(r.cvrp[i].depot.y == b.cvrp[i].depot.y);
  }
  std::remove(path.c_str());

  Benchmark kb;
  kb.task = dsl::Task::KNAPSACK;
  kb.knapsack = {bench::gen_knapsack(bench::KnapsackFamily::WEAK, 8, 100, rng)};
  kb.timeout_seconds = 20.0;
  bench::write_benchmark_json(path, kb);
  const auto kr = bench::read_benchmark_json(path);
  REQUIRE(kr.knapsack.size() == 1);
  CHECK(kr.knapsack[0].weights == kb.knapsack[0].weights);
  CHECK(kr.knapsack[0].values == kb.knapsack[0].values);
  CHECK(kr.knapsack[0].family == kb.knapsack[0].family);
  std::remove(path.c_str());
}

TEST_CASE("result rows mirror the score") {
  Benchmark tb;
  tb.task = dsl::Task::TSP;
  tb.tsp = {square_tsp()};
  const auto pol = bench::reference_heuristic("funsearch_tsp_nn");
  const auto sc = bench::evaluate(pol, tb);
  const auto rows = bench::result_rows(pol, tb, sc);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].policy_id == "funsearch_tsp_nn");
  CHECK(rows[0].task == std::string("TSP"));
  CHECK(rows[0].valid);
  CHECK(rows[0].cost == doctest::Approx(4.0));
  const std::string path = "rows_roundtrip.csv";
  bench::write_results_csv(path, rows);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "policy_id,task,instance_id,cost,wall_ms,valid");
  std::string line;
  std::getline(is, line);
  CHECK(line.find("funsearch_tsp_nn,TSP,") == 0);
  is.close();
  std::remove(path.c_str());
}

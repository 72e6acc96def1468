#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lhs/bench/instances.hpp"
#include "lhs/dsl/interpret.hpp"

namespace lhs::bench {

// Either a DSL program or a named built-in reference heuristic.
struct Policy {
  enum class Kind { Program, Builtin };
  Kind kind = Kind::Program;
  dsl::Program program;
  std::string builtin;

  dsl::Task task() const;
  std::string id() const;  // program content hash or builtin name
};

Policy program_policy(dsl::Program p);

// Built-ins: funsearch_tsp_nn, lhs_tsp, lhs_cvrp, lhs_knapsack, lhs_obp,
// best_fit_obp, first_fit_obp, ratio_greedy_knapsack, eoh_knapsack_ratio.
Policy reference_heuristic(const std::string& name);
const std::vector<std::string>& reference_heuristic_names();

struct RolloutResult {
  double cost = 0.0;
  bool valid = false;
  double wall_ms = 0.0;
};

RolloutResult rollout(const Policy& p, const TspInstance& inst, double timeout_s = 60.0);
RolloutResult rollout(const Policy& p, const CvrpInstance& inst, double timeout_s = 60.0);
RolloutResult rollout(const Policy& p, const KnapsackInstance& inst, double timeout_s = 20.0);
RolloutResult rollout(const Policy& p, const ObpInstance& inst, double timeout_s = 30.0);
RolloutResult rollout_in(const Policy& p, const Benchmark& bench, std::size_t index);

struct Score {
  bool valid = false;
  double y = 0.0;                 // mean instance cost, only meaningful when valid
  std::optional<double> s;        // alpha * y, absent when invalid
  std::vector<double> costs;      // per instance, NaN where a rollout failed
  double wall_ms = 0.0;
};

// Runs every instance (parallel up to `parallelism`, slot-deterministic) and
// aggregates. Any invalid rollout invalidates the whole Score; program
// misbehavior never throws.
Score evaluate(const Policy& p, const Benchmark& bench, int parallelism = 1);

struct ResultRow {
  std::string policy_id;
  std::string task;
  std::string instance_id;
  double cost = 0.0;
  double wall_ms = 0.0;
  bool valid = false;
};

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);

std::vector<ResultRow> result_rows(const Policy& p, const Benchmark& bench, const Score& score);

}  // namespace lhs::bench

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lhs/bench/rollout.hpp"
#include "lhs/dsl/program.hpp"
#include "lhs/flow/flow.hpp"
#include "lhs/math/rng.hpp"
#include "lhs/math/tensor.hpp"
#include "lhs/models/models.hpp"
#include "lhs/surrogate/surrogate.hpp"

namespace lhs::search {

enum class Variant { LHS, NO_FLOW, NO_GRAD };
const char* variant_name(Variant v);
Variant variant_from_name(const std::string& s);

enum class Origin { SEED, LHS, NO_FLOW, NO_GRAD };
const char* origin_name(Origin o);

// One scored program in the database. z is the program's own encoding and u
// its prior-space image (u == z when the variant bypasses the flow), so any
// entry can seed a later round.
struct ScoredEntry {
  dsl::Program program;
  bench::Score score;
  math::Tensor z;
  math::Tensor u;
  Origin origin = Origin::SEED;
  std::size_t round = 0;  // 0 marks the initial population
  std::vector<std::string> parents;
  std::string id;
};

// Append-only; selection and reporting read signed scores (higher is better)
// of valid entries.
struct Database {
  std::vector<ScoredEntry> entries;
};

// Indices of valid entries ordered by signed score descending, insertion
// order breaking ties; at most k results.
std::vector<std::size_t> top_entries(const Database& db, std::size_t k);

// Index of the best valid entry; throws std::runtime_error when none exists.
std::size_t best_index(const Database& db);

// Softmax-without-replacement over the top-`pool` valid entries: draw
// probability proportional to exp(s), renormalized after each draw. Fewer
// than `count` valid entries means every valid entry is returned.
std::vector<std::size_t> select_seeds(const Database& db, std::size_t pool, std::size_t count,
                                      math::Rng& rng);

// Value and gradient of the score model being climbed; free-form so the
// gradient-free variant can skip it and tests can plant analytic surfaces.
struct AscentOracle {
  std::function<double(const math::Tensor&)> value;
  std::function<math::Tensor(const math::Tensor&)> grad;
};

AscentOracle surrogate_oracle(const surrogate::SurrogateModel& m);

// Fixed-step gradient ascent with a backtracking safeguard: a step that
// lowers the value is retried at half the step size up to three times and
// then dropped, so the value is non-decreasing along the returned
// trajectory. Always returns steps+1 points starting at u0.
std::vector<math::Tensor> ascend(const math::Tensor& u0, const AscentOracle& f,
                                 std::size_t steps, double eta);

struct SearchConfig {
  Variant variant = Variant::LHS;
  std::size_t rounds = 0;  // 0: run until the decode budget is spent
  std::size_t candidates_per_round = 5;
  std::size_t ascent_steps = 5;
  double step_size = 1e-3;
  std::size_t budget = 100;  // decode calls across all rounds
  std::size_t top_pool = 10;
  std::size_t population = 10;  // initial entries including the reference
  double temperature = 0.7;
  double top_p = 0.9;
  std::uint64_t seed = 0;
  int parallelism = 1;
};

// Everything a search run conditions on. The surrogate must be trained on
// prior vectors u for LHS and on raw latents z for NO_FLOW; NO_GRAD ignores
// it. NO_FLOW ignores the flow.
struct ModelSet {
  models::EncoderModel encoder;
  models::DecoderModel decoder;
  models::MapperModel mapper;
  flow::FlowModel flow;
  surrogate::SurrogateModel surrogate;
};

// One line per budgeted decode.
struct DecodeLog {
  std::size_t round = 0;
  std::vector<std::string> parents;
  std::vector<double> ascent_norms;  // |u_t| along the trajectory
  std::size_t family = 0;
  std::vector<int> tokens;
  bool valid = false;
  double score_s = 0.0;  // meaningful only when valid
  std::size_t budget_remaining = 0;
};

struct SearchReport {
  Variant variant = Variant::LHS;
  std::uint64_t seed = 0;
  std::string best_id;
  dsl::Program best_program;
  double best_s = 0.0;
  double best_y = 0.0;
  double success_rate = 0.0;  // valid budgeted decodes / total budgeted decodes
  std::vector<double> best_curve;  // best signed score after init, then per round
  double wall_ms = 0.0;
  std::size_t decodes_total = 0;
  std::size_t decodes_valid = 0;
  std::size_t surrogate_calls = 0;
  std::size_t rounds_run = 0;
  std::size_t initial_population = 0;
  std::vector<DecodeLog> decode_log;
};

struct SearchResult {
  Database db;
  SearchReport report;
};

// Algorithm outer loop: builds the initial population (the reference program
// plus sampled decodes of its latent), then runs rounds of the configured
// variant until the budget is spent. The reference must evaluate valid on
// the benchmark.
SearchResult run_search(const SearchConfig& cfg, const ModelSet& models,
                        const bench::Benchmark& benchmark, const dsl::Program& reference);

std::string report_json(const SearchReport& r);
void write_report_json(const std::string& path, const SearchReport& r);
void write_search_log_jsonl(const std::string& path, const SearchReport& r);
void write_curve_csv(const std::string& path, const SearchReport& r);

}  // namespace lhs::search

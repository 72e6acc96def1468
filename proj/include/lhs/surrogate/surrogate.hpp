#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "lhs/math/adamw.hpp"
#include "lhs/math/rng.hpp"
#include "lhs/math/tensor.hpp"

namespace lhs::surrogate {

// Pairwise-ranked score predictor over prior vectors. A two-layer relu
// perceptron with a scalar head; dropout is active only while training, so
// value and gradient queries are deterministic.
struct SurrogateConfig {
  std::size_t dim = 128;
  std::size_t hidden = 256;
  double dropout = 0.1;
  double temperature = 1.0;
  std::size_t batch_size = 256;
  std::size_t epochs = 60;
  double lr = 1e-3;
  double weight_decay = 1e-5;
};

struct SurrogateModel {
  SurrogateConfig cfg;
  math::ParamSet params;
};

SurrogateModel make_surrogate(const SurrogateConfig& cfg, math::Rng& rng);

// One evaluated program: its prior vector, benchmark score, and identity.
struct ScoredLatent {
  math::Tensor u;  // rank-1 [dim]
  double s = 0.0;
  std::string program_id;
};

struct RankPair {
  math::Tensor winner;  // rank-1 [dim], the strictly higher-scored side
  math::Tensor loser;
  std::string winner_id;
  std::string loser_id;
};

// Program-level holdout: every id lands on exactly one side, so no pair can
// leak a validation program into training.
struct SplitPlan {
  std::set<std::string> train_ids;
  std::set<std::string> val_ids;
  double val_fraction = 0.0;
  std::uint64_t seed = 0;
};

SplitPlan make_split(const std::vector<ScoredLatent>& scored, double val_fraction,
                     std::uint64_t seed);

struct PairSets {
  std::vector<RankPair> train;
  std::vector<RankPair> val;
};

// All ordered strict-preference pairs within each side of the split; ties and
// cross-split pairs are dropped. Sides larger than `cap` pairs are uniformly
// subsampled with the split seed. Throws when every score is tied.
PairSets build_pairs(const std::vector<ScoredLatent>& scored, const SplitPlan& split,
                     std::size_t cap = 50000);

// -log sigmoid(temperature * (f(winner) - f(loser))), dropout off.
double ranknet_loss(const SurrogateModel& m, const RankPair& pair);

struct TrainReport {
  std::size_t train_pairs = 0;
  std::size_t val_pairs = 0;
  std::vector<double> epoch_loss;     // mean training loss, one entry per epoch
  std::vector<double> epoch_val_acc;  // empty when there are no validation pairs
  double val_accuracy = 0.0;          // final held-out pairwise accuracy
};

std::string report_json(const TrainReport& report);

struct SurrogateTraining {
  SurrogateModel model;
  TrainReport report;
};

// Minimizes the ranking loss with AdamW. Throws on empty train pairs or a
// non-finite batch loss.
SurrogateTraining train_surrogate(const PairSets& pairs, const SurrogateConfig& cfg,
                                  math::Rng& rng);

// Fraction of pairs where the winner outscores the loser; exact ties count
// as misses.
double pairwise_accuracy(const SurrogateModel& m, const std::vector<RankPair>& pairs);

double surrogate_value(const SurrogateModel& m, const math::Tensor& u);

// d f(u) / d u via the tape, rank-1 [dim].
math::Tensor surrogate_grad(const SurrogateModel& m, const math::Tensor& u);

void save_surrogate(const std::string& path, const SurrogateModel& m);
SurrogateModel load_surrogate(const std::string& path);

}  // namespace lhs::surrogate

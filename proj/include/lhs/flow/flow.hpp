#pragma once

#include <map>
#include <string>
#include <vector>

#include "lhs/math/adamw.hpp"
#include "lhs/math/rng.hpp"
#include "lhs/math/tensor.hpp"

namespace lhs::flow {

// Invertible map between encoder space and a standard Gaussian prior.
// Blocks are [actnorm, affine coupling] repeated; couplings use alternating
// even/odd passthrough masks so every dimension gets transformed.
struct FlowConfig {
  std::size_t dim = 128;
  std::size_t hidden = 128;
  std::size_t blocks = 4;
  std::size_t batch_size = 128;
  std::size_t epochs = 300;
  double lr = 1e-3;
  double weight_decay = 1e-5;
};

struct FlowModel {
  FlowConfig cfg;
  math::ParamSet params;
  bool actnorm_initialized = false;
};

// Coupling output layers start at zero, so a fresh model is the identity map.
FlowModel make_flow(const FlowConfig& cfg, math::Rng& rng);

// Dimension i passes through block b's coupling unchanged when this holds.
bool mask_passthrough(std::size_t block, std::size_t dim_index);

struct ForwardResult {
  math::Tensor u;
  double logdet = 0.0;
};

struct InverseResult {
  math::Tensor z;
  double logdet = 0.0;
};

// Both take rank-1 vectors of length cfg.dim.
ForwardResult flow_forward(const FlowModel& m, const math::Tensor& z);
math::Tensor flow_inverse(const FlowModel& m, const math::Tensor& u);
InverseResult flow_inverse_with_logdet(const FlowModel& m, const math::Tensor& u);

// Mean over the batch of -[log N(u; 0, I) + logdet], batch is [B, dim].
double flow_nll(const FlowModel& m, const math::Tensor& batch);

// Same loss built on the autodiff tape; fills d(loss)/d(param) per name.
double flow_nll_and_grads(const FlowModel& m, const math::Tensor& batch,
                          std::map<std::string, math::Tensor>& grads);

// Data-dependent init: each actnorm absorbs its incoming batch statistics so
// the post-actnorm batch has per-dimension mean 0 and variance 1. Runs once.
void actnorm_init(FlowModel& m, const math::Tensor& batch);

struct FlowTraining {
  FlowModel model;
  std::vector<double> epoch_nll;
};

// Maximum likelihood on the latent corpus [N, dim], N >= 500.
FlowTraining train_flow(const math::Tensor& latents, const FlowConfig& cfg, math::Rng& rng);

void save_flow(const std::string& path, const FlowModel& m);
FlowModel load_flow(const std::string& path);

}  // namespace lhs::flow

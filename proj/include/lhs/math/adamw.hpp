#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "lhs/math/rng.hpp"
#include "lhs/math/tensor.hpp"

namespace lhs::math {

// Named parameters plus optimizer state. std::map keeps iteration order
// deterministic, which the bit-reproducibility guarantees rely on.
struct ParamSet {
  std::map<std::string, Tensor> params;
  std::map<std::string, Tensor> m, v;  // first/second moments, filled on first step
  std::uint64_t step = 0;

  Tensor& operator[](const std::string& name) { return params[name]; }
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return params.count(name) != 0; }
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Decoupled weight decay: p <- p - lr*wd*p - lr*mhat/(sqrt(vhat)+eps).
// Every parameter must have a gradient entry.
void adamw_step(ParamSet& ps, const std::map<std::string, Tensor>& grads,
                const AdamWConfig& cfg);

Tensor randn_tensor(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0);

// Xavier/Glorot uniform for a [fan_in, fan_out] weight matrix.
Tensor xavier_tensor(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace lhs::math

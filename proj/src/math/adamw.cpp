#include "lhs/math/adamw.hpp"

#include <cmath>
#include <stdexcept>

namespace lhs::math {

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw std::out_of_range("paramset: no parameter '" + name + "'");
  return it->second;
}

void adamw_step(ParamSet& ps, const std::map<std::string, Tensor>& grads,
                const AdamWConfig& cfg) {
  ps.step += 1;
  const double t = static_cast<double>(ps.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : ps.params) {
    auto git = grads.find(name);
    if (git == grads.end()) {
      throw std::invalid_argument("adamw: missing gradient for parameter '" + name + "'");
    }
    const Tensor& g = git->second;
    if (!g.same_shape(p)) {
      throw std::invalid_argument("adamw: gradient shape mismatch for '" + name + "'");
    }
    Tensor& m = ps.m.try_emplace(name, Tensor(p.shape, 0.0)).first->second;
    Tensor& v = ps.v.try_emplace(name, Tensor(p.shape, 0.0)).first->second;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] = p.data[i] - cfg.lr * cfg.weight_decay * p.data[i] -
                  cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

Tensor randn_tensor(std::vector<std::size_t> shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = stddev * rng.normal();
  return t;
}

Tensor xavier_tensor(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor t({fan_in, fan_out});
  const double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data) v = rng.uniform(-lim, lim);
  return t;
}

}  // namespace lhs::math

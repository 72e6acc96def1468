#include "lhs/flow/flow.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lhs/math/checkpoint.hpp"
#include "lhs/math/graph.hpp"

namespace lhs::flow {

namespace {

constexpr double kLn2Pi = 1.8378770664093453;

std::string pname(std::size_t block, const char* rest) {
  return "b" + std::to_string(block) + "." + rest;
}

// One-row perceptron forward matching the tape's evaluation order
// (matmul accumulated k-ascending, bias added after).
void net_forward(const math::Tensor& w1, const math::Tensor& b1, const math::Tensor& w2,
                 const math::Tensor& b2, const std::vector<double>& xm,
                 std::vector<double>& out) {
  const std::size_t dim = w1.rows(), hidden = w1.cols();
  std::vector<double> h(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) acc += xm[k] * w1.data[k * hidden + j];
    acc += b1.data[j];
    h[j] = acc < 0.0 ? 0.2 * acc : acc;
  }
  for (std::size_t i = 0; i < dim; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < hidden; ++j) acc += h[j] * w2.data[j * dim + i];
    out[i] = acc + b2.data[i];
  }
}

void check_finite(const std::vector<double>& x, std::size_t block, const char* dir) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw math::NumericsError(std::string("flow ") + dir + " produced a non-finite value in block " +
                                std::to_string(block));
    }
  }
}

struct BlockView {
  const math::Tensor *an_scale, *an_bias;
  const math::Tensor *sw1, *sb1, *sw2, *sb2, *sfactor;
  const math::Tensor *tw1, *tb1, *tw2, *tb2;
};

BlockView block_view(const FlowModel& m, std::size_t b) {
  const auto& ps = m.params;
  return {&ps.at(pname(b, "an.scale")), &ps.at(pname(b, "an.bias")),
          &ps.at(pname(b, "s.w1")),     &ps.at(pname(b, "s.b1")),
          &ps.at(pname(b, "s.w2")),     &ps.at(pname(b, "s.b2")),
          &ps.at(pname(b, "s.factor")), &ps.at(pname(b, "t.w1")),
          &ps.at(pname(b, "t.b1")),     &ps.at(pname(b, "t.w2")),
          &ps.at(pname(b, "t.b2"))};
}

// s and t for the unmasked dims, derived from the masked half only.
void coupling_nets(const BlockView& v, std::size_t b, const std::vector<double>& x,
                   std::vector<double>& s_eff, std::vector<double>& t_eff) {
  const std::size_t dim = x.size();
  std::vector<double> xm(dim);
  for (std::size_t i = 0; i < dim; ++i) xm[i] = mask_passthrough(b, i) ? x[i] : 0.0;
  std::vector<double> raw_s(dim), raw_t(dim);
  net_forward(*v.sw1, *v.sb1, *v.sw2, *v.sb2, xm, raw_s);
  net_forward(*v.tw1, *v.tb1, *v.tw2, *v.tb2, xm, raw_t);
  const double factor = v.sfactor->data[0];
  for (std::size_t i = 0; i < dim; ++i) {
    if (mask_passthrough(b, i)) {
      s_eff[i] = 0.0;
      t_eff[i] = 0.0;
    } else {
      s_eff[i] = factor * std::tanh(raw_s[i]);
      t_eff[i] = raw_t[i];
    }
  }
}

void forward_row(const FlowModel& m, std::vector<double>& x, double& logdet) {
  const std::size_t dim = m.cfg.dim;
  std::vector<double> s_eff(dim), t_eff(dim);
  for (std::size_t b = 0; b < m.cfg.blocks; ++b) {
    const auto v = block_view(m, b);
    for (std::size_t i = 0; i < dim; ++i) {
      x[i] = (x[i] + v.an_bias->data[i]) * v.an_scale->data[i];
      logdet += std::log(std::abs(v.an_scale->data[i]));
    }
    coupling_nets(v, b, x, s_eff, t_eff);
    for (std::size_t i = 0; i < dim; ++i) {
      x[i] = x[i] * std::exp(s_eff[i]) + t_eff[i];
      logdet += s_eff[i];
    }
    check_finite(x, b, "forward");
  }
}

void inverse_row(const FlowModel& m, std::vector<double>& x, double& logdet) {
  const std::size_t dim = m.cfg.dim;
  std::vector<double> s_eff(dim), t_eff(dim);
  for (std::size_t b = m.cfg.blocks; b-- > 0;) {
    const auto v = block_view(m, b);
    // masked dims are unchanged by the coupling, so the nets see the same input
    coupling_nets(v, b, x, s_eff, t_eff);
    for (std::size_t i = 0; i < dim; ++i) {
      if (!mask_passthrough(b, i)) x[i] = (x[i] - t_eff[i]) / std::exp(s_eff[i]);
      logdet -= s_eff[i];
    }
    for (std::size_t i = 0; i < dim; ++i) {
      x[i] = x[i] / v.an_scale->data[i] - v.an_bias->data[i];
      logdet -= std::log(std::abs(v.an_scale->data[i]));
    }
    check_finite(x, b, "inverse");
  }
}

std::vector<double> row_of(const math::Tensor& t, std::size_t dim) {
  if (t.shape.size() != 1 || t.shape[0] != dim) {
    throw std::invalid_argument("flow: expected a rank-1 vector of length " + std::to_string(dim) +
                                ", got " + math::shape_str(t.shape));
  }
  return t.data;
}

math::Tensor batch_rows(const math::Tensor& latents, const std::vector<std::size_t>& order,
                        std::size_t begin, std::size_t end) {
  const std::size_t d = latents.cols();
  math::Tensor out({end - begin, d});
  for (std::size_t r = begin; r < end; ++r) {
    const double* src = latents.data.data() + order[r] * d;
    std::copy(src, src + d, out.data.begin() + (r - begin) * d);
  }
  return out;
}

}  // namespace

bool mask_passthrough(std::size_t block, std::size_t dim_index) {
  return dim_index % 2 == block % 2;
}

FlowModel make_flow(const FlowConfig& cfg, math::Rng& rng) {
  if (cfg.dim < 2 || cfg.dim % 2 != 0) throw std::invalid_argument("flow: dim must be even, >= 2");
  FlowModel m;
  m.cfg = cfg;
  auto& ps = m.params;
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    ps[pname(b, "an.scale")] = math::Tensor({1, cfg.dim}, 1.0);
    ps[pname(b, "an.bias")] = math::Tensor({1, cfg.dim}, 0.0);
    for (const char* net : {"s", "t"}) {
      ps[pname(b, (std::string(net) + ".w1").c_str())] = math::xavier_tensor(cfg.dim, cfg.hidden, rng);
      ps[pname(b, (std::string(net) + ".b1").c_str())] = math::Tensor({1, cfg.hidden}, 0.0);
      // zero output layers make the fresh flow an exact identity
      ps[pname(b, (std::string(net) + ".w2").c_str())] = math::Tensor({cfg.hidden, cfg.dim}, 0.0);
      ps[pname(b, (std::string(net) + ".b2").c_str())] = math::Tensor({1, cfg.dim}, 0.0);
    }
    ps[pname(b, "s.factor")] = math::Tensor({1, 1}, 0.8);
  }
  return m;
}

ForwardResult flow_forward(const FlowModel& m, const math::Tensor& z) {
  ForwardResult r;
  auto x = row_of(z, m.cfg.dim);
  forward_row(m, x, r.logdet);
  r.u = math::Tensor::from({m.cfg.dim}, x);
  return r;
}

InverseResult flow_inverse_with_logdet(const FlowModel& m, const math::Tensor& u) {
  InverseResult r;
  auto x = row_of(u, m.cfg.dim);
  inverse_row(m, x, r.logdet);
  r.z = math::Tensor::from({m.cfg.dim}, x);
  return r;
}

math::Tensor flow_inverse(const FlowModel& m, const math::Tensor& u) {
  return flow_inverse_with_logdet(m, u).z;
}

double flow_nll(const FlowModel& m, const math::Tensor& batch) {
  const std::size_t bsz = batch.rows(), d = batch.cols();
  if (d != m.cfg.dim) throw std::invalid_argument("flow_nll: batch width != dim");
  double total = 0.0;
  std::vector<double> x(d);
  for (std::size_t r = 0; r < bsz; ++r) {
    std::copy(batch.data.begin() + r * d, batch.data.begin() + (r + 1) * d, x.begin());
    double logdet = 0.0;
    forward_row(m, x, logdet);
    double quad = 0.0;
    for (double v : x) quad += v * v;
    total += 0.5 * static_cast<double>(d) * kLn2Pi + 0.5 * quad - logdet;
  }
  return total / static_cast<double>(bsz);
}

double flow_nll_and_grads(const FlowModel& m, const math::Tensor& batch,
                          std::map<std::string, math::Tensor>& grads) {
  const std::size_t bsz = batch.rows(), d = batch.cols();
  if (d != m.cfg.dim) throw std::invalid_argument("flow_nll_and_grads: batch width != dim");
  math::Graph g;
  std::map<std::string, math::Graph::Id> pid;
  for (const auto& [name, t] : m.params.params) pid[name] = g.leaf(t, true);

  math::Graph::Id x = g.leaf(batch);
  math::Graph::Id ld_mean = g.constant(0.0);  // per-point logdet, batch mean
  for (std::size_t b = 0; b < m.cfg.blocks; ++b) {
    const auto scale = pid[pname(b, "an.scale")];
    x = g.mul(g.add(x, pid[pname(b, "an.bias")]), scale);
    const auto abs_scale = g.add(g.relu(scale), g.relu(g.neg(scale)));
    ld_mean = g.add(ld_mean, g.sum(g.log_(abs_scale)));

    math::Tensor mrow({1, d}), irow({1, d});
    for (std::size_t i = 0; i < d; ++i) {
      mrow.data[i] = mask_passthrough(b, i) ? 1.0 : 0.0;
      irow.data[i] = 1.0 - mrow.data[i];
    }
    const auto mask = g.leaf(mrow), inv_mask = g.leaf(irow);
    const auto xm = g.mul(x, mask);
    const auto hs = g.lrelu(g.add(g.matmul(xm, pid[pname(b, "s.w1")]), pid[pname(b, "s.b1")]), 0.2);
    const auto raw_s = g.add(g.matmul(hs, pid[pname(b, "s.w2")]), pid[pname(b, "s.b2")]);
    const auto s_m = g.mul(g.mul(g.tanh_(raw_s), pid[pname(b, "s.factor")]), inv_mask);
    const auto ht = g.lrelu(g.add(g.matmul(xm, pid[pname(b, "t.w1")]), pid[pname(b, "t.b1")]), 0.2);
    const auto t_m = g.mul(g.add(g.matmul(ht, pid[pname(b, "t.w2")]), pid[pname(b, "t.b2")]), inv_mask);
    x = g.add(g.mul(x, g.exp_(s_m)), t_m);
    ld_mean = g.add(ld_mean, g.scale(g.sum(s_m), 1.0 / static_cast<double>(bsz)));
  }
  const auto quad = g.scale(g.sum(g.mul(x, x)), 0.5 / static_cast<double>(bsz));
  const auto nll =
      g.sub(g.add(g.constant(0.5 * static_cast<double>(d) * kLn2Pi), quad), ld_mean);
  g.backward(nll);
  grads.clear();
  for (const auto& [name, id] : pid) grads[name] = g.grad(id);
  return g.val(nll).data[0];
}

void actnorm_init(FlowModel& m, const math::Tensor& batch) {
  if (m.actnorm_initialized) throw std::logic_error("actnorm_init: already initialized");
  const std::size_t bsz = batch.rows(), d = batch.cols();
  if (d != m.cfg.dim) throw std::invalid_argument("actnorm_init: batch width != dim");
  if (bsz < 2) throw std::invalid_argument("actnorm_init: need at least 2 rows");

  std::vector<std::vector<double>> rows(bsz, std::vector<double>(d));
  for (std::size_t r = 0; r < bsz; ++r) {
    std::copy(batch.data.begin() + r * d, batch.data.begin() + (r + 1) * d, rows[r].begin());
  }
  std::vector<double> s_eff(d), t_eff(d);
  for (std::size_t b = 0; b < m.cfg.blocks; ++b) {
    auto& scale = m.params[pname(b, "an.scale")];
    auto& bias = m.params[pname(b, "an.bias")];
    for (std::size_t i = 0; i < d; ++i) {
      double mean = 0.0;
      for (const auto& r : rows) mean += r[i];
      mean /= static_cast<double>(bsz);
      double var = 0.0;
      for (const auto& r : rows) var += (r[i] - mean) * (r[i] - mean);
      var /= static_cast<double>(bsz);
      const double sigma = std::sqrt(var);
      bias.data[i] = -mean;
      scale.data[i] = 1.0 / std::max(sigma, 1e-6);
    }
    // push the batch through the now-initialized block to feed the next one
    const auto v = block_view(m, b);
    for (auto& r : rows) {
      for (std::size_t i = 0; i < d; ++i) r[i] = (r[i] + bias.data[i]) * scale.data[i];
      coupling_nets(v, b, r, s_eff, t_eff);
      for (std::size_t i = 0; i < d; ++i) r[i] = r[i] * std::exp(s_eff[i]) + t_eff[i];
      check_finite(r, b, "actnorm init");
    }
  }
  m.actnorm_initialized = true;
}

FlowTraining train_flow(const math::Tensor& latents, const FlowConfig& cfg, math::Rng& rng) {
  const std::size_t n = latents.rows();
  if (n < 500) throw std::invalid_argument("train_flow: need at least 500 latents");
  if (latents.cols() != cfg.dim) throw std::invalid_argument("train_flow: latent width != dim");

  FlowTraining out;
  out.model = make_flow(cfg, rng);
  math::AdamWConfig opt;
  opt.lr = cfg.lr;
  opt.weight_decay = cfg.weight_decay;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::map<std::string, math::Tensor> grads;
  rng.shuffle(order);
  actnorm_init(out.model, batch_rows(latents, order, 0, std::min(cfg.batch_size, n)));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0) rng.shuffle(order);
    double total = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(begin + cfg.batch_size, n);
      const auto batch = batch_rows(latents, order, begin, end);
      const double loss = flow_nll_and_grads(out.model, batch, grads);
      math::adamw_step(out.model.params, grads, opt);
      total += loss * static_cast<double>(end - begin);
    }
    const double epoch_nll = total / static_cast<double>(n);
    if (!std::isfinite(epoch_nll)) {
      throw math::NumericsError("train_flow: diverged at epoch " + std::to_string(epoch));
    }
    out.epoch_nll.push_back(epoch_nll);
  }
  return out;
}

void save_flow(const std::string& path, const FlowModel& m) {
  std::map<std::string, std::string> meta;
  meta["kind"] = "flow";
  meta["dim"] = std::to_string(m.cfg.dim);
  meta["hidden"] = std::to_string(m.cfg.hidden);
  meta["blocks"] = std::to_string(m.cfg.blocks);
  meta["actnorm_initialized"] = m.actnorm_initialized ? "1" : "0";
  std::string parities;
  for (std::size_t b = 0; b < m.cfg.blocks; ++b) parities += mask_passthrough(b, 0) ? '0' : '1';
  meta["mask_parities"] = parities;
  math::save_checkpoint(path, m.params, meta);
}

FlowModel load_flow(const std::string& path) {
  std::map<std::string, std::string> meta;
  auto ps = math::load_checkpoint(path, &meta);
  if (meta.at("kind") != "flow") throw std::runtime_error("load_flow: not a flow checkpoint");
  FlowModel m;
  m.cfg.dim = std::stoul(meta.at("dim"));
  m.cfg.hidden = std::stoul(meta.at("hidden"));
  m.cfg.blocks = std::stoul(meta.at("blocks"));
  m.actnorm_initialized = meta.at("actnorm_initialized") == "1";
  const std::string parities = meta.at("mask_parities");
  for (std::size_t b = 0; b < m.cfg.blocks; ++b) {
    if (b >= parities.size() || parities[b] != (mask_passthrough(b, 0) ? '0' : '1')) {
      throw std::runtime_error("load_flow: mask parity mismatch");
    }
  }
  m.params = std::move(ps);
  return m;
}

}  // namespace lhs::flow

#include "lhs/surrogate/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

#include "lhs/math/checkpoint.hpp"
#include "lhs/math/graph.hpp"

namespace lhs::surrogate {

namespace {

void check_config(const SurrogateConfig& cfg) {
  if (cfg.dim == 0 || cfg.hidden == 0) throw std::invalid_argument("surrogate: zero width");
  if (!(cfg.temperature > 0.0)) throw std::invalid_argument("surrogate: temperature must be positive");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
    throw std::invalid_argument("surrogate: dropout must lie in [0, 1)");
  }
}

math::Tensor as_row(const math::Tensor& u, std::size_t dim, const char* what) {
  if (u.shape.size() != 1 || u.data.size() != dim) {
    throw std::invalid_argument(std::string(what) + ": expected a rank-1 vector of length " +
                                std::to_string(dim) + ", got " + math::shape_str(u.shape));
  }
  return math::Tensor::from({1, dim}, u.data);
}

// Shared forward; dropout draws from `rng` only when training.
math::Graph::Id net(math::Graph& g, const std::map<std::string, math::Graph::Id>& p,
                    math::Graph::Id x, double rate, math::Rng* rng, bool training) {
  auto h1 = g.relu(g.add(g.matmul(x, p.at("l1.w")), p.at("l1.b")));
  if (training) h1 = g.dropout(h1, rate, *rng, true);
  auto h2 = g.relu(g.add(g.matmul(h1, p.at("l2.w")), p.at("l2.b")));
  if (training) h2 = g.dropout(h2, rate, *rng, true);
  return g.add(g.matmul(h2, p.at("out.w")), p.at("out.b"));
}

std::map<std::string, math::Graph::Id> param_leaves(math::Graph& g, const SurrogateModel& m,
                                                    bool needs_grad) {
  std::map<std::string, math::Graph::Id> ids;
  for (const auto& [name, t] : m.params.params) ids[name] = g.leaf(t, needs_grad);
  return ids;
}

// Scores a [B, dim] batch with dropout off; one tape, no backward pass.
std::vector<double> score_batch(const SurrogateModel& m, const math::Tensor& batch) {
  math::Graph g;
  auto p = param_leaves(g, m, false);
  auto out = net(g, p, g.leaf(batch), m.cfg.dropout, nullptr, false);
  return g.val(out).data;
}

math::Tensor stack_rows(const std::vector<RankPair>& pairs, const std::vector<std::size_t>& order,
                        std::size_t begin, std::size_t end, bool winners, std::size_t dim) {
  math::Tensor out({end - begin, dim});
  for (std::size_t r = begin; r < end; ++r) {
    const RankPair& pr = pairs[order[r]];
    const math::Tensor& src = winners ? pr.winner : pr.loser;
    std::copy(src.data.begin(), src.data.end(), out.data.begin() + (r - begin) * dim);
  }
  return out;
}

struct SidePairs {
  std::vector<std::size_t> members;            // indices into `scored`
  std::vector<std::pair<std::size_t, std::size_t>> wl;  // (winner, loser) indices
};

void collect_side(const std::vector<ScoredLatent>& scored, const std::set<std::string>& ids,
                  SidePairs& side) {
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (ids.count(scored[i].program_id) != 0) side.members.push_back(i);
  }
  for (std::size_t a = 0; a < side.members.size(); ++a) {
    for (std::size_t b = a + 1; b < side.members.size(); ++b) {
      const std::size_t i = side.members[a], j = side.members[b];
      if (scored[i].s == scored[j].s) continue;
      if (scored[i].program_id == scored[j].program_id) continue;
      if (scored[i].s > scored[j].s) {
        side.wl.emplace_back(i, j);
      } else {
        side.wl.emplace_back(j, i);
      }
    }
  }
}

std::vector<RankPair> materialize(const std::vector<ScoredLatent>& scored, SidePairs& side,
                                  std::size_t cap, math::Rng rng) {
  if (side.wl.size() > cap) {
    rng.shuffle(side.wl);
    side.wl.resize(cap);
  }
  std::vector<RankPair> out;
  out.reserve(side.wl.size());
  for (const auto& [w, l] : side.wl) {
    out.push_back({scored[w].u, scored[l].u, scored[w].program_id, scored[l].program_id});
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SurrogateModel make_surrogate(const SurrogateConfig& cfg, math::Rng& rng) {
  check_config(cfg);
  SurrogateModel m;
  m.cfg = cfg;
  auto& ps = m.params;
  ps["l1.w"] = math::xavier_tensor(cfg.dim, cfg.hidden, rng);
  ps["l1.b"] = math::Tensor({1, cfg.hidden});
  ps["l2.w"] = math::xavier_tensor(cfg.hidden, cfg.hidden, rng);
  ps["l2.b"] = math::Tensor({1, cfg.hidden});
  ps["out.w"] = math::xavier_tensor(cfg.hidden, 1, rng);
  ps["out.b"] = math::Tensor({1, 1});
  return m;
}

SplitPlan make_split(const std::vector<ScoredLatent>& scored, double val_fraction,
                     std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw std::invalid_argument("make_split: validation fraction must lie in [0, 1)");
  }
  std::set<std::string> unique;
  for (const auto& sc : scored) unique.insert(sc.program_id);
  std::vector<std::string> ids(unique.begin(), unique.end());
  math::Rng rng(seed);
  rng.shuffle(ids);
  const auto val_count =
      static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(ids.size())));
  SplitPlan plan;
  plan.val_fraction = val_fraction;
  plan.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i < val_count) {
      plan.val_ids.insert(ids[i]);
    } else {
      plan.train_ids.insert(ids[i]);
    }
  }
  return plan;
}

PairSets build_pairs(const std::vector<ScoredLatent>& scored, const SplitPlan& split,
                     std::size_t cap) {
  for (const auto& sc : scored) {
    if (!std::isfinite(sc.s)) {
      throw std::invalid_argument("build_pairs: non-finite score for program " + sc.program_id);
    }
  }
  bool any_strict = false;
  for (std::size_t i = 1; i < scored.size() && !any_strict; ++i) {
    any_strict = scored[i].s != scored[0].s;
  }
  if (!any_strict) {
    throw std::invalid_argument("build_pairs: all scores are tied, no strict preference pairs");
  }
  for (const auto& id : split.train_ids) {
    if (split.val_ids.count(id) != 0) {
      throw std::invalid_argument("build_pairs: program " + id + " appears on both split sides");
    }
  }
  SidePairs train_side, val_side;
  collect_side(scored, split.train_ids, train_side);
  collect_side(scored, split.val_ids, val_side);
  math::Rng base(split.seed);
  PairSets out;
  out.train = materialize(scored, train_side, cap, base.child(1));
  out.val = materialize(scored, val_side, cap, base.child(2));
  return out;
}

double ranknet_loss(const SurrogateModel& m, const RankPair& pair) {
  const double margin =
      m.cfg.temperature * (surrogate_value(m, pair.winner) - surrogate_value(m, pair.loser));
  // softplus(-margin), split to avoid exp overflow on either side
  return margin >= 0.0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
}

double pairwise_accuracy(const SurrogateModel& m, const std::vector<RankPair>& pairs) {
  if (pairs.empty()) return 0.0;
  const std::size_t dim = m.cfg.dim;
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t hits = 0;
  const std::size_t chunk = 512;
  for (std::size_t begin = 0; begin < pairs.size(); begin += chunk) {
    const std::size_t end = std::min(pairs.size(), begin + chunk);
    const auto fw = score_batch(m, stack_rows(pairs, order, begin, end, true, dim));
    const auto fl = score_batch(m, stack_rows(pairs, order, begin, end, false, dim));
    for (std::size_t r = 0; r < fw.size(); ++r) {
      if (fw[r] > fl[r]) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

SurrogateTraining train_surrogate(const PairSets& pairs, const SurrogateConfig& cfg,
                                  math::Rng& rng) {
  if (pairs.train.empty()) throw std::invalid_argument("train_surrogate: no training pairs");
  for (const auto& side : {&pairs.train, &pairs.val}) {
    for (const auto& pr : *side) {
      if (pr.winner.data.size() != cfg.dim || pr.loser.data.size() != cfg.dim) {
        throw std::invalid_argument("train_surrogate: pair width does not match the model");
      }
    }
  }
  SurrogateTraining out;
  out.model = make_surrogate(cfg, rng);
  out.report.train_pairs = pairs.train.size();
  out.report.val_pairs = pairs.val.size();
  const math::AdamWConfig opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  std::vector<std::size_t> order(pairs.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      math::Graph g;
      auto p = param_leaves(g, out.model, true);
      auto winners = g.leaf(stack_rows(pairs.train, order, begin, end, true, cfg.dim));
      auto losers = g.leaf(stack_rows(pairs.train, order, begin, end, false, cfg.dim));
      auto fw = net(g, p, winners, cfg.dropout, &rng, true);
      auto fl = net(g, p, losers, cfg.dropout, &rng, true);
      auto loss = g.neg(g.mean(g.log_(g.sigmoid(g.scale(g.sub(fw, fl), cfg.temperature)))));
      const double batch_loss = g.val(loss).data[0];
      if (!std::isfinite(batch_loss)) {
        throw math::NumericsError("train_surrogate: diverged at epoch " + std::to_string(epoch));
      }
      g.backward(loss);
      std::map<std::string, math::Tensor> grads;
      for (const auto& [name, id] : p) grads[name] = g.grad(id);
      math::adamw_step(out.model.params, grads, opt);
      loss_sum += batch_loss * static_cast<double>(end - begin);
    }
    out.report.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
    if (!pairs.val.empty()) {
      out.report.epoch_val_acc.push_back(pairwise_accuracy(out.model, pairs.val));
    }
  }
  if (!out.report.epoch_val_acc.empty()) out.report.val_accuracy = out.report.epoch_val_acc.back();
  return out;
}

double surrogate_value(const SurrogateModel& m, const math::Tensor& u) {
  math::Graph g;
  auto p = param_leaves(g, m, false);
  auto out = net(g, p, g.leaf(as_row(u, m.cfg.dim, "surrogate_value")), m.cfg.dropout, nullptr, false);
  return g.val(out).data[0];
}

math::Tensor surrogate_grad(const SurrogateModel& m, const math::Tensor& u) {
  math::Graph g;
  auto p = param_leaves(g, m, false);
  auto x = g.leaf(as_row(u, m.cfg.dim, "surrogate_grad"), true);
  auto out = net(g, p, x, m.cfg.dropout, nullptr, false);
  g.backward(g.sum(out));
  return math::Tensor::from({m.cfg.dim}, g.grad(x).data);
}

std::string report_json(const TrainReport& report) {
  nlohmann::json j;
  j["train_pairs"] = report.train_pairs;
  j["val_pairs"] = report.val_pairs;
  j["epoch_loss"] = report.epoch_loss;
  j["epoch_val_acc"] = report.epoch_val_acc;
  j["val_accuracy"] = report.val_accuracy;
  return j.dump(2);
}

void save_surrogate(const std::string& path, const SurrogateModel& m) {
  std::map<std::string, std::string> meta;
  meta["kind"] = "surrogate";
  meta["dim"] = std::to_string(m.cfg.dim);
  meta["hidden"] = std::to_string(m.cfg.hidden);
  meta["dropout"] = fmt_double(m.cfg.dropout);
  meta["temperature"] = fmt_double(m.cfg.temperature);
  meta["batch_size"] = std::to_string(m.cfg.batch_size);
  meta["epochs"] = std::to_string(m.cfg.epochs);
  meta["lr"] = fmt_double(m.cfg.lr);
  meta["weight_decay"] = fmt_double(m.cfg.weight_decay);
  math::save_checkpoint(path, m.params, meta);
}

SurrogateModel load_surrogate(const std::string& path) {
  std::map<std::string, std::string> meta;
  SurrogateModel m;
  m.params = math::load_checkpoint(path, &meta);
  if (meta.at("kind") != "surrogate") {
    throw std::runtime_error("load_surrogate: checkpoint kind is " + meta.at("kind"));
  }
  m.cfg.dim = std::stoull(meta.at("dim"));
  m.cfg.hidden = std::stoull(meta.at("hidden"));
  m.cfg.dropout = std::stod(meta.at("dropout"));
  m.cfg.temperature = std::stod(meta.at("temperature"));
  m.cfg.batch_size = std::stoull(meta.at("batch_size"));
  m.cfg.epochs = std::stoull(meta.at("epochs"));
  m.cfg.lr = std::stod(meta.at("lr"));
  m.cfg.weight_decay = std::stod(meta.at("weight_decay"));
  check_config(m.cfg);
  return m;
}

}  // namespace lhs::surrogate

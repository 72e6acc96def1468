#include "lhs/dsl/interpret.hpp"

#include <cmath>
#include <stdexcept>

#include "lhs/kernels/kernels.hpp"
#include "lhs/math/rng.hpp"

namespace lhs::dsl {

FeatureFrame make_frame(Task task, std::size_t candidates) {
  FeatureFrame f;
  f.task = task;
  f.candidates = candidates;
  f.features = feature_count(task);
  f.matrix.assign(candidates * f.features, 0.0);
  f.feasible.assign(candidates, 1);
  return f;
}

std::vector<double> interpret(const Program& p, const FeatureFrame& frame) {
  if (p.task != frame.task) {
    throw std::invalid_argument(std::string("interpret: program task ") + task_name(p.task) +
                                " does not match frame task " + task_name(frame.task));
  }
  const std::size_t n = frame.candidates;
  const auto& kt = lhs::kernels::active();
  std::vector<std::vector<double>> stack;
  // Prefix evaluates right to left; after an operator pops, the first pop is
  // its left operand.
  for (std::size_t idx = p.tokens.size(); idx-- > 0;) {
    const int t = p.tokens[idx];
    if (is_constant(t)) {
      std::vector<double> col(n);
      kt.fill(constant_value(t), col.data(), n);
      stack.push_back(std::move(col));
      continue;
    }
    if (is_feature(t)) {
      const std::size_t f = static_cast<std::size_t>(feature_index(t));
      std::vector<double> col(n);
      for (std::size_t c = 0; c < n; ++c) col[c] = frame.at(c, f);
      stack.push_back(std::move(col));
      continue;
    }
    if (arity(t) == 1) {
      std::vector<double>& a = stack.back();
      switch (t) {
        case tok::NEG: kt.neg(a.data(), a.data(), n); break;
        case tok::ABS: kt.vabs(a.data(), a.data(), n); break;
        case tok::EXP:
          for (auto& v : a) v = std::exp(v);
          break;
        case tok::LOG:
          // ln(max(|x|, 1e-6))
          for (auto& v : a) {
            const double m = std::fabs(v);
            v = std::log(m < lhs::kernels::kProtectedDivEps ? lhs::kernels::kProtectedDivEps : m);
          }
          break;
        case tok::SQRT:
          for (auto& v : a) v = std::sqrt(std::fabs(v));
          break;
        default: throw std::logic_error("interpret: bad unary token");
      }
      continue;
    }
    std::vector<double> a = std::move(stack.back());
    stack.pop_back();
    std::vector<double>& b = stack.back();  // result lands here
    switch (t) {
      case tok::ADD: kt.add(a.data(), b.data(), b.data(), n); break;
      case tok::SUB: kt.sub(a.data(), b.data(), b.data(), n); break;
      case tok::MUL: kt.mul(a.data(), b.data(), b.data(), n); break;
      case tok::DIV: kt.pdiv(a.data(), b.data(), b.data(), n); break;
      case tok::MIN: kt.vmin(a.data(), b.data(), b.data(), n); break;
      case tok::MAX: kt.vmax(a.data(), b.data(), b.data(), n); break;
      default: throw std::logic_error("interpret: bad binary token");
    }
  }
  return std::move(stack.back());
}

int select_action(const std::vector<double>& scores, const std::vector<char>& feasible) {
  int best = -1;
  double best_score = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!feasible[i]) continue;
    if (!std::isfinite(scores[i])) return -1;
    if (best < 0 || scores[i] > best_score) {
      best = static_cast<int>(i);
      best_score = scores[i];
    }
  }
  return best;
}

namespace {

struct Range {
  double lo, hi;
};

std::vector<Range> probe_ranges(Task task) {
  switch (task) {
    case Task::TSP:
      return {{0.0, 1.5}, {0.0, 1.5}, {0.0, 1.5}, {0.0, 1.5}, {0.0, 1.0}};
    case Task::CVRP:
      return {{0.0, 1.5}, {0.0, 1.5}, {1.0, 9.0}, {0.0, 2.0}, {0.0, 40.0}};
    case Task::KNAPSACK:
      return {{1.0, 100.0}, {1.0, 110.0}, {0.0, 3.0}, {0.0, 2.0}};
    case Task::OBP:
      return {{0.0, 100.0}, {0.0, 100.0}, {0.0, 1.0}, {0.0, 1.0}};
  }
  return {};
}

std::vector<FeatureFrame> build_probes(Task task) {
  const auto ranges = probe_ranges(task);
  lhs::math::Rng rng(0xD50ULL + static_cast<std::uint64_t>(task));
  std::vector<FeatureFrame> out;
  for (int k = 0; k < 8; ++k) {
    FeatureFrame f = make_frame(task, 6);
    for (std::size_t c = 0; c < f.candidates; ++c) {
      for (std::size_t j = 0; j < f.features; ++j) {
        f.at(c, j) = rng.uniform(ranges[j].lo, ranges[j].hi);
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

const std::vector<FeatureFrame>& probe_frames(Task task) {
  static const std::vector<FeatureFrame> tsp = build_probes(Task::TSP);
  static const std::vector<FeatureFrame> cvrp = build_probes(Task::CVRP);
  static const std::vector<FeatureFrame> knap = build_probes(Task::KNAPSACK);
  static const std::vector<FeatureFrame> obp = build_probes(Task::OBP);
  switch (task) {
    case Task::TSP: return tsp;
    case Task::CVRP: return cvrp;
    case Task::KNAPSACK: return knap;
    case Task::OBP: return obp;
  }
  return tsp;
}

bool valid_on_probes(const Program& p) {
  for (const auto& frame : probe_frames(p.task)) {
    for (double s : interpret(p, frame)) {
      if (!std::isfinite(s)) return false;
    }
  }
  return true;
}

}  // namespace lhs::dsl

#include "lhs/bench/rollout.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

namespace lhs::bench {

namespace {

using Clock = std::chrono::steady_clock;

struct Deadline {
  Clock::time_point start = Clock::now();
  double limit_s = 60.0;
  bool expired() const {
    return std::chrono::duration<double>(Clock::now() - start).count() > limit_s;
  }
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  }
};

std::vector<double> distance_matrix(const std::vector<Point>& pts) {
  const std::size_t n = pts.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i * n + j] = d[j * n + i] = dist(pts[i], pts[j]);
    }
  }
  return d;
}

// First maximum among feasible candidates; -1 when a feasible priority is
// non-finite (invalid program) and -2 when nothing is feasible.
int argmax_feasible(const std::vector<double>& prio, const std::vector<char>& feasible) {
  int best = -2;
  double best_v = 0.0;
  for (std::size_t i = 0; i < prio.size(); ++i) {
    if (!feasible[i]) continue;
    if (!std::isfinite(prio[i])) return -1;
    if (best < 0 || prio[i] > best_v) {
      best = static_cast<int>(i);
      best_v = prio[i];
    }
  }
  return best;
}

// ---- reference heuristic cores -------------------------------------------

// Nearest neighbor: first argmin of distance to the unvisited candidates.
std::size_t funsearch_tsp_nn_pick(std::size_t current, const std::vector<int>& cand,
                                  const std::vector<double>& d, std::size_t n) {
  std::size_t best = 0;
  double best_d = d[current * n + cand[0]];
  for (std::size_t i = 1; i < cand.size(); ++i) {
    const double di = d[current * n + cand[i]];
    if (di < best_d) {
      best_d = di;
      best = i;
    }
  }
  return best;
}

// Soft-min normalized candidate submatrix plus a mean term; index-scaled
// deterministic noise breaks ties; first argmin wins.
std::size_t lhs_tsp_pick(std::size_t current, const std::vector<int>& cand,
                         const std::vector<double>& d, std::size_t n) {
  const std::size_t m = cand.size();
  double sub_max = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      sub_max = std::max(sub_max, d[cand[i] * n + cand[j]]);
    }
  }
  const double denom = 1e-6 + sub_max + 1e-6;
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    double rowsum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      rowsum += std::exp(-d[cand[i] * n + cand[j]] / denom);
    }
    double score = d[current * n + cand[i]] + rowsum * (1.0 / (static_cast<double>(m) + 1e-6));
    if (score < 0.0) score = 0.0;
    score += static_cast<double>(i) * 1e-9;
    if (score < best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

// d_cur - d_dep over the feasible set, first argmin; caller handles the
// empty-feasible depot return.
std::size_t lhs_cvrp_pick(const std::vector<double>& d_cur, const std::vector<double>& d_dep) {
  std::size_t best = 0;
  double best_v = d_cur[0] - d_dep[0];
  for (std::size_t i = 1; i < d_cur.size(); ++i) {
    const double v = d_cur[i] - d_dep[i];
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

struct KnapItem {
  int w, v, idx;
};

// value/weight scaled up for items that consume a large share of the
// remaining capacity; first strict improvement wins.
int lhs_knapsack_pick(int remaining, const std::vector<KnapItem>& items) {
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].w > remaining) continue;
    const double w = items[i].w, v = items[i].v;
    const double score = (v / std::max(1e-12, w)) * (1.0 + 0.5 * (w / remaining));
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(i);
    }
  }
  return best;
}

int ratio_greedy_pick(int remaining, const std::vector<KnapItem>& items) {
  int best = -1;
  double best_ratio = -1.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].w > remaining) continue;
    const double ratio = static_cast<double>(items[i].v) / items[i].w;
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// Bin priorities for one arriving item; the rollout masks infeasible bins.
std::vector<double> obp_priorities(const std::string& name, int item,
                                   const std::vector<int>& bins) {
  std::vector<double> prio(bins.size());
  if (name == "lhs_obp") {
    // a[a < item] = -inf; -clip(a, 0, None)
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (bins[i] < item) {
        prio[i] = -0.0;  // -clip(-inf) = -0; masked anyway
      } else {
        prio[i] = -static_cast<double>(bins[i]);
      }
    }
  } else if (name == "best_fit_obp") {
    for (std::size_t i = 0; i < bins.size(); ++i) {
      prio[i] = -static_cast<double>(bins[i] - item);
    }
  } else {  // first_fit_obp: constant priorities, lowest index wins
    for (auto& p : prio) p = 0.0;
  }
  return prio;
}

// ---- feature frames -------------------------------------------------------

dsl::FeatureFrame tsp_frame(std::size_t current, const std::vector<int>& cand,
                            const std::vector<double>& d, std::size_t n) {
  dsl::FeatureFrame f = dsl::make_frame(dsl::Task::TSP, cand.size());
  const double frac = static_cast<double>(cand.size()) / static_cast<double>(n);
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const std::size_t c = static_cast<std::size_t>(cand[i]);
    double sum = 0.0, mn = 0.0;
    if (cand.size() > 1) {
      mn = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < cand.size(); ++j) {
        if (j == i) continue;
        const double dd = d[c * n + cand[j]];
        sum += dd;
        mn = std::min(mn, dd);
      }
    }
    f.at(i, 0) = d[current * n + c];
    f.at(i, 1) = d[0 * n + c];
    f.at(i, 2) = cand.size() > 1 ? sum / static_cast<double>(cand.size() - 1) : 0.0;
    f.at(i, 3) = cand.size() > 1 ? mn : 0.0;
    f.at(i, 4) = frac;
  }
  return f;
}

dsl::FeatureFrame cvrp_frame(const CvrpInstance& inst, int current,
                             const std::vector<int>& unvisited, int rest) {
  dsl::FeatureFrame f = dsl::make_frame(dsl::Task::CVRP, unvisited.size());
  const Point cur = current < 0 ? inst.depot : inst.customers[current];
  for (std::size_t i = 0; i < unvisited.size(); ++i) {
    const int c = unvisited[i];
    const double demand = inst.demands[c];
    f.at(i, 0) = dist(cur, inst.customers[c]);
    f.at(i, 1) = dist(inst.depot, inst.customers[c]);
    f.at(i, 2) = demand;
    f.at(i, 3) = demand / static_cast<double>(rest);
    f.at(i, 4) = static_cast<double>(rest) - demand;
    f.feasible[i] = inst.demands[c] <= rest ? 1 : 0;
  }
  return f;
}

dsl::FeatureFrame knapsack_frame(const KnapsackInstance& inst, const std::vector<int>& remaining,
                                 int rest) {
  dsl::FeatureFrame f = dsl::make_frame(dsl::Task::KNAPSACK, remaining.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) {
    const int it = remaining[i];
    const double w = inst.weights[it], v = inst.values[it];
    f.at(i, 0) = w;
    f.at(i, 1) = v;
    f.at(i, 2) = v / w;
    f.at(i, 3) = w / static_cast<double>(rest);
    f.feasible[i] = inst.weights[it] <= rest ? 1 : 0;
  }
  return f;
}

dsl::FeatureFrame obp_frame(const std::vector<int>& bins, int item, int capacity) {
  dsl::FeatureFrame f = dsl::make_frame(dsl::Task::OBP, bins.size());
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double rem = bins[i];
    f.at(i, 0) = rem;
    f.at(i, 1) = rem - item;
    f.at(i, 2) = (rem - item) / capacity;
    f.at(i, 3) = (capacity - rem) / static_cast<double>(capacity);
    f.feasible[i] = bins[i] >= item ? 1 : 0;
  }
  return f;
}

// Scores a frame with either kind of policy. Returns candidate index, or -1
// for an invalid (non-finite) program score, or -2 when nothing is feasible.
int choose(const Policy& p, const dsl::FeatureFrame& frame, const std::vector<double>& prio) {
  if (p.kind == Policy::Kind::Program) {
    bool any = false;
    for (char c : frame.feasible) any = any || c;
    if (!any) return -2;
    const auto scores = dsl::interpret(p.program, frame);
    const int pick = dsl::select_action(scores, frame.feasible);
    return pick < 0 ? -1 : pick;
  }
  return argmax_feasible(prio, frame.feasible);
}

}  // namespace

dsl::Task Policy::task() const {
  if (kind == Kind::Program) return program.task;
  if (builtin == "funsearch_tsp_nn" || builtin == "lhs_tsp") return dsl::Task::TSP;
  if (builtin == "lhs_cvrp") return dsl::Task::CVRP;
  if (builtin == "lhs_obp" || builtin == "best_fit_obp" || builtin == "first_fit_obp") {
    return dsl::Task::OBP;
  }
  return dsl::Task::KNAPSACK;
}

std::string Policy::id() const {
  return kind == Kind::Program ? dsl::program_id(program) : builtin;
}

Policy program_policy(dsl::Program p) {
  Policy pol;
  pol.kind = Policy::Kind::Program;
  pol.program = std::move(p);
  return pol;
}

const std::vector<std::string>& reference_heuristic_names() {
  static const std::vector<std::string> names = {
      "funsearch_tsp_nn", "lhs_tsp",       "lhs_cvrp",
      "lhs_knapsack",     "lhs_obp",       "best_fit_obp",
      "first_fit_obp",    "ratio_greedy_knapsack", "eoh_knapsack_ratio"};
  return names;
}

Policy reference_heuristic(const std::string& name) {
  const auto& names = reference_heuristic_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw std::invalid_argument("unknown reference heuristic '" + name + "'");
  }
  Policy p;
  p.kind = Policy::Kind::Builtin;
  p.builtin = name;
  return p;
}

RolloutResult rollout(const Policy& p, const TspInstance& inst, double timeout_s) {
  RolloutResult res;
  if (p.task() != dsl::Task::TSP) throw std::invalid_argument("rollout: policy/task mismatch");
  Deadline dl;
  dl.limit_s = timeout_s;
  const std::size_t n = inst.n();
  const auto d = distance_matrix(inst.coords);
  std::vector<char> visited(n, 0);
  visited[0] = 1;
  std::size_t current = 0;
  double cost = 0.0;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    if (dl.expired()) return res;
    std::vector<int> cand;
    for (std::size_t i = 0; i < n; ++i) {
      if (!visited[i]) cand.push_back(static_cast<int>(i));
    }
    int pick;
    if (p.kind == Policy::Kind::Program) {
      pick = choose(p, tsp_frame(current, cand, d, n), {});
    } else if (p.builtin == "funsearch_tsp_nn") {
      pick = static_cast<int>(funsearch_tsp_nn_pick(current, cand, d, n));
    } else {
      pick = static_cast<int>(lhs_tsp_pick(current, cand, d, n));
    }
    if (pick < 0) return res;
    const std::size_t next = static_cast<std::size_t>(cand[pick]);
    cost += d[current * n + next];
    visited[next] = 1;
    current = next;
  }
  cost += d[current * n + 0];
  res.cost = cost;
  res.valid = true;
  res.wall_ms = dl.elapsed_ms();
  return res;
}

RolloutResult rollout(const Policy& p, const CvrpInstance& inst, double timeout_s) {
  RolloutResult res;
  if (p.task() != dsl::Task::CVRP) throw std::invalid_argument("rollout: policy/task mismatch");
  Deadline dl;
  dl.limit_s = timeout_s;
  const std::size_t n = inst.n();
  std::vector<char> served(n, 0);
  std::size_t left = n;
  int current = -1;  // depot
  int rest = inst.capacity;
  double cost = 0.0;
  const std::size_t step_budget = 4 * (n + 1);
  std::size_t steps = 0;
  while (left > 0) {
    if (dl.expired() || ++steps > step_budget) return res;
    std::vector<int> unvisited;
    for (std::size_t i = 0; i < n; ++i) {
      if (!served[i]) unvisited.push_back(static_cast<int>(i));
    }
    const Point cur = current < 0 ? inst.depot : inst.customers[current];
    int next = -1;  // -1 encodes a depot return
    if (p.kind == Policy::Kind::Program) {
      const auto frame = cvrp_frame(inst, current, unvisited, rest);
      const int pick = choose(p, frame, {});
      if (pick == -1) return res;  // non-finite program score
      if (pick >= 0) next = unvisited[pick];
    } else {
      std::vector<int> feasible;
      for (int c : unvisited) {
        if (inst.demands[c] <= rest) feasible.push_back(c);
      }
      if (!feasible.empty()) {
        std::vector<double> d_cur(feasible.size()), d_dep(feasible.size());
        for (std::size_t i = 0; i < feasible.size(); ++i) {
          d_cur[i] = dist(cur, inst.customers[feasible[i]]);
          d_dep[i] = dist(inst.depot, inst.customers[feasible[i]]);
        }
        next = feasible[lhs_cvrp_pick(d_cur, d_dep)];
      }
    }
    if (next < 0) {
      if (current < 0) return res;  // stuck at depot with full capacity
      cost += dist(cur, inst.depot);
      current = -1;
      rest = inst.capacity;
      continue;
    }
    cost += dist(cur, inst.customers[next]);
    rest -= inst.demands[next];
    served[next] = 1;
    --left;
    current = next;
  }
  if (current >= 0) cost += dist(inst.customers[current], inst.depot);
  res.cost = cost;
  res.valid = true;
  res.wall_ms = dl.elapsed_ms();
  return res;
}

RolloutResult rollout(const Policy& p, const KnapsackInstance& inst, double timeout_s) {
  RolloutResult res;
  if (p.task() != dsl::Task::KNAPSACK) {
    throw std::invalid_argument("rollout: policy/task mismatch");
  }
  Deadline dl;
  dl.limit_s = timeout_s;
  std::vector<int> remaining(inst.n());
  for (std::size_t i = 0; i < inst.n(); ++i) remaining[i] = static_cast<int>(i);
  int rest = inst.capacity;
  double value = 0.0;
  while (!remaining.empty()) {
    if (dl.expired()) return res;
    int pick;
    if (p.kind == Policy::Kind::Program) {
      pick = choose(p, knapsack_frame(inst, remaining, rest), {});
      if (pick == -1) return res;
      if (pick == -2) break;  // nothing fits
    } else {
      std::vector<KnapItem> items;
      items.reserve(remaining.size());
      for (int it : remaining) items.push_back({inst.weights[it], inst.values[it], it});
      pick = p.builtin == "lhs_knapsack" ? lhs_knapsack_pick(rest, items)
                                         : ratio_greedy_pick(rest, items);
      if (pick < 0) break;
    }
    const int it = remaining[pick];
    value += inst.values[it];
    rest -= inst.weights[it];
    remaining.erase(remaining.begin() + pick);
  }
  res.cost = value;
  res.valid = true;
  res.wall_ms = dl.elapsed_ms();
  return res;
}

RolloutResult rollout(const Policy& p, const ObpInstance& inst, double timeout_s) {
  RolloutResult res;
  if (p.task() != dsl::Task::OBP) throw std::invalid_argument("rollout: policy/task mismatch");
  Deadline dl;
  dl.limit_s = timeout_s;
  std::vector<int> bins;  // remaining capacities of open bins
  for (int item : inst.sizes) {
    if (dl.expired()) return res;
    int pick = -2;
    if (!bins.empty()) {
      if (p.kind == Policy::Kind::Program) {
        pick = choose(p, obp_frame(bins, item, inst.capacity), {});
        if (pick == -1) return res;
      } else {
        const auto frame = obp_frame(bins, item, inst.capacity);
        pick = argmax_feasible(obp_priorities(p.builtin, item, bins), frame.feasible);
      }
    }
    if (pick < 0) {
      bins.push_back(inst.capacity - item);
    } else {
      bins[pick] -= item;
    }
  }
  res.cost = static_cast<double>(bins.size());
  res.valid = true;
  res.wall_ms = dl.elapsed_ms();
  return res;
}

RolloutResult rollout_in(const Policy& p, const Benchmark& bench, std::size_t index) {
  switch (bench.task) {
    case dsl::Task::TSP: return rollout(p, bench.tsp.at(index), bench.timeout_seconds);
    case dsl::Task::CVRP: return rollout(p, bench.cvrp.at(index), bench.timeout_seconds);
    case dsl::Task::KNAPSACK: return rollout(p, bench.knapsack.at(index), bench.timeout_seconds);
    case dsl::Task::OBP: return rollout(p, bench.obp.at(index), bench.timeout_seconds);
  }
  throw std::logic_error("rollout_in: bad task");
}

Score evaluate(const Policy& p, const Benchmark& bench, int parallelism) {
  if (bench.size() == 0) throw std::invalid_argument("evaluate: empty benchmark");
  if (p.task() != bench.task) throw std::invalid_argument("evaluate: policy/benchmark mismatch");
  Deadline dl;
  const std::size_t m = bench.size();
  std::vector<RolloutResult> results(m);
  const int workers = std::max(1, std::min<int>(parallelism, static_cast<int>(m)));
  if (workers == 1) {
    for (std::size_t i = 0; i < m; ++i) results[i] = rollout_in(p, bench, i);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = cursor.fetch_add(1);
          if (i >= m) return;
          results[i] = rollout_in(p, bench, i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  Score score;
  score.costs.assign(m, std::numeric_limits<double>::quiet_NaN());
  bool all_valid = true;
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (results[i].valid) {
      score.costs[i] = results[i].cost;
      sum += results[i].cost;
    } else {
      all_valid = false;
    }
  }
  score.valid = all_valid;
  if (all_valid) {
    score.y = sum / static_cast<double>(m);
    score.s = bench.alpha() * score.y;
  }
  score.wall_ms = dl.elapsed_ms();
  return score;
}

std::vector<ResultRow> result_rows(const Policy& p, const Benchmark& bench, const Score& score) {
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < bench.size(); ++i) {
    ResultRow r;
    r.policy_id = p.id();
    r.task = dsl::task_name(bench.task);
    std::uint64_t seed = 0;
    switch (bench.task) {
      case dsl::Task::TSP: seed = bench.tsp[i].seed; break;
      case dsl::Task::CVRP: seed = bench.cvrp[i].seed; break;
      case dsl::Task::KNAPSACK: seed = bench.knapsack[i].seed; break;
      case dsl::Task::OBP: seed = bench.obp[i].seed; break;
    }
    r.instance_id = "i" + std::to_string(i) + "_s" + std::to_string(seed);
    r.valid = std::isfinite(score.costs[i]);
    r.cost = r.valid ? score.costs[i] : 0.0;
    r.wall_ms = 0.0;  // per-instance wall time folded into Score.wall_ms
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("results: cannot open '" + path + "' for writing");
  os << "policy_id,task,instance_id,cost,wall_ms,valid\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.policy_id << "," << r.task << "," << r.instance_id << "," << r.cost << ","
       << r.wall_ms << "," << (r.valid ? 1 : 0) << "\n";
  }
}

}  // namespace lhs::bench

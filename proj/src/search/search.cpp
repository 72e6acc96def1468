#include "lhs/search/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>
#include <set>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace lhs::search {

namespace {

using math::Rng;
using math::Tensor;

double signed_score(const ScoredEntry& e) { return e.score.s.value(); }

double vec_norm(const Tensor& v) {
  double sq = 0.0;
  for (double x : v.data) sq += x * x;
  return std::sqrt(sq);
}

Origin origin_for(Variant v) {
  switch (v) {
    case Variant::LHS: return Origin::LHS;
    case Variant::NO_FLOW: return Origin::NO_FLOW;
    case Variant::NO_GRAD: return Origin::NO_GRAD;
  }
  return Origin::LHS;
}

// One decode target plus its provenance; filled per variant, consumed by the
// shared decode/evaluate/insert machinery.
struct Candidate {
  Tensor target_u;
  std::vector<std::string> parents;
  std::vector<double> ascent_norms;
};

struct RunState {
  const SearchConfig& cfg;
  const ModelSet& ms;
  const bench::Benchmark& benchmark;
  Database db;
  SearchReport report;
  Rng rng;
  std::size_t budget;
  AscentOracle counted;  // surrogate wrapped with the call counter
  std::set<std::string> known_ids;

  RunState(const SearchConfig& c, const ModelSet& m, const bench::Benchmark& b)
      : cfg(c), ms(m), benchmark(b), rng(c.seed), budget(c.budget) {
    counted.value = [this](const Tensor& u) {
      ++report.surrogate_calls;
      return surrogate::surrogate_value(ms.surrogate, u);
    };
    counted.grad = [this](const Tensor& u) {
      ++report.surrogate_calls;
      return surrogate::surrogate_grad(ms.surrogate, u);
    };
  }

  bool uses_flow() const { return cfg.variant != Variant::NO_FLOW; }

  void insert(dsl::Program program, bench::Score score, Origin origin, std::size_t round,
              std::vector<std::string> parents) {
    ScoredEntry e;
    e.id = dsl::program_id(program);
    if (!known_ids.insert(e.id).second) return;  // the database is a set
    e.z = models::encode(ms.encoder, program);
    e.u = uses_flow() ? flow::flow_forward(ms.flow, e.z).u : e.z;
    e.program = std::move(program);
    e.score = std::move(score);
    e.origin = origin;
    e.round = round;
    e.parents = std::move(parents);
    db.entries.push_back(std::move(e));
  }

  std::size_t draw_family() {
    return static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(ms.decoder.cfg.families) - 1));
  }

  std::vector<Candidate> gradient_candidates() {
    const auto seeds = select_seeds(db, cfg.top_pool, cfg.candidates_per_round, rng);
    std::vector<Candidate> out;
    for (std::size_t idx : seeds) {
      const ScoredEntry& e = db.entries[idx];
      const Tensor z0 = models::encode(ms.encoder, e.program);
      const Tensor u0 = uses_flow() ? flow::flow_forward(ms.flow, z0).u : z0;
      const auto traj = ascend(u0, counted, cfg.ascent_steps, cfg.step_size);
      Candidate c;
      c.target_u = traj.back();
      c.parents = {e.id};
      c.ascent_norms.reserve(traj.size());
      for (const auto& u : traj) c.ascent_norms.push_back(vec_norm(u));
      out.push_back(std::move(c));
    }
    return out;
  }

  std::vector<Candidate> midpoint_candidates() {
    const auto pool = top_entries(db, cfg.top_pool);
    if (pool.size() < 2) return {};
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      for (std::size_t j = i + 1; j < pool.size(); ++j) pairs.emplace_back(pool[i], pool[j]);
    }
    rng.shuffle(pairs);
    if (pairs.size() > cfg.candidates_per_round) pairs.resize(cfg.candidates_per_round);
    std::vector<Candidate> out;
    for (const auto& [a, b] : pairs) {
      const ScoredEntry& ea = db.entries[a];
      const ScoredEntry& eb = db.entries[b];
      Candidate c;
      c.target_u = ea.u;
      for (std::size_t i = 0; i < c.target_u.data.size(); ++i) {
        c.target_u.data[i] = 0.5 * (ea.u.data[i] + eb.u.data[i]);
      }
      c.parents = {ea.id, eb.id};
      out.push_back(std::move(c));
    }
    return out;
  }

  // Decodes serially (shared rng), evaluates surviving programs in parallel,
  // inserts in candidate order. Every decode spends budget whether or not
  // anything comes of it.
  void run_round(std::size_t round) {
    const auto cands = cfg.variant == Variant::NO_GRAD ? midpoint_candidates()
                                                       : gradient_candidates();
    struct Pending {
      dsl::Program program;
      std::size_t log_index;
      std::size_t cand_index;
    };
    std::vector<Pending> pending;
    for (std::size_t ci = 0; ci < cands.size() && budget > 0; ++ci) {
      const Candidate& c = cands[ci];
      const Tensor zstar = uses_flow() ? flow::flow_inverse(ms.flow, c.target_u) : c.target_u;
      const Tensor prompt = models::map_prompt(ms.mapper, zstar);
      DecodeLog log;
      log.round = round;
      log.parents = c.parents;
      log.ascent_norms = c.ascent_norms;
      log.family = draw_family();
      log.tokens = models::decode(ms.decoder, log.family, prompt, cfg.temperature, cfg.top_p,
                                  rng, ms.decoder.cfg.max_len);
      --budget;
      log.budget_remaining = budget;
      ++report.decodes_total;
      report.decode_log.push_back(log);
      try {
        dsl::Program program = dsl::parse(benchmark.task, report.decode_log.back().tokens);
        if (dsl::valid_on_probes(program)) {
          pending.push_back({std::move(program), report.decode_log.size() - 1, ci});
        }
      } catch (const dsl::ParseError&) {
      }
    }

    std::vector<bench::Score> scores(pending.size());
    if (cfg.parallelism > 1 && pending.size() > 1) {
      const int inner = std::max(1, cfg.parallelism / static_cast<int>(pending.size()));
      std::vector<std::future<bench::Score>> futs;
      futs.reserve(pending.size());
      for (const auto& p : pending) {
        futs.push_back(std::async(std::launch::async, [this, &p, inner] {
          return bench::evaluate(bench::program_policy(p.program), benchmark, inner);
        }));
      }
      for (std::size_t i = 0; i < futs.size(); ++i) scores[i] = futs[i].get();
    } else {
      for (std::size_t i = 0; i < pending.size(); ++i) {
        scores[i] = bench::evaluate(bench::program_policy(pending[i].program), benchmark,
                                    cfg.parallelism);
      }
    }

    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (!scores[i].valid) continue;
      DecodeLog& log = report.decode_log[pending[i].log_index];
      log.valid = true;
      log.score_s = scores[i].s.value();
      ++report.decodes_valid;
      insert(pending[i].program, scores[i], origin_for(cfg.variant), round,
             cands[pending[i].cand_index].parents);
    }
  }

  void init_population(const dsl::Program& reference) {
    bench::Score ref_score =
        bench::evaluate(bench::program_policy(reference), benchmark, cfg.parallelism);
    if (!ref_score.valid) {
      throw std::invalid_argument("run_search: reference program is invalid on the benchmark");
    }
    insert(reference, std::move(ref_score), Origin::SEED, 0, {});
    const std::string ref_id = db.entries.front().id;

    // Samples of the reference latent fill out the population; invalid or
    // duplicate decodes are retried up to a fixed attempt cap and never touch
    // the budget.
    const Tensor prompt = models::map_prompt(ms.mapper, db.entries.front().z);
    const std::size_t want = cfg.population;
    std::size_t attempts = 0;
    const std::size_t cap = 6 * (want > 0 ? want : 1);
    while (db.entries.size() < want && attempts < cap) {
      ++attempts;
      const std::size_t family = draw_family();
      const auto tokens = models::decode(ms.decoder, family, prompt, cfg.temperature, cfg.top_p,
                                         rng, ms.decoder.cfg.max_len);
      try {
        dsl::Program program = dsl::parse(benchmark.task, tokens);
        if (!dsl::valid_on_probes(program)) continue;
        if (known_ids.count(dsl::program_id(program)) != 0) continue;
        bench::Score score =
            bench::evaluate(bench::program_policy(program), benchmark, cfg.parallelism);
        if (!score.valid) continue;
        insert(std::move(program), std::move(score), Origin::SEED, 0, {ref_id});
      } catch (const dsl::ParseError&) {
      }
    }
    report.initial_population = db.entries.size();
  }
};

nlohmann::json report_to_json(const SearchReport& r) {
  nlohmann::json j;
  j["variant"] = variant_name(r.variant);
  j["seed"] = r.seed;
  j["best_id"] = r.best_id;
  j["best_tokens"] = r.best_program.tokens;
  j["best_spellings"] = dsl::serialize(r.best_program);
  j["best_s"] = r.best_s;
  j["best_y"] = r.best_y;
  j["success_rate"] = r.success_rate;
  j["best_curve"] = r.best_curve;
  j["wall_ms"] = r.wall_ms;
  j["decodes_total"] = r.decodes_total;
  j["decodes_valid"] = r.decodes_valid;
  j["surrogate_calls"] = r.surrogate_calls;
  j["rounds_run"] = r.rounds_run;
  j["initial_population"] = r.initial_population;
  return j;
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::LHS: return "lhs";
    case Variant::NO_FLOW: return "no_flow";
    case Variant::NO_GRAD: return "no_grad";
  }
  return "lhs";
}

Variant variant_from_name(const std::string& s) {
  if (s == "lhs") return Variant::LHS;
  if (s == "no_flow") return Variant::NO_FLOW;
  if (s == "no_grad") return Variant::NO_GRAD;
  throw std::invalid_argument("unknown search variant '" + s + "'");
}

const char* origin_name(Origin o) {
  switch (o) {
    case Origin::SEED: return "seed";
    case Origin::LHS: return "lhs";
    case Origin::NO_FLOW: return "no_flow";
    case Origin::NO_GRAD: return "no_grad";
  }
  return "seed";
}

std::vector<std::size_t> top_entries(const Database& db, std::size_t k) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < db.entries.size(); ++i) {
    if (db.entries[i].score.valid) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return signed_score(db.entries[a]) > signed_score(db.entries[b]);
  });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

std::size_t best_index(const Database& db) {
  const auto top = top_entries(db, 1);
  if (top.empty()) throw std::runtime_error("best_index: no valid entries");
  return top.front();
}

std::vector<std::size_t> select_seeds(const Database& db, std::size_t pool, std::size_t count,
                                      math::Rng& rng) {
  const auto top = top_entries(db, pool);
  if (top.size() <= count) return top;
  // Draw proportional to exp(s - max s); removing each winner renormalizes
  // the remainder implicitly.
  double mx = signed_score(db.entries[top.front()]);
  std::vector<double> w(top.size());
  for (std::size_t i = 0; i < top.size(); ++i) {
    w[i] = std::exp(signed_score(db.entries[top[i]]) - mx);
  }
  std::vector<char> used(top.size(), 0);
  std::vector<std::size_t> picked;
  while (picked.size() < count) {
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!used[i]) total += w[i];
    }
    double r = rng.uniform() * total;
    std::size_t chosen = top.size();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (used[i]) continue;
      chosen = i;
      r -= w[i];
      if (r <= 0.0) break;
    }
    used[chosen] = 1;
    picked.push_back(top[chosen]);
  }
  return picked;
}

AscentOracle surrogate_oracle(const surrogate::SurrogateModel& m) {
  AscentOracle f;
  f.value = [&m](const Tensor& u) { return surrogate::surrogate_value(m, u); };
  f.grad = [&m](const Tensor& u) { return surrogate::surrogate_grad(m, u); };
  return f;
}

std::vector<Tensor> ascend(const Tensor& u0, const AscentOracle& f, std::size_t steps,
                           double eta) {
  std::vector<Tensor> traj;
  traj.reserve(steps + 1);
  traj.push_back(u0);
  Tensor u = u0;
  double fcur = f.value(u0);
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor g = f.grad(u);
    double step = eta;
    Tensor next = u;
    double fnext = fcur;
    // Raw step plus up to three halvings; a step that still loses is
    // dropped, which keeps the value non-decreasing.
    for (int attempt = 0; attempt < 4; ++attempt) {
      Tensor cand = u;
      for (std::size_t i = 0; i < cand.data.size(); ++i) cand.data[i] += step * g.data[i];
      const double fc = f.value(cand);
      if (fc >= fcur) {
        next = std::move(cand);
        fnext = fc;
        break;
      }
      step *= 0.5;
    }
    u = std::move(next);
    fcur = fnext;
    traj.push_back(u);
  }
  return traj;
}

SearchResult run_search(const SearchConfig& cfg, const ModelSet& models,
                        const bench::Benchmark& benchmark, const dsl::Program& reference) {
  if (cfg.candidates_per_round == 0) {
    throw std::invalid_argument("run_search: candidates_per_round must be positive");
  }
  if (cfg.top_pool == 0) throw std::invalid_argument("run_search: top_pool must be positive");
  if (reference.task != benchmark.task) {
    throw std::invalid_argument("run_search: reference program task does not match benchmark");
  }
  const auto t0 = std::chrono::steady_clock::now();
  RunState st(cfg, models, benchmark);
  st.report.variant = cfg.variant;
  st.report.seed = cfg.seed;
  st.init_population(reference);

  st.report.best_curve.push_back(signed_score(st.db.entries[best_index(st.db)]));
  std::size_t round = 0;
  while (st.budget > 0 && (cfg.rounds == 0 || round < cfg.rounds)) {
    ++round;
    const std::size_t before = st.budget;
    st.run_round(round);
    st.report.rounds_run = round;
    st.report.best_curve.push_back(signed_score(st.db.entries[best_index(st.db)]));
    if (st.budget == before) break;  // no decodable candidates left
  }

  const std::size_t bi = best_index(st.db);
  st.report.best_id = st.db.entries[bi].id;
  st.report.best_program = st.db.entries[bi].program;
  st.report.best_s = signed_score(st.db.entries[bi]);
  st.report.best_y = st.db.entries[bi].score.y;
  st.report.success_rate =
      st.report.decodes_total == 0
          ? 0.0
          : static_cast<double>(st.report.decodes_valid) /
                static_cast<double>(st.report.decodes_total);
  st.report.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  return {std::move(st.db), std::move(st.report)};
}

std::string report_json(const SearchReport& r) { return report_to_json(r).dump(2); }

void write_report_json(const std::string& path, const SearchReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report_json: cannot open " + path);
  out << report_to_json(r).dump(2) << "\n";
}

void write_search_log_jsonl(const std::string& path, const SearchReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_search_log_jsonl: cannot open " + path);
  for (const auto& d : r.decode_log) {
    nlohmann::json j;
    j["round"] = d.round;
    j["parents"] = d.parents;
    j["ascent_norms"] = d.ascent_norms;
    j["family"] = d.family;
    j["tokens"] = d.tokens;
    j["valid"] = d.valid;
    if (d.valid) j["score_s"] = d.score_s;
    j["budget_remaining"] = d.budget_remaining;
    out << j.dump() << "\n";
  }
}

void write_curve_csv(const std::string& path, const SearchReport& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_curve_csv: cannot open " + path);
  out << "round,best_s\n";
  for (std::size_t i = 0; i < r.best_curve.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", r.best_curve[i]);
    out << i << "," << buf << "\n";
  }
}

}  // namespace lhs::search

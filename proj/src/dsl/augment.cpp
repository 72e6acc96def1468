#include "lhs/dsl/augment.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <string>

namespace lhs::dsl {

namespace {

constexpr int kConstOne = tok::C_BASE + 7;  // C1.0

void gen_expr(Task task, lhs::math::Rng& rng, int depth, std::vector<int>& out) {
  const bool leaf = depth <= 1 || rng.uniform() < 0.3;
  if (leaf) {
    if (rng.uniform() < 0.7) {
      out.push_back(feature_token(static_cast<int>(rng.index(feature_count(task)))));
    } else {
      out.push_back(constant_token_at(rng.index(kConstantCount)));
    }
    return;
  }
  const int op = tok::ADD + static_cast<int>(rng.index(11));
  out.push_back(op);
  for (int c = 0; c < arity(op); ++c) gen_expr(task, rng, depth - 1, out);
}

struct Site {
  enum Kind {
    kSwap,
    kNegNegElim,
    kNegNegInsert,
    kMulOneWrap,
    kMulOneUnwrapLeft,
    kMulOneUnwrapRight,
    kConstShift,
    kFeatureSwap,
    kMinMaxFlip,
    kAddSubFlip,
  } kind;
  std::size_t pos;
};

bool commutative(int t) {
  return t == tok::ADD || t == tok::MUL || t == tok::MIN || t == tok::MAX;
}

std::vector<Site> syntactic_sites(const std::vector<int>& toks) {
  std::vector<Site> sites;
  const bool room = toks.size() + 2 <= kMaxProgramTokens;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const int t = toks[i];
    if (commutative(t)) sites.push_back({Site::kSwap, i});
    if (t == tok::NEG && toks[i + 1] == tok::NEG) sites.push_back({Site::kNegNegElim, i});
    if (t == tok::MUL) {
      const std::size_t l = subtree_extent(toks, i + 1);
      if (l == 1 && toks[i + 1] == kConstOne) sites.push_back({Site::kMulOneUnwrapLeft, i});
      if (subtree_extent(toks, i + 1 + l) == 1 && toks[i + 1 + l] == kConstOne) {
        sites.push_back({Site::kMulOneUnwrapRight, i});
      }
    }
    if (room) {
      sites.push_back({Site::kNegNegInsert, i});
      sites.push_back({Site::kMulOneWrap, i});
    }
  }
  return sites;
}

std::vector<Site> parametric_sites(const std::vector<int>& toks) {
  std::vector<Site> sites;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (is_constant(toks[i])) sites.push_back({Site::kConstShift, i});
  }
  return sites;
}

std::vector<Site> behavioral_sites(const std::vector<int>& toks, Task task) {
  std::vector<Site> sites;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const int t = toks[i];
    if (is_feature(t) && feature_count(task) > 1) sites.push_back({Site::kFeatureSwap, i});
    if (t == tok::MIN || t == tok::MAX) sites.push_back({Site::kMinMaxFlip, i});
    if (t == tok::ADD || t == tok::SUB) sites.push_back({Site::kAddSubFlip, i});
  }
  return sites;
}

std::vector<int> apply_site(const std::vector<int>& toks, const Site& s, Task task,
                            lhs::math::Rng& rng) {
  std::vector<int> out = toks;
  switch (s.kind) {
    case Site::kSwap: {
      const std::size_t l = subtree_extent(out, s.pos + 1);
      const std::size_t r = subtree_extent(out, s.pos + 1 + l);
      std::vector<int> left(out.begin() + s.pos + 1, out.begin() + s.pos + 1 + l);
      std::vector<int> right(out.begin() + s.pos + 1 + l, out.begin() + s.pos + 1 + l + r);
      std::copy(right.begin(), right.end(), out.begin() + s.pos + 1);
      std::copy(left.begin(), left.end(), out.begin() + s.pos + 1 + r);
      break;
    }
    case Site::kNegNegElim:
      out.erase(out.begin() + s.pos, out.begin() + s.pos + 2);
      break;
    case Site::kNegNegInsert:
      out.insert(out.begin() + s.pos, {tok::NEG, tok::NEG});
      break;
    case Site::kMulOneWrap:
      out.insert(out.begin() + s.pos, {tok::MUL, kConstOne});
      break;
    case Site::kMulOneUnwrapLeft:
      out.erase(out.begin() + s.pos, out.begin() + s.pos + 2);
      break;
    case Site::kMulOneUnwrapRight: {
      const std::size_t l = subtree_extent(out, s.pos + 1);
      out.erase(out.begin() + s.pos + 1 + l);  // the C1.0
      out.erase(out.begin() + s.pos);          // the MUL
      break;
    }
    case Site::kConstShift: {
      const int idx = constant_index(out[s.pos]);
      int next;
      if (idx == 0) {
        next = 1;
      } else if (idx == static_cast<int>(kConstantCount) - 1) {
        next = idx - 1;
      } else {
        next = rng.uniform() < 0.5 ? idx - 1 : idx + 1;
      }
      out[s.pos] = constant_token_at(static_cast<std::size_t>(next));
      break;
    }
    case Site::kFeatureSwap: {
      const int cur = feature_index(out[s.pos]);
      const int n = static_cast<int>(feature_count(task));
      int pick = static_cast<int>(rng.index(static_cast<std::size_t>(n - 1)));
      if (pick >= cur) ++pick;
      out[s.pos] = feature_token(pick);
      break;
    }
    case Site::kMinMaxFlip:
      out[s.pos] = out[s.pos] == tok::MIN ? tok::MAX : tok::MIN;
      break;
    case Site::kAddSubFlip:
      out[s.pos] = out[s.pos] == tok::ADD ? tok::SUB : tok::ADD;
      break;
  }
  return out;
}

}  // namespace

const char* strategy_name(AugmentStrategy s) {
  switch (s) {
    case AugmentStrategy::SYNTACTIC: return "syntactic";
    case AugmentStrategy::PARAMETRIC: return "parametric";
    case AugmentStrategy::BEHAVIORAL: return "behavioral";
  }
  return "?";
}

Program sample_seed_program(Task task, lhs::math::Rng& rng, int max_depth) {
  if (max_depth < 1) throw std::invalid_argument("sample_seed_program: max_depth must be >= 1");
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<int> toks;
    gen_expr(task, rng, max_depth, toks);
    if (toks.size() > kMaxProgramTokens) continue;
    Program p = parse(task, toks);
    if (valid_on_probes(p)) return p;
  }
  return parse(task, {tok::NEG, tok::F_BASE});
}

Program augment(const Program& p, AugmentStrategy strategy, lhs::math::Rng& rng) {
  std::vector<Site> sites;
  switch (strategy) {
    case AugmentStrategy::SYNTACTIC: sites = syntactic_sites(p.tokens); break;
    case AugmentStrategy::PARAMETRIC: sites = parametric_sites(p.tokens); break;
    case AugmentStrategy::BEHAVIORAL: sites = behavioral_sites(p.tokens, p.task); break;
  }
  if (sites.empty()) return p;
  const Site& s = sites[rng.index(sites.size())];
  return parse(p.task, apply_site(p.tokens, s, p.task, rng));
}

std::vector<std::size_t> dedupe_indices(const std::vector<Program>& programs) {
  std::vector<std::size_t> keep;
  std::map<std::uint64_t, std::size_t> by_tree;
  std::map<std::string, std::size_t> by_behavior;
  for (std::size_t i = 0; i < programs.size(); ++i) {
    const Program& p = programs[i];
    const std::uint64_t th = program_hash(p);
    if (by_tree.count(th)) continue;
    by_tree[th] = i;

    bool finite = true;
    std::string sig;
    sig.reserve(8 * 6 * sizeof(double) + 8);
    sig += task_name(p.task);
    for (const auto& frame : probe_frames(p.task)) {
      for (double v : interpret(p, frame)) {
        if (!std::isfinite(v)) {
          finite = false;
          break;
        }
        if (v == 0.0) v = 0.0;  // collapse -0.0 onto +0.0
        char buf[sizeof(double)];
        std::memcpy(buf, &v, sizeof(double));
        sig.append(buf, sizeof(double));
      }
      if (!finite) break;
    }
    // Invalid programs only collapse on exact tree equality.
    if (finite) {
      if (by_behavior.count(sig)) continue;
      by_behavior[sig] = i;
    }
    keep.push_back(i);
  }
  return keep;
}

std::vector<Program> dedupe(const std::vector<Program>& programs) {
  std::vector<Program> out;
  for (std::size_t i : dedupe_indices(programs)) out.push_back(programs[i]);
  return out;
}

}  // namespace lhs::dsl

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "lhs/dsl/augment.hpp"
#include "lhs/dsl/corpus.hpp"
#include "lhs/dsl/interpret.hpp"
#include "lhs/math/rng.hpp"

using namespace lhs::dsl;
using lhs::math::Rng;

namespace {

Program P(Task task, std::initializer_list<const char*> spellings) {
  std::vector<std::string> v;
  for (const char* s : spellings) v.emplace_back(s);
  return parse_spellings(task, v);
}

FeatureFrame frame_with_f0(Task task, const std::vector<double>& f0) {
  FeatureFrame f = make_frame(task, f0.size());
  for (std::size_t c = 0; c < f0.size(); ++c) f.at(c, 0) = f0[c];
  return f;
}

}  // namespace

TEST_CASE("parse accepts well-formed prefix expressions") {
  Program p = P(Task::TSP, {"NEG", "F0"});
  CHECK(p.tokens.size() == 2);
  CHECK(serialize(p) == std::vector<std::string>{"NEG", "F0"});

  // Parses fine; division is protected at evaluation time, not parse time.
  CHECK_NOTHROW(P(Task::TSP, {"DIV", "F1", "C0.0"}));
}

TEST_CASE("parse rejects malformed sequences") {
  CHECK_THROWS_AS(P(Task::TSP, {"ADD", "F0"}), ParseError);            // missing operand
  CHECK_THROWS_AS(P(Task::TSP, {"F0", "F1"}), ParseError);             // trailing tokens
  CHECK_THROWS_AS(P(Task::TSP, {"NEG"}), ParseError);                  // incomplete
  CHECK_THROWS_AS(P(Task::TSP, {"NEG", "F5"}), ParseError);            // F5 invalid for TSP
  CHECK_THROWS_AS(P(Task::KNAPSACK, {"NEG", "F4"}), ParseError);       // F4 invalid for KNAPSACK
  CHECK_THROWS_AS(P(Task::TSP, {"NEG", "BOS"}), ParseError);           // control token
  CHECK_THROWS_AS(parse(Task::TSP, {}), ParseError);
  CHECK_THROWS_AS(parse(Task::TSP, {99, 23}), ParseError);             // unknown id

  std::vector<int> too_long;
  for (int i = 0; i < 32; ++i) too_long.push_back(tok::NEG);
  too_long.push_back(tok::F_BASE);
  for (int i = 0; i < 32; ++i) too_long.push_back(tok::NEG);  // 65 tokens
  CHECK_THROWS_AS(parse(Task::TSP, too_long), ParseError);
}

TEST_CASE("round trip serialize(parse(t)) == t on random programs") {
  Rng rng(404);
  for (int i = 0; i < 500; ++i) {
    Program p = sample_seed_program(Task::CVRP, rng, 1 + static_cast<int>(rng.index(5)));
    Program back = parse_spellings(p.task, serialize(p));
    CHECK(back == p);
  }
}

TEST_CASE("interpret nearest-neighbor example") {
  Program p = P(Task::TSP, {"NEG", "F0"});
  FeatureFrame f = frame_with_f0(Task::TSP, {3, 1, 2});
  auto scores = interpret(p, f);
  CHECK(scores == std::vector<double>{-3, -1, -2});
  CHECK(select_action(scores, f.feasible) == 1);
}

TEST_CASE("interpret protected division example") {
  Program p = P(Task::TSP, {"DIV", "C1.0", "F0"});
  FeatureFrame f = frame_with_f0(Task::TSP, {0.0});
  auto scores = interpret(p, f);
  CHECK(scores[0] == doctest::Approx(1e6));
}

TEST_CASE("constant program ties break to the lowest feasible index") {
  Program p = P(Task::OBP, {"C0.5"});
  FeatureFrame f = make_frame(Task::OBP, 4);
  auto scores = interpret(p, f);
  CHECK(select_action(scores, f.feasible) == 0);
  f.feasible = {0, 0, 1, 1};
  CHECK(select_action(scores, f.feasible) == 2);
  f.feasible = {0, 0, 0, 0};
  CHECK(select_action(scores, f.feasible) == -1);
}

TEST_CASE("non-finite feasible score invalidates the selection") {
  Program p = P(Task::TSP, {"EXP", "MUL", "F0", "F0"});  // exp(x^2) overflows
  FeatureFrame f = frame_with_f0(Task::TSP, {1.0, 40.0});
  f.at(1, 0) = 40.0;
  auto scores = interpret(p, f);
  CHECK(!std::isfinite(scores[1]));
  CHECK(select_action(scores, f.feasible) == -1);
}

TEST_CASE("interpret enforces task agreement and purity") {
  Program p = P(Task::TSP, {"NEG", "F0"});
  FeatureFrame wrong = make_frame(Task::CVRP, 3);
  CHECK_THROWS_AS(interpret(p, wrong), std::invalid_argument);

  const auto& probes = probe_frames(Task::TSP);
  auto a = interpret(p, probes[0]);
  auto b = interpret(p, probes[0]);
  CHECK(a == b);
}

TEST_CASE("protected log and sqrt keep scores finite") {
  Program plog = P(Task::TSP, {"LOG", "F0"});
  Program psqrt = P(Task::TSP, {"SQRT", "NEG", "F0"});
  FeatureFrame f = frame_with_f0(Task::TSP, {0.0, 0.5});
  auto ls = interpret(plog, f);
  CHECK(ls[0] == doctest::Approx(std::log(1e-6)));
  CHECK(ls[1] == doctest::Approx(std::log(0.5)));
  auto ss = interpret(psqrt, f);
  CHECK(ss[1] == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("seed sampling: depth one, determinism, low fallback rate") {
  Rng rng(1);
  Program tiny = sample_seed_program(Task::TSP, rng, 1);
  CHECK(tiny.tokens.size() == 1);

  Rng a(42), b(42);
  CHECK(sample_seed_program(Task::OBP, a, 4) == sample_seed_program(Task::OBP, b, 4));

  const Program fallback = P(Task::KNAPSACK, {"NEG", "F0"});
  int fallbacks = 0;
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    Program p = sample_seed_program(Task::KNAPSACK, r, 4);
    CHECK(valid_on_probes(p));
    if (p == fallback) ++fallbacks;
  }
  CHECK(fallbacks < 50);  // >= 95% of draws never hit the fallback path
}

TEST_CASE("syntactic augmentation spec examples") {
  Program p = P(Task::TSP, {"ADD", "F0", "F1"});
  bool saw_swap = false;
  for (std::uint64_t s = 0; s < 60; ++s) {
    Rng rng(s);
    Program q = augment(p, AugmentStrategy::SYNTACTIC, rng);
    if (q.tokens == P(Task::TSP, {"ADD", "F1", "F0"}).tokens) saw_swap = true;
    // Whatever rewrite fired, values must be untouched on every probe.
    for (const auto& fr : probe_frames(Task::TSP)) {
      CHECK(interpret(p, fr) == interpret(q, fr));
    }
  }
  CHECK(saw_swap);
}

TEST_CASE("parametric augmentation moves a constant to an adjacent grid value") {
  Program p = P(Task::TSP, {"MUL", "C0.5", "F0"});
  std::set<std::vector<int>> seen;
  for (std::uint64_t s = 0; s < 40; ++s) {
    Rng rng(s);
    seen.insert(augment(p, AugmentStrategy::PARAMETRIC, rng).tokens);
  }
  CHECK(seen.count(P(Task::TSP, {"MUL", "C0.2", "F0"}).tokens) == 1);
  CHECK(seen.count(P(Task::TSP, {"MUL", "C1.0", "F0"}).tokens) == 1);
  CHECK(seen.size() == 2);

  // Grid edges move inward.
  Program edge = P(Task::TSP, {"MUL", "C-2.0", "F0"});
  Rng rng(3);
  CHECK(augment(edge, AugmentStrategy::PARAMETRIC, rng).tokens ==
        P(Task::TSP, {"MUL", "C-1.0", "F0"}).tokens);
}

TEST_CASE("behavioral augmentation flips aggregation or features") {
  Program p = P(Task::TSP, {"MIN", "F0", "F1"});
  bool saw_max = false;
  for (std::uint64_t s = 0; s < 60; ++s) {
    Rng rng(s);
    Program q = augment(p, AugmentStrategy::BEHAVIORAL, rng);
    CHECK(q.tokens.size() == 3);
    if (q.tokens == P(Task::TSP, {"MAX", "F0", "F1"}).tokens) saw_max = true;
  }
  CHECK(saw_max);

  Program s2 = P(Task::TSP, {"ADD", "F0", "F1"});
  bool saw_sub = false;
  for (std::uint64_t s = 0; s < 60; ++s) {
    Rng rng(s);
    if (augment(s2, AugmentStrategy::BEHAVIORAL, rng).tokens ==
        P(Task::TSP, {"SUB", "F0", "F1"}).tokens) {
      saw_sub = true;
    }
  }
  CHECK(saw_sub);
}

TEST_CASE("no rewrite site returns the program unchanged") {
  Program p = P(Task::TSP, {"F0"});
  Rng rng(5);
  CHECK(augment(p, AugmentStrategy::PARAMETRIC, rng) == p);  // no constants
  Program q = P(Task::KNAPSACK, {"SQRT", "C0.2"});
  CHECK(augment(q, AugmentStrategy::BEHAVIORAL, rng) == q);  // no features/aggregators
}

TEST_CASE("all augmented outputs parse and respect the token budget") {
  Rng rng(999);
  const Task tasks[] = {Task::TSP, Task::CVRP, Task::KNAPSACK, Task::OBP};
  int checked = 0;
  for (int i = 0; i < 3400; ++i) {
    const Task task = tasks[i % 4];
    Program p = sample_seed_program(task, rng, 1 + static_cast<int>(rng.index(6)));
    for (auto strat : {AugmentStrategy::SYNTACTIC, AugmentStrategy::PARAMETRIC,
                       AugmentStrategy::BEHAVIORAL}) {
      Program q = augment(p, strat, rng);  // parse() runs inside augment
      CHECK(q.tokens.size() <= kMaxProgramTokens);
      CHECK_NOTHROW(parse(q.task, q.tokens));
      if (strat == AugmentStrategy::SYNTACTIC) {
        for (const auto& fr : probe_frames(task)) {
          const auto a = interpret(p, fr);
          const auto b = interpret(q, fr);
          for (std::size_t c = 0; c < a.size(); ++c) CHECK(a[c] == b[c]);
        }
      }
      ++checked;
    }
  }
  CHECK(checked == 3 * 3400);  // >= 10^4 augmented programs exercised
}

TEST_CASE("dedupe collapses structural and behavioral duplicates") {
  std::vector<Program> corpus = {
      P(Task::TSP, {"NEG", "F0"}),
      P(Task::TSP, {"SUB", "C0.0", "F0"}),  // behaviorally identical to NEG F0
      P(Task::TSP, {"NEG", "F0"}),          // exact duplicate
      P(Task::TSP, {"NEG", "F1"}),          // distinct behavior
  };
  auto kept = dedupe(corpus);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0] == corpus[0]);
  CHECK(kept[1] == corpus[3]);
}

TEST_CASE("corpus json lines round trip with vocab sidecar") {
  std::vector<CorpusEntry> entries;
  entries.push_back({P(Task::TSP, {"NEG", "F0"}), "seed", std::nullopt});
  entries.push_back({P(Task::KNAPSACK, {"DIV", "F1", "F0"}), "behavioral", 17.25});

  const std::string path = "corpus_roundtrip_test.jsonl";
  write_corpus(path, entries);
  auto back = read_corpus(path);
  std::remove(path.c_str());

  REQUIRE(back.size() == 2);
  CHECK(back[0].program == entries[0].program);
  CHECK(back[0].source == "seed");
  CHECK(!back[0].score.has_value());
  CHECK(back[1].program == entries[1].program);
  CHECK(back[1].score.value() == 17.25);

  const std::string vpath = "vocab_test.json";
  write_vocab_json(vpath);
  std::ifstream is(vpath);
  std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();
  std::remove(vpath.c_str());
  CHECK(all.find("\"C-2.0\"") != std::string::npos);
  CHECK(all.find("\"SQRT\"") != std::string::npos);
}

TEST_CASE("program ids are stable content hashes") {
  Program a = P(Task::TSP, {"NEG", "F0"});
  Program b = P(Task::CVRP, {"NEG", "F0"});
  CHECK(program_id(a).size() == 16);
  CHECK(program_id(a) == program_id(P(Task::TSP, {"NEG", "F0"})));
  CHECK(program_id(a) != program_id(b));  // task participates in the hash
}

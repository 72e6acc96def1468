#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>

#include "helpers/fd_check.hpp"
#include "lhs/kernels/kernels.hpp"
#include "lhs/math/checkpoint.hpp"
#include "lhs/math/graph.hpp"
#include "lhs/math/rng.hpp"

using namespace lhs::math;

TEST_CASE("square function value and gradient") {
  Graph g;
  auto x = g.leaf(Tensor::scalar(3.0), true);
  auto y = g.mul(x, x);
  g.backward(y);
  CHECK(g.val(y).data[0] == doctest::Approx(9.0));
  CHECK(g.grad(x).data[0] == doctest::Approx(6.0));
}

TEST_CASE("tanh gradient at zero") {
  Graph g;
  auto x = g.leaf(Tensor::scalar(0.0), true);
  auto y = g.tanh_(x);
  g.backward(y);
  CHECK(g.val(y).data[0] == doctest::Approx(0.0));
  CHECK(g.grad(x).data[0] == doctest::Approx(1.0));
}

TEST_CASE("protected division at zero denominator") {
  Graph g;
  auto a = g.leaf(Tensor::from({3}, {1.0, -3.0, 2.0}));
  auto b = g.leaf(Tensor::from({3}, {0.0, 1e-9, -1e-9}));
  auto q = g.pdiv(a, b);
  CHECK(g.val(q).data[0] == doctest::Approx(1e6));
  CHECK(g.val(q).data[1] == doctest::Approx(-3e6));
  CHECK(g.val(q).data[2] == doctest::Approx(-2e6));
}

TEST_CASE("broadcast add matches replication and reduces gradients") {
  Graph g;
  auto a = g.leaf(Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}), true);
  auto b = g.leaf(Tensor::from({1, 3}, {10, 20, 30}), true);
  auto s = g.sum(g.add(a, b));
  g.backward(s);
  CHECK(g.val(s).data[0] == doctest::Approx(1 + 2 + 3 + 4 + 5 + 6 + 2 * 60));
  for (double v : g.grad(a).data) CHECK(v == doctest::Approx(1.0));
  for (double v : g.grad(b).data) CHECK(v == doctest::Approx(2.0));
}

namespace {

ParamSet make_mlp(Rng& rng) {
  ParamSet ps;
  ps["w1"] = xavier_tensor(5, 8, rng);
  ps["b1"] = Tensor({1, 8}, 0.1);
  ps["w2"] = xavier_tensor(8, 8, rng);
  ps["b2"] = Tensor({1, 8}, -0.1);
  ps["w3"] = xavier_tensor(8, 1, rng);
  ps["b3"] = Tensor({1, 1}, 0.0);
  return ps;
}

fd::AdResult mlp_loss(const ParamSet& ps, const Tensor& x, const Tensor& target) {
  Graph g;
  std::map<std::string, Graph::Id> pid;
  for (const auto& [name, t] : ps.params) pid[name] = g.leaf(t, true);
  auto h1 = g.lrelu(g.add(g.matmul(g.leaf(x), pid["w1"]), pid["b1"]), 0.2);
  auto h2 = g.tanh_(g.add(g.matmul(h1, pid["w2"]), pid["b2"]));
  auto out = g.sigmoid(g.add(g.matmul(h2, pid["w3"]), pid["b3"]));
  auto diff = g.sub(out, g.leaf(target));
  auto loss = g.mean(g.mul(diff, diff));
  g.backward(loss);
  fd::AdResult r;
  r.loss = g.val(loss).data[0];
  for (const auto& [name, id] : pid) r.grads[name] = g.grad(id);
  return r;
}

}  // namespace

TEST_CASE("three layer perceptron gradients match central differences") {
  for (std::uint64_t seed : {11ull, 22ull, 33ull}) {
    Rng rng(seed);
    ParamSet ps = make_mlp(rng);
    Tensor x = randn_tensor({5, 5}, rng);
    Tensor t = randn_tensor({5, 1}, rng, 0.5);
    auto rep = fd::max_rel_grad_err(ps, [&](const ParamSet& p) { return mlp_loss(p, x, t); });
    CAPTURE(seed);
    CAPTURE(rep.worst_param);
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("softmax cross entropy composed gradient matches finite differences") {
  Rng rng(5);
  ParamSet ps;
  ps["logits"] = randn_tensor({4, 7}, rng, 2.0);
  const std::vector<int> targets = {3, 0, 6, 2};
  auto build = [&](const ParamSet& p) {
    Graph g;
    auto l = g.leaf(p.at("logits"), true);
    auto loss = g.neg(g.mean(g.log_(g.gather_cols(g.softmax(l), targets))));
    g.backward(loss);
    fd::AdResult r;
    r.loss = g.val(loss).data[0];
    r.grads["logits"] = g.grad(l);
    return r;
  };
  auto rep = fd::max_rel_grad_err(ps, build);
  CHECK(rep.max_rel_err < 1e-4);

  // Composed gradient equals (softmax - onehot)/rows, the bounded form.
  Graph g;
  auto l = g.leaf(ps.at("logits"), true);
  auto sm = g.softmax(l);
  auto loss = g.neg(g.mean(g.log_(g.gather_cols(sm, targets))));
  g.backward(loss);
  const Tensor& y = g.val(sm);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 7; ++j) {
      const double expect =
          (y.at(i, j) - (static_cast<int>(j) == targets[i] ? 1.0 : 0.0)) / 4.0;
      CHECK(g.grad(l).at(i, j) == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("structural ops gradients match finite differences") {
  Rng rng(17);
  ParamSet ps;
  ps["table"] = randn_tensor({6, 4}, rng);
  ps["a"] = randn_tensor({3, 4}, rng);
  ps["b"] = randn_tensor({2, 4}, rng);
  const std::vector<int> ids = {1, 5, 1, 0};
  auto build = [&](const ParamSet& p) {
    Graph g;
    auto table = g.leaf(p.at("table"), true);
    auto a = g.leaf(p.at("a"), true);
    auto b = g.leaf(p.at("b"), true);
    auto emb = g.embedding(table, ids);                 // [4,4], repeated id 1
    auto cat = g.concat({a, b, emb}, 0);                // [9,4]
    auto win = g.slice(cat, 1, 8, 1, 4);                // [7,3]
    auto pooled = g.mean_axis(win, 0);                  // [1,3]
    auto spread = g.mean_axis(win, 1);                  // [7,1]
    auto mixed = g.mul(spread, pooled);                 // broadcast to [7,3]
    auto loss = g.mean(g.mul(mixed, mixed));
    g.backward(loss);
    fd::AdResult r;
    r.loss = g.val(loss).data[0];
    r.grads["table"] = g.grad(table);
    r.grads["a"] = g.grad(a);
    r.grads["b"] = g.grad(b);
    return r;
  };
  auto rep = fd::max_rel_grad_err(ps, build);
  CAPTURE(rep.worst_param);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("dropout is identity at inference and masks consistently in training") {
  Rng rng(3);
  Graph g;
  auto a = g.leaf(Tensor::from({1, 8}, {1, 1, 1, 1, 1, 1, 1, 1}), true);
  auto infer = g.dropout(a, 0.5, rng, false);
  CHECK(infer == a);

  auto train = g.dropout(a, 0.5, rng, true);
  auto loss = g.sum(train);
  g.backward(loss);
  const Tensor& out = g.val(train);
  for (std::size_t i = 0; i < 8; ++i) {
    const bool kept = out.data[i] != 0.0;
    CHECK(out.data[i] == doctest::Approx(kept ? 2.0 : 0.0));
    CHECK(g.grad(a).data[i] == doctest::Approx(kept ? 2.0 : 0.0));
  }
}

TEST_CASE("non-finite values raise numerics errors naming the op") {
  Graph g;
  auto big = g.leaf(Tensor::scalar(1e308), true);
  CHECK_THROWS_WITH_AS(g.mul(big, big), doctest::Contains("mul"), NumericsError);
  auto huge = g.leaf(Tensor::scalar(1000.0));
  CHECK_THROWS_WITH_AS(g.exp_(huge), doctest::Contains("exp"), NumericsError);
  // log is floored, negative inputs stay finite.
  auto ok = g.log_(g.leaf(Tensor::scalar(-5.0)));
  CHECK(g.val(ok).data[0] == doctest::Approx(std::log(1e-12)));
}

TEST_CASE("adamw hand-checked first steps") {
  AdamWConfig cfg;
  cfg.lr = 0.1;

  ParamSet ps;
  ps["p"] = Tensor::scalar(1.0);
  adamw_step(ps, {{"p", Tensor::scalar(1.0)}}, cfg);
  CHECK(ps.at("p").data[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(ps.step == 1);

  ParamSet frozen;
  frozen["p"] = Tensor::scalar(1.0);
  adamw_step(frozen, {{"p", Tensor::scalar(0.0)}}, cfg);
  CHECK(frozen.at("p").data[0] == doctest::Approx(1.0));

  ParamSet decayed;
  decayed["p"] = Tensor::scalar(1.0);
  AdamWConfig wd = cfg;
  wd.weight_decay = 0.01;
  adamw_step(decayed, {{"p", Tensor::scalar(0.0)}}, wd);
  CHECK(decayed.at("p").data[0] == doctest::Approx(0.999));

  CHECK_THROWS_AS(adamw_step(ps, {}, cfg), std::invalid_argument);
}

TEST_CASE("adamw is deterministic across runs") {
  auto run = [] {
    Rng rng(77);
    ParamSet ps = make_mlp(rng);
    Tensor x = randn_tensor({5, 5}, rng);
    Tensor t = randn_tensor({5, 1}, rng, 0.5);
    AdamWConfig cfg;
    for (int i = 0; i < 25; ++i) {
      auto r = mlp_loss(ps, x, t);
      adamw_step(ps, r.grads, cfg);
    }
    return ps;
  };
  ParamSet a = run();
  ParamSet b = run();
  for (const auto& [name, t] : a.params) {
    CHECK(std::memcmp(t.data.data(), b.at(name).data.data(),
                      t.data.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("rng determinism and stream independence") {
  Rng a(123), b(123), c(124);
  bool same = true, diff = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    same = same && x == b.uniform();
    diff = diff || x != c.uniform();
  }
  CHECK(same);
  CHECK(diff);

  Rng parent(9);
  parent.uniform();  // advancing the parent must not move its children
  Rng c1 = parent.child(1);
  Rng c1_again = Rng(9).child(1);
  CHECK(c1.uniform() == c1_again.uniform());
  CHECK(Rng(9).child(1).uniform() != Rng(9).child(2).uniform());
}

TEST_CASE("uniform draws average to one half") {
  Rng rng(2024);
  double acc = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) acc += rng.uniform();
  const double mean = acc / n;
  CHECK(mean > 0.495);
  CHECK(mean < 0.505);
}

TEST_CASE("normal draws have unit variance and integer ranges are exact") {
  Rng rng(31);
  double s1 = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
  }
  CHECK(s1 / n == doctest::Approx(0.0).epsilon(0.02));
  CHECK(s2 / n - (s1 / n) * (s1 / n) == doctest::Approx(1.0).epsilon(0.02));

  bool lo_seen = false, hi_seen = false;
  for (int i = 0; i < 2000; ++i) {
    const auto v = rng.uniform_int(-3, 4);
    CHECK(v >= -3);
    CHECK(v <= 4);
    lo_seen = lo_seen || v == -3;
    hi_seen = hi_seen || v == 4;
  }
  CHECK(lo_seen);
  CHECK(hi_seen);
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(8);
  ParamSet ps = make_mlp(rng);
  Tensor x = randn_tensor({5, 5}, rng);
  Tensor t = randn_tensor({5, 1}, rng, 0.5);
  AdamWConfig cfg;
  for (int i = 0; i < 3; ++i) {
    auto r = mlp_loss(ps, x, t);
    adamw_step(ps, r.grads, cfg);
  }

  const std::string path = "ckpt_roundtrip_test.bin";
  save_checkpoint(path, ps, {{"stage", "unit-test"}, {"config_hash", "abc123"}});
  std::map<std::string, std::string> meta;
  ParamSet back = load_checkpoint(path, &meta);
  std::remove(path.c_str());

  CHECK(back.step == ps.step);
  CHECK(meta.at("stage") == "unit-test");
  CHECK(meta.at("config_hash") == "abc123");
  REQUIRE(back.params.size() == ps.params.size());
  for (const auto& [name, p] : ps.params) {
    CHECK(back.at(name).shape == p.shape);
    CHECK(std::memcmp(back.at(name).data.data(), p.data.data(),
                      p.data.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(back.m.at(name).data.data(), ps.m.at(name).data.data(),
                      p.data.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("gradients are bit-identical across kernel backends") {
#if defined(__x86_64__) || defined(_M_X64)
  using namespace lhs::kernels;
  if (!avx2_supported()) return;
  auto run = [] {
    Rng rng(55);
    ParamSet ps = make_mlp(rng);
    Tensor x = randn_tensor({5, 5}, rng);
    Tensor t = randn_tensor({5, 1}, rng, 0.5);
    return mlp_loss(ps, x, t);
  };
  select("scalar");
  auto rs = run();
  select("avx2");
  auto ra = run();
  select("auto");
  CHECK(rs.loss == ra.loss);
  for (const auto& [name, g] : rs.grads) {
    CHECK(std::memcmp(g.data.data(), ra.grads.at(name).data.data(),
                      g.data.size() * sizeof(double)) == 0);
  }
#endif
}

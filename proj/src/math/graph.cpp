#include "lhs/math/graph.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "lhs/kernels/kernels.hpp"

namespace lhs::math {

namespace {

constexpr double kLogFloor = 1e-12;

std::vector<std::size_t> pad_shape(const std::vector<std::size_t>& s, std::size_t rank) {
  std::vector<std::size_t> out(rank, 1);
  std::copy(s.begin(), s.end(), out.begin() + (rank - s.size()));
  return out;
}

// Broadcast plan for one elementwise binary: output shape plus per-dimension
// strides into each (padded) input, 0 on broadcast dimensions.
struct BcPlan {
  std::vector<std::size_t> out_shape;
  std::vector<std::size_t> stride_a, stride_b;
  std::size_t numel = 1;
  bool same_shape = false;
};

BcPlan make_plan(const Tensor& a, const Tensor& b, const char* op) {
  BcPlan p;
  if (a.shape == b.shape) {
    p.out_shape = a.shape;
    p.numel = a.numel();
    p.same_shape = true;
    return p;
  }
  const std::size_t rank = std::max(a.rank(), b.rank());
  const auto pa = pad_shape(a.shape, rank);
  const auto pb = pad_shape(b.shape, rank);
  p.out_shape.resize(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    if (pa[d] != pb[d] && pa[d] != 1 && pb[d] != 1) {
      throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a.shape) + " and " +
                                  shape_str(b.shape) + " do not broadcast");
    }
    p.out_shape[d] = std::max(pa[d], pb[d]);
    p.numel *= p.out_shape[d];
  }
  auto strides = [rank](const std::vector<std::size_t>& padded,
                        const std::vector<std::size_t>& out) {
    std::vector<std::size_t> st(rank, 0);
    std::size_t acc = 1;
    for (std::size_t d = rank; d-- > 0;) {
      st[d] = (padded[d] == 1 && out[d] != 1) ? 0 : acc;
      acc *= padded[d];
    }
    return st;
  };
  p.stride_a = strides(pa, p.out_shape);
  p.stride_b = strides(pb, p.out_shape);
  return p;
}

template <class F>
void bc_iterate(const BcPlan& p, F&& f) {
  std::vector<std::size_t> coord(p.out_shape.size(), 0);
  for (std::size_t li = 0; li < p.numel; ++li) {
    std::size_t oa = 0, ob = 0;
    for (std::size_t d = 0; d < coord.size(); ++d) {
      oa += coord[d] * p.stride_a[d];
      ob += coord[d] * p.stride_b[d];
    }
    f(li, oa, ob);
    for (std::size_t d = coord.size(); d-- > 0;) {
      if (++coord[d] < p.out_shape[d]) break;
      coord[d] = 0;
    }
  }
}

double protected_denom(double b) {
  const double m =
      std::fabs(b) < kernels::kProtectedDivEps ? kernels::kProtectedDivEps : std::fabs(b);
  return b < 0.0 ? -m : m;
}

Tensor mm(const Tensor& a, const Tensor& b, bool ta, bool tb) {
  Tensor at, bt;
  const Tensor* pa = &a;
  const Tensor* pb = &b;
  if (ta) {
    at = transposed(a);
    pa = &at;
  }
  if (tb) {
    bt = transposed(b);
    pb = &bt;
  }
  const std::size_t m = pa->rows(), k = pa->cols(), n = pb->cols();
  if (pb->rows() != k) {
    throw std::invalid_argument("matmul: inner extents disagree, " + shape_str(pa->shape) +
                                " vs " + shape_str(pb->shape));
  }
  Tensor c({m, n});
  kernels::active().matmul(pa->data.data(), pb->data.data(), c.data.data(), m, k, n);
  return c;
}

}  // namespace

Graph::Id Graph::push(Tensor val, bool needs_grad, const char* op) {
  if (!all_finite(val)) {
    throw NumericsError(std::string("numerics: non-finite value produced by ") + op);
  }
  Node n;
  n.grad = needs_grad ? Tensor(val.shape, 0.0) : Tensor();
  n.val = std::move(val);
  n.needs_grad = needs_grad;
  n.op = op;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

void Graph::accumulate(Id id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (!all_finite(g)) {
    throw NumericsError(std::string("numerics: non-finite gradient flowing into ") + n.op);
  }
  kernels::active().axpy(1.0, g.data.data(), n.grad.data.data(), g.data.size());
}

const Tensor& Graph::grad(Id id) const {
  if (!nodes_[id].needs_grad) throw std::logic_error("graph: grad of a non-differentiable node");
  return nodes_[id].grad;
}

Graph::Id Graph::leaf(Tensor t, bool needs_grad) { return push(std::move(t), needs_grad, "leaf"); }

Graph::Id Graph::add(Id a, Id b) { return binary(a, b, "add"); }
Graph::Id Graph::sub(Id a, Id b) { return binary(a, b, "sub"); }
Graph::Id Graph::mul(Id a, Id b) { return binary(a, b, "mul"); }
Graph::Id Graph::pdiv(Id a, Id b) { return binary(a, b, "pdiv"); }

Graph::Id Graph::binary(Id a, Id b, const char* op) {
  const Tensor& av = nodes_[a].val;
  const Tensor& bv = nodes_[b].val;
  BcPlan plan = make_plan(av, bv, op);
  Tensor out;
  const auto& kt = kernels::active();
  const char kind = op[0] == 'a' ? '+' : op[0] == 's' ? '-' : op[0] == 'm' ? '*' : '/';
  if (plan.same_shape) {
    out = Tensor(plan.out_shape);
    const std::size_t n = plan.numel;
    switch (kind) {
      case '+': kt.add(av.data.data(), bv.data.data(), out.data.data(), n); break;
      case '-': kt.sub(av.data.data(), bv.data.data(), out.data.data(), n); break;
      case '*': kt.mul(av.data.data(), bv.data.data(), out.data.data(), n); break;
      default: kt.pdiv(av.data.data(), bv.data.data(), out.data.data(), n); break;
    }
  } else {
    out = Tensor(plan.out_shape);
    bc_iterate(plan, [&](std::size_t li, std::size_t oa, std::size_t ob) {
      const double x = av.data[oa], y = bv.data[ob];
      switch (kind) {
        case '+': out.data[li] = x + y; break;
        case '-': out.data[li] = x - y; break;
        case '*': out.data[li] = x * y; break;
        default: out.data[li] = x / protected_denom(y); break;
      }
    });
  }
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out_id = push(std::move(out), ng, op);
  if (!ng) return out_id;

  nodes_[out_id].back = [this, a, b, out_id, plan, kind]() {
    const Tensor& g = nodes_[out_id].grad;
    const Tensor& av = nodes_[a].val;
    const Tensor& bv = nodes_[b].val;
    const bool na = nodes_[a].needs_grad;
    const bool nb = nodes_[b].needs_grad;
    Tensor ga = na ? Tensor(av.shape, 0.0) : Tensor();
    Tensor gb = nb ? Tensor(bv.shape, 0.0) : Tensor();
    if (plan.same_shape) {
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        const double gv = g.data[i];
        switch (kind) {
          case '+':
            if (na) ga.data[i] = gv;
            if (nb) gb.data[i] = gv;
            break;
          case '-':
            if (na) ga.data[i] = gv;
            if (nb) gb.data[i] = -gv;
            break;
          case '*':
            if (na) ga.data[i] = gv * bv.data[i];
            if (nb) gb.data[i] = gv * av.data[i];
            break;
          default: {
            const double d = protected_denom(bv.data[i]);
            if (na) ga.data[i] = gv / d;
            if (nb && std::fabs(bv.data[i]) > kernels::kProtectedDivEps) {
              gb.data[i] = -gv * av.data[i] / (bv.data[i] * bv.data[i]);
            }
            break;
          }
        }
      }
    } else {
      bc_iterate(plan, [&](std::size_t li, std::size_t oa, std::size_t ob) {
        const double gv = g.data[li];
        switch (kind) {
          case '+':
            if (na) ga.data[oa] += gv;
            if (nb) gb.data[ob] += gv;
            break;
          case '-':
            if (na) ga.data[oa] += gv;
            if (nb) gb.data[ob] -= gv;
            break;
          case '*':
            if (na) ga.data[oa] += gv * bv.data[ob];
            if (nb) gb.data[ob] += gv * av.data[oa];
            break;
          default: {
            const double d = protected_denom(bv.data[ob]);
            if (na) ga.data[oa] += gv / d;
            if (nb && std::fabs(bv.data[ob]) > kernels::kProtectedDivEps) {
              gb.data[ob] += -gv * av.data[oa] / (bv.data[ob] * bv.data[ob]);
            }
            break;
          }
        }
      });
    }
    if (na) accumulate(a, ga);
    if (nb) accumulate(b, gb);
  };
  return out_id;
}

Graph::Id Graph::matmul(Id a, Id b, bool trans_a, bool trans_b) {
  Tensor out = mm(nodes_[a].val, nodes_[b].val, trans_a, trans_b);
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out_id = push(std::move(out), ng, "matmul");
  if (!ng) return out_id;
  nodes_[out_id].back = [this, a, b, out_id, trans_a, trans_b]() {
    const Tensor& g = nodes_[out_id].grad;
    const Tensor& av = nodes_[a].val;
    const Tensor& bv = nodes_[b].val;
    if (nodes_[a].needs_grad) {
      Tensor da = mm(g, bv, false, !trans_b);
      accumulate(a, trans_a ? transposed(da) : da);
    }
    if (nodes_[b].needs_grad) {
      Tensor db = mm(av, g, !trans_a, false);
      accumulate(b, trans_b ? transposed(db) : db);
    }
  };
  return out_id;
}

Graph::Id Graph::relu(Id a) {
  const Tensor& av = nodes_[a].val;
  Tensor out(av.shape);
  kernels::active().relu(av.data.data(), out.data.data(), av.numel());
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "relu");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id]() {
    const Tensor& g = nodes_[out_id].grad;
    const Tensor& av = nodes_[a].val;
    Tensor ga(av.shape, 0.0);
    for (std::size_t i = 0; i < ga.data.size(); ++i) {
      ga.data[i] = av.data[i] > 0.0 ? g.data[i] : 0.0;
    }
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::lrelu(Id a, double slope) {
  const Tensor& av = nodes_[a].val;
  Tensor out(av.shape);
  kernels::active().lrelu(av.data.data(), slope, out.data.data(), av.numel());
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "lrelu");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id, slope]() {
    const Tensor& g = nodes_[out_id].grad;
    const Tensor& av = nodes_[a].val;
    Tensor ga(av.shape, 0.0);
    for (std::size_t i = 0; i < ga.data.size(); ++i) {
      ga.data[i] = g.data[i] * (av.data[i] > 0.0 ? 1.0 : slope);
    }
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::tanh_(Id a) {
  const Tensor& av = nodes_[a].val;
  Tensor out(av.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::tanh(av.data[i]);
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "tanh");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id]() {
    const Tensor& g = nodes_[out_id].grad;
    const Tensor& y = nodes_[out_id].val;
    Tensor ga(y.shape, 0.0);
    for (std::size_t i = 0; i < ga.data.size(); ++i) {
      ga.data[i] = g.data[i] * (1.0 - y.data[i] * y.data[i]);
    }
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::sigmoid(Id a) {
  const Tensor& av = nodes_[a].val;
  Tensor out(av.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double x = av.data[i];
    // Branch keeps exp's argument non-positive, no overflow either side.
    out.data[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "sigmoid");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id]() {
    const Tensor& g = nodes_[out_id].grad;
    const Tensor& y = nodes_[out_id].val;
    Tensor ga(y.shape, 0.0);
    for (std::size_t i = 0; i < ga.data.size(); ++i) {
      ga.data[i] = g.data[i] * y.data[i] * (1.0 - y.data[i]);
    }
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::exp_(Id a) {
  const Tensor& av = nodes_[a].val;
  Tensor out(av.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::exp(av.data[i]);
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "exp");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id]() {
    const Tensor& g = nodes_[out_id].grad;
    const Tensor& y = nodes_[out_id].val;
    Tensor ga(y.shape, 0.0);
    for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] = g.data[i] * y.data[i];
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::log_(Id a) {
  const Tensor& av = nodes_[a].val;
  Tensor out(av.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = std::log(av.data[i] > kLogFloor ? av.data[i] : kLogFloor);
  }
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "log");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id]() {
    const Tensor& g = nodes_[out_id].grad;
    const Tensor& av = nodes_[a].val;
    Tensor ga(av.shape, 0.0);
    for (std::size_t i = 0; i < ga.data.size(); ++i) {
      ga.data[i] = av.data[i] > kLogFloor ? g.data[i] / av.data[i] : 0.0;
    }
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::scale(Id a, double c) {
  const Tensor& av = nodes_[a].val;
  Tensor out(av.shape);
  kernels::active().scale(av.data.data(), c, out.data.data(), av.numel());
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "scale");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id, c]() {
    const Tensor& g = nodes_[out_id].grad;
    Tensor ga(g.shape);
    kernels::active().scale(g.data.data(), c, ga.data.data(), g.numel());
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::sum(Id a) {
  const Tensor& av = nodes_[a].val;
  double acc = 0.0;
  for (double v : av.data) acc += v;
  Id out_id = push(Tensor::scalar(acc), nodes_[a].needs_grad, "sum");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id]() {
    const double g0 = nodes_[out_id].grad.data[0];
    Tensor ga(nodes_[a].val.shape, g0);
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::mean(Id a) {
  const Tensor& av = nodes_[a].val;
  double acc = 0.0;
  for (double v : av.data) acc += v;
  const double n = static_cast<double>(av.numel());
  Id out_id = push(Tensor::scalar(acc / n), nodes_[a].needs_grad, "mean");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id, n]() {
    const double g0 = nodes_[out_id].grad.data[0];
    Tensor ga(nodes_[a].val.shape, g0 / n);
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::mean_axis(Id a, int axis) {
  const Tensor& av = nodes_[a].val;
  if (av.rank() != 2 || (axis != 0 && axis != 1)) {
    throw std::invalid_argument("mean_axis: rank-2 tensor and axis 0 or 1 required");
  }
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out(axis == 1 ? std::vector<std::size_t>{r, 1} : std::vector<std::size_t>{1, c});
  const double denom = axis == 1 ? static_cast<double>(c) : static_cast<double>(r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out.data[axis == 1 ? i : j] += av.data[i * c + j];
    }
  }
  for (double& v : out.data) v /= denom;
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "mean");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id, axis, r, c, denom]() {
    const Tensor& g = nodes_[out_id].grad;
    Tensor ga({r, c});
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        ga.data[i * c + j] = g.data[axis == 1 ? i : j] / denom;
      }
    }
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::softmax(Id a) {
  const Tensor& av = nodes_[a].val;
  if (av.rank() != 2) throw std::invalid_argument("softmax: rank-2 tensor required");
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = av.data.data() + i * c;
    double m = x[0];
    for (std::size_t j = 1; j < c; ++j) m = x[j] > m ? x[j] : m;
    double z = 0.0;
    double* y = out.data.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - m);
      z += y[j];
    }
    for (std::size_t j = 0; j < c; ++j) y[j] /= z;
  }
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "softmax");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id, r, c]() {
    const Tensor& g = nodes_[out_id].grad;
    const Tensor& y = nodes_[out_id].val;
    Tensor ga({r, c});
    for (std::size_t i = 0; i < r; ++i) {
      const double* gr = g.data.data() + i * c;
      const double* yr = y.data.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += gr[j] * yr[j];
      for (std::size_t j = 0; j < c; ++j) ga.data[i * c + j] = yr[j] * (gr[j] - dot);
    }
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::dropout(Id a, double rate, Rng& rng, bool training) {
  if (!training || rate <= 0.0) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be below 1");
  const Tensor& av = nodes_[a].val;
  auto mask = std::make_shared<std::vector<double>>(av.numel());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : *mask) m = rng.uniform() >= rate ? keep_scale : 0.0;
  Tensor out(av.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] * (*mask)[i];
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "dropout");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id, mask]() {
    const Tensor& g = nodes_[out_id].grad;
    Tensor ga(g.shape);
    for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] = g.data[i] * (*mask)[i];
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::concat(const std::vector<Id>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis 0 or 1 required");
  std::size_t rows = nodes_[parts[0]].val.rows();
  std::size_t cols = nodes_[parts[0]].val.cols();
  bool ng = false;
  std::size_t rsum = 0, csum = 0;
  for (Id p : parts) {
    const Tensor& t = nodes_[p].val;
    if (axis == 0 && t.cols() != cols) throw std::invalid_argument("concat: column mismatch");
    if (axis == 1 && t.rows() != rows) throw std::invalid_argument("concat: row mismatch");
    rsum += t.rows();
    csum += t.cols();
    ng = ng || nodes_[p].needs_grad;
  }
  Tensor out(axis == 0 ? std::vector<std::size_t>{rsum, cols}
                       : std::vector<std::size_t>{rows, csum});
  std::size_t off = 0;
  for (Id p : parts) {
    const Tensor& t = nodes_[p].val;
    if (axis == 0) {
      std::copy(t.data.begin(), t.data.end(), out.data.begin() + off * cols);
      off += t.rows();
    } else {
      for (std::size_t i = 0; i < rows; ++i) {
        std::copy(t.data.begin() + i * t.cols(), t.data.begin() + (i + 1) * t.cols(),
                  out.data.begin() + i * csum + off);
      }
      off += t.cols();
    }
  }
  Id out_id = push(std::move(out), ng, "concat");
  if (!ng) return out_id;
  std::vector<Id> parts_copy = parts;
  nodes_[out_id].back = [this, parts_copy, out_id, axis]() {
    const Tensor& g = nodes_[out_id].grad;
    std::size_t off = 0;
    for (Id p : parts_copy) {
      const Tensor& t = nodes_[p].val;
      if (!nodes_[p].needs_grad) {
        off += axis == 0 ? t.rows() : t.cols();
        continue;
      }
      Tensor gp(t.shape);
      if (axis == 0) {
        std::copy(g.data.begin() + off * t.cols(), g.data.begin() + (off + t.rows()) * t.cols(),
                  gp.data.begin());
        off += t.rows();
      } else {
        for (std::size_t i = 0; i < t.rows(); ++i) {
          std::copy(g.data.begin() + i * g.cols() + off,
                    g.data.begin() + i * g.cols() + off + t.cols(),
                    gp.data.begin() + i * t.cols());
        }
        off += t.cols();
      }
      accumulate(p, gp);
    }
  };
  return out_id;
}

Graph::Id Graph::slice(Id a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  const Tensor& av = nodes_[a].val;
  if (av.rank() != 2 || r1 > av.rows() || c1 > av.cols() || r0 >= r1 || c0 >= c1) {
    throw std::invalid_argument("slice: window out of range for " + shape_str(av.shape));
  }
  Tensor out({r1 - r0, c1 - c0});
  for (std::size_t i = r0; i < r1; ++i) {
    std::copy(av.data.begin() + i * av.cols() + c0, av.data.begin() + i * av.cols() + c1,
              out.data.begin() + (i - r0) * (c1 - c0));
  }
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "slice");
  if (!nodes_[a].needs_grad) return out_id;
  nodes_[out_id].back = [this, a, out_id, r0, r1, c0, c1]() {
    const Tensor& g = nodes_[out_id].grad;
    const Tensor& av = nodes_[a].val;
    Tensor ga(av.shape, 0.0);
    for (std::size_t i = r0; i < r1; ++i) {
      for (std::size_t j = c0; j < c1; ++j) {
        ga.data[i * av.cols() + j] = g.data[(i - r0) * (c1 - c0) + (j - c0)];
      }
    }
    accumulate(a, ga);
  };
  return out_id;
}

Graph::Id Graph::slice_rows(Id a, std::size_t r0, std::size_t r1) {
  return slice(a, r0, r1, 0, nodes_[a].val.cols());
}

Graph::Id Graph::slice_cols(Id a, std::size_t c0, std::size_t c1) {
  return slice(a, 0, nodes_[a].val.rows(), c0, c1);
}

Graph::Id Graph::embedding(Id table, const std::vector<int>& ids) {
  const Tensor& tv = nodes_[table].val;
  if (tv.rank() != 2) throw std::invalid_argument("embedding: table must be rank 2");
  const std::size_t v = tv.rows(), d = tv.cols();
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
      throw std::invalid_argument("embedding: id " + std::to_string(ids[i]) +
                                  " outside table of " + std::to_string(v) + " rows");
    }
    std::copy(tv.data.begin() + ids[i] * d, tv.data.begin() + (ids[i] + 1) * d,
              out.data.begin() + i * d);
  }
  Id out_id = push(std::move(out), nodes_[table].needs_grad, "embedding");
  if (!nodes_[table].needs_grad) return out_id;
  std::vector<int> ids_copy = ids;
  nodes_[out_id].back = [this, table, out_id, ids_copy, d]() {
    const Tensor& g = nodes_[out_id].grad;
    Tensor gt(nodes_[table].val.shape, 0.0);
    for (std::size_t i = 0; i < ids_copy.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        gt.data[ids_copy[i] * d + j] += g.data[i * d + j];
      }
    }
    accumulate(table, gt);
  };
  return out_id;
}

Graph::Id Graph::gather_cols(Id a, const std::vector<int>& cols) {
  const Tensor& av = nodes_[a].val;
  if (av.rank() != 2 || cols.size() != av.rows()) {
    throw std::invalid_argument("gather_cols: need one column index per row");
  }
  const std::size_t c = av.cols();
  Tensor out({cols.size(), 1});
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] < 0 || static_cast<std::size_t>(cols[i]) >= c) {
      throw std::invalid_argument("gather_cols: column " + std::to_string(cols[i]) +
                                  " out of range");
    }
    out.data[i] = av.data[i * c + cols[i]];
  }
  Id out_id = push(std::move(out), nodes_[a].needs_grad, "gather");
  if (!nodes_[a].needs_grad) return out_id;
  std::vector<int> cols_copy = cols;
  nodes_[out_id].back = [this, a, out_id, cols_copy, c]() {
    const Tensor& g = nodes_[out_id].grad;
    Tensor ga(nodes_[a].val.shape, 0.0);
    for (std::size_t i = 0; i < cols_copy.size(); ++i) {
      ga.data[i * c + cols_copy[i]] = g.data[i];
    }
    accumulate(a, ga);
  };
  return out_id;
}

void Graph::backward(Id root) {
  Node& r = nodes_[root];
  if (r.val.numel() != 1) {
    throw std::logic_error("backward: root must be scalar, got " + shape_str(r.val.shape));
  }
  if (!r.needs_grad) return;
  r.grad.data[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].back && nodes_[i].needs_grad) nodes_[i].back();
  }
}

}  // namespace lhs::math

#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lhs/math/rng.hpp"
#include "lhs/math/tensor.hpp"

namespace lhs::math {

// Thrown when a primitive produces a NaN or Inf; the message names the op.
struct NumericsError : std::runtime_error {
  explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

// Eager reverse-mode tape. Nodes are created in topological order, so
// backward() is a single reverse sweep. Graphs are built per training step
// and thrown away; nothing here is reused across steps.
class Graph {
 public:
  using Id = std::size_t;

  Id leaf(Tensor t, bool needs_grad = false);
  Id constant(double v) { return leaf(Tensor::scalar(v)); }

  // Elementwise binaries with numpy-style broadcasting (shapes right-aligned,
  // each extent equal or 1). Gradients sum over broadcast dimensions.
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  // Protected division a / (sign(b) * max(|b|, 1e-6)); sign(0) = +1.
  // Where |b| falls below the clamp the b-gradient is zero.
  Id pdiv(Id a, Id b);

  // C = op(A) * op(B) with optional transposes, rank-2 operands.
  Id matmul(Id a, Id b, bool trans_a = false, bool trans_b = false);

  Id relu(Id a);
  Id lrelu(Id a, double slope);
  Id tanh_(Id a);
  Id sigmoid(Id a);
  Id exp_(Id a);
  // log(max(x, 1e-12)); gradient blocked where the floor is active.
  Id log_(Id a);

  Id scale(Id a, double c);
  Id neg(Id a) { return scale(a, -1.0); }

  Id sum(Id a);   // -> [1]
  Id mean(Id a);  // -> [1]
  // Mean over one axis of a rank-2 tensor, keeping the axis as extent 1.
  Id mean_axis(Id a, int axis);

  // Rowwise softmax over the last axis of a rank-2 tensor. Subtracts the row
  // max before exponentiating.
  Id softmax(Id a);

  // Inverted dropout: kept entries scaled by 1/(1-rate). Identity when not
  // training (no node is created, the input id is returned).
  Id dropout(Id a, double rate, Rng& rng, bool training);

  // Concatenate rank-2 tensors along axis 0 (rows) or 1 (cols).
  Id concat(const std::vector<Id>& parts, int axis);

  // Copy of the half-open row/col window [r0,r1) x [c0,c1).
  Id slice(Id a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1);
  Id slice_rows(Id a, std::size_t r0, std::size_t r1);
  Id slice_cols(Id a, std::size_t c0, std::size_t c1);

  // Rows of a [V,d] table selected by token id; gradients scatter-add.
  Id embedding(Id table, const std::vector<int>& ids);

  // out[i,0] = a[i, cols[i]] for a rank-2 a.
  Id gather_cols(Id a, const std::vector<int>& cols);

  // Seeds the root gradient with 1 and sweeps the tape in reverse. The root
  // must be scalar-reduced (numel 1).
  void backward(Id root);

  const Tensor& val(Id id) const { return nodes_[id].val; }
  const Tensor& grad(Id id) const;
  bool needs_grad(Id id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    bool needs_grad = false;
    const char* op = "leaf";
    std::function<void()> back;
  };

  Id push(Tensor val, bool needs_grad, const char* op);
  void accumulate(Id id, const Tensor& g);
  Tensor& grad_buf(Id id) { return nodes_[id].grad; }

  Id binary(Id a, Id b, const char* op);

  std::vector<Node> nodes_;
};

}  // namespace lhs::math

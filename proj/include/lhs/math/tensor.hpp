#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lhs::math {

// Dense row-major tensor of doubles. Rank 1 or 2 in practice; elementwise
// code accepts any rank, matmul and row/col ops require rank 2.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0);

  static Tensor scalar(double v);
  static Tensor from(std::vector<std::size_t> s, std::vector<double> d);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::string shape_str(const std::vector<std::size_t>& s);

bool all_finite(const Tensor& t);

// Copy with rows and columns swapped; t must be rank 2.
Tensor transposed(const Tensor& t);

}  // namespace lhs::math

#include "lhs/math/tensor.hpp"

#include <cmath>
#include <numeric>

namespace lhs::math {

namespace {
std::size_t product(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
  for (std::size_t e : shape) {
    if (e == 0) throw std::invalid_argument("tensor: zero extent in shape " + shape_str(shape));
  }
  data.assign(product(shape), fill);
}

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t.data[0] = v;
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> s, std::vector<double> d) {
  Tensor t;
  t.shape = std::move(s);
  t.data = std::move(d);
  if (t.data.size() != product(t.shape)) {
    throw std::invalid_argument("tensor: " + std::to_string(t.data.size()) +
                                " values do not fill shape " + shape_str(t.shape));
  }
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw std::logic_error("tensor: rows() on rank " + std::to_string(rank()));
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw std::logic_error("tensor: cols() on rank " + std::to_string(rank()));
  return shape[1];
}

double& Tensor::at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }

double Tensor::at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

bool all_finite(const Tensor& t) {
  for (double v : t.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor transposed(const Tensor& t) {
  const std::size_t r = t.rows(), c = t.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out.data[j * r + i] = t.data[i * c + j];
  }
  return out;
}

}  // namespace lhs::math

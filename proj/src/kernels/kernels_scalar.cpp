#include "lhs/kernels/kernels.hpp"

#include <cmath>

namespace lhs::kernels {
namespace {

void add_k(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_k(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_k(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void pdiv_k(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double mag = std::fabs(b[i]) < kProtectedDivEps ? kProtectedDivEps
                                                          : std::fabs(b[i]);
    out[i] = a[i] / (b[i] < 0.0 ? -mag : mag);
  }
}

void vmin_k(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] < b[i] ? a[i] : b[i];
}

void vmax_k(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

void neg_k(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = -a[i];
}

void vabs_k(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(a[i]);
}

void relu_k(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void lrelu_k(const double* a, double slope, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : slope * a[i];
}

void scale_k(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = s * a[i];
}

void axpy_k(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void fill_k(double v, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = v;
}

void matmul_k(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
  fill_k(0.0, c, m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

const KernelTable kScalar = {
    "scalar", add_k,  sub_k,   mul_k,  pdiv_k, vmin_k, vmax_k,   neg_k,
    vabs_k,   relu_k, lrelu_k, scale_k, axpy_k, fill_k, matmul_k,
};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace lhs::kernels

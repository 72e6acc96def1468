#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

#include "lhs/kernels/kernels.hpp"

namespace lhs::kernels {
namespace {

constexpr std::size_t kLanes = 2;

void add_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void pdiv_k(const double* a, const double* b, double* out, std::size_t n) {
  const float64x2_t eps = vdupq_n_f64(kProtectedDivEps);
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t vb = vld1q_f64(b + i);
    const float64x2_t mag = vmaxq_f64(vabsq_f64(vb), eps);
    const uint64x2_t isneg = vcltq_f64(vb, zero);
    const float64x2_t denom = vbslq_f64(isneg, vnegq_f64(mag), mag);
    vst1q_f64(out + i, vdivq_f64(vld1q_f64(a + i), denom));
  }
  for (; i < n; ++i) {
    const double m = std::fabs(b[i]) < kProtectedDivEps ? kProtectedDivEps : std::fabs(b[i]);
    out[i] = a[i] / (b[i] < 0.0 ? -m : m);
  }
}

// fmin/fmax on NEON return -0.0 for min(-0.0, +0.0); the scalar ternary
// returns its second operand on ties. Compare+select reproduces the scalar
// choice bit for bit.
void vmin_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t va = vld1q_f64(a + i);
    const float64x2_t vb = vld1q_f64(b + i);
    vst1q_f64(out + i, vbslq_f64(vcltq_f64(va, vb), va, vb));
  }
  for (; i < n; ++i) out[i] = a[i] < b[i] ? a[i] : b[i];
}

void vmax_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t va = vld1q_f64(a + i);
    const float64x2_t vb = vld1q_f64(b + i);
    vst1q_f64(out + i, vbslq_f64(vcgtq_f64(va, vb), va, vb));
  }
  for (; i < n; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

void neg_k(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) vst1q_f64(out + i, vnegq_f64(vld1q_f64(a + i)));
  for (; i < n; ++i) out[i] = -a[i];
}

void vabs_k(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) vst1q_f64(out + i, vabsq_f64(vld1q_f64(a + i)));
  for (; i < n; ++i) out[i] = std::fabs(a[i]);
}

void relu_k(const double* a, double* out, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t va = vld1q_f64(a + i);
    vst1q_f64(out + i, vbslq_f64(vcgtq_f64(va, zero), va, zero));
  }
  for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void lrelu_k(const double* a, double slope, double* out, std::size_t n) {
  const float64x2_t zero = vdupq_n_f64(0.0);
  const float64x2_t vs = vdupq_n_f64(slope);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t va = vld1q_f64(a + i);
    vst1q_f64(out + i, vbslq_f64(vcgtq_f64(va, zero), va, vmulq_f64(vs, va)));
  }
  for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : slope * a[i];
}

void scale_k(const double* a, double s, double* out, std::size_t n) {
  const float64x2_t vs = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) vst1q_f64(out + i, vmulq_f64(vs, vld1q_f64(a + i)));
  for (; i < n; ++i) out[i] = s * a[i];
}

void axpy_k(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  // mul then add, never fused, so results stay bit-identical to scalar.
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t prod = vmulq_f64(va, vld1q_f64(x + i));
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void fill_k(double v, double* out, std::size_t n) {
  const float64x2_t vv = vdupq_n_f64(v);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) vst1q_f64(out + i, vv);
  for (; i < n; ++i) out[i] = v;
}

void matmul_k(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
  fill_k(0.0, c, m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      axpy_k(a[i * k + p], b + p * n, crow, n);
    }
  }
}

const KernelTable kNeon = {
    "neon", add_k,  sub_k,   mul_k,   pdiv_k, vmin_k, vmax_k,   neg_k,
    vabs_k, relu_k, lrelu_k, scale_k, axpy_k, fill_k, matmul_k,
};

}  // namespace

const KernelTable& neon_table() { return kNeon; }

}  // namespace lhs::kernels

#endif  // aarch64

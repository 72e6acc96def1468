#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "lhs/kernels/kernels.hpp"

namespace lhs::kernels {
namespace {

constexpr std::size_t kLanes = 4;

inline __m256d abs_pd(__m256d v) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  return _mm256_and_pd(v, mask);
}

inline __m256d neg_pd(__m256d v) {
  const __m256d sign = _mm256_castsi256_pd(_mm256_set1_epi64x(0x8000000000000000LL));
  return _mm256_xor_pd(v, sign);
}

void add_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void pdiv_k(const double* a, const double* b, double* out, std::size_t n) {
  const __m256d eps = _mm256_set1_pd(kProtectedDivEps);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d vb = _mm256_loadu_pd(b + i);
    // max(|b|, eps) with the-first-operand-on-tie semantics does not matter
    // here: both orders give the same value for positive magnitudes.
    const __m256d mag = _mm256_max_pd(abs_pd(vb), eps);
    const __m256d isneg = _mm256_cmp_pd(vb, zero, _CMP_LT_OQ);
    const __m256d denom = _mm256_blendv_pd(mag, neg_pd(mag), isneg);
    _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_loadu_pd(a + i), denom));
  }
  for (; i < n; ++i) {
    const double m = std::fabs(b[i]) < kProtectedDivEps ? kProtectedDivEps : std::fabs(b[i]);
    out[i] = a[i] / (b[i] < 0.0 ? -m : m);
  }
}

void vmin_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  // minpd(a, b) = a < b ? a : b, matching the scalar ternary exactly.
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_min_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] < b[i] ? a[i] : b[i];
}

void vmax_k(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

void neg_k(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, neg_pd(_mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) out[i] = -a[i];
}

void vabs_k(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, abs_pd(_mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) out[i] = std::fabs(a[i]);
}

void relu_k(const double* a, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i), zero));
  }
  for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void lrelu_k(const double* a, double slope, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d vs = _mm256_set1_pd(slope);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d pos = _mm256_cmp_pd(va, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(_mm256_mul_pd(vs, va), va, pos));
  }
  for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : slope * a[i];
}

void scale_k(const double* a, double s, double* out, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(vs, _mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) out[i] = s * a[i];
}

void axpy_k(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  // mul then add, never fmadd: keeps results bit-identical to scalar.
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void fill_k(double v, double* out, std::size_t n) {
  const __m256d vv = _mm256_set1_pd(v);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) _mm256_storeu_pd(out + i, vv);
  for (; i < n; ++i) out[i] = v;
}

void matmul_k(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
  fill_k(0.0, c, m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      axpy_k(av, brow, crow, n);
    }
  }
}

const KernelTable kAvx2 = {
    "avx2", add_k,  sub_k,   mul_k,   pdiv_k, vmin_k, vmax_k,   neg_k,
    vabs_k, relu_k, lrelu_k, scale_k, axpy_k, fill_k, matmul_k,
};

}  // namespace

const KernelTable& avx2_table() { return kAvx2; }

bool avx2_supported() { return __builtin_cpu_supports("avx2") != 0; }

}  // namespace lhs::kernels

#endif  // x86_64

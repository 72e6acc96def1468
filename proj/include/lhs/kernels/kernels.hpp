#pragma once

#include <cstddef>
#include <string>

namespace lhs::kernels {

// Double-precision array kernels behind a runtime-selected dispatch table.
// Every SIMD variant is required to produce bit-identical output to the
// scalar reference: per-element operation order is preserved and matmul
// accumulates along k in ascending order for each output element. Builds
// use -ffp-contract=off so the scalar path cannot be contracted into FMA.
struct KernelTable {
  const char* name;

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // Protected division: a / (sign(b) * max(|b|, 1e-6)), sign(0) = +1.
  void (*pdiv)(const double* a, const double* b, double* out, std::size_t n);
  void (*vmin)(const double* a, const double* b, double* out, std::size_t n);
  void (*vmax)(const double* a, const double* b, double* out, std::size_t n);
  void (*neg)(const double* a, double* out, std::size_t n);
  void (*vabs)(const double* a, double* out, std::size_t n);
  void (*relu)(const double* a, double* out, std::size_t n);
  void (*lrelu)(const double* a, double slope, double* out, std::size_t n);
  void (*scale)(const double* a, double s, double* out, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*fill)(double v, double* out, std::size_t n);
  // C[MxN] = A[MxK] * B[KxN], row-major. C is overwritten.
  void (*matmul)(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t k, std::size_t n);
};

constexpr double kProtectedDivEps = 1e-6;

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
bool avx2_supported();
#endif
#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

// Active table. Resolution order: explicit select() call, LHS_KERNELS
// environment variable (scalar|avx2|neon|auto), then best supported ISA.
const KernelTable& active();

// Force a backend by name; throws on unknown or unsupported names.
void select(const std::string& name);

}  // namespace lhs::kernels

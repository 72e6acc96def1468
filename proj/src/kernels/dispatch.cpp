#include <cstdlib>
#include <stdexcept>
#include <string>

#include "lhs/kernels/kernels.hpp"

namespace lhs::kernels {
namespace {

const KernelTable* resolve(const std::string& name) {
  if (name == "scalar") return &scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
  if (name == "avx2") {
    if (!avx2_supported()) throw std::runtime_error("kernels: avx2 not supported on this cpu");
    return &avx2_table();
  }
#endif
#if defined(__aarch64__)
  if (name == "neon") return &neon_table();
#endif
  if (name == "auto") {
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_supported()) return &avx2_table();
#endif
#if defined(__aarch64__)
    return &neon_table();
#endif
    return &scalar_table();
  }
  throw std::runtime_error("kernels: unknown backend '" + name + "'");
}

const KernelTable* initial() {
  const char* env = std::getenv("LHS_KERNELS");
  return resolve(env && *env ? env : "auto");
}

const KernelTable*& slot() {
  static const KernelTable* current = initial();
  return current;
}

}  // namespace

const KernelTable& active() { return *slot(); }

void select(const std::string& name) { slot() = resolve(name); }

}  // namespace lhs::kernels

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "handreg/simd/kernels.hpp"

namespace handreg::simd {
namespace {

Isa detect() {
  if (const char* env = std::getenv("HANDREG_SIMD"); env && std::strcmp(env, "scalar") == 0) {
    return Isa::Scalar;
  }
  return avx2_supported() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_supported()) isa = Isa::Scalar;
  current().store(isa, std::memory_order_relaxed);
}

#define HANDREG_DISPATCH(fn, ...)                                    \
  return active_isa() == Isa::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__)

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  HANDREG_DISPATCH(gemm_nn, m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  HANDREG_DISPATCH(gemm_tn, m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  HANDREG_DISPATCH(gemm_nt, m, n, k, a, lda, b, ldb, c, ldc);
}

double dot(const double* x, const double* y, std::size_t n) { HANDREG_DISPATCH(dot, x, y, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  HANDREG_DISPATCH(axpy, alpha, x, y, n);
}

#undef HANDREG_DISPATCH

}  // namespace handreg::simd

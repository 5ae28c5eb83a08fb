#pragma once
// Dense inner-loop kernels used by the autodiff engine.
//
// Every kernel has a scalar reference implementation and, where the CPU
// supports it, an AVX2+FMA variant. The active variant is picked once per
// process (see active_isa()) so a run never mixes summation orders.

#include <cstddef>
#include <string_view>

namespace handreg::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

/// True when the host CPU reports AVX2 and FMA.
bool avx2_supported();

/// Variant used by the dispatching entry points below. Defaults to the best
/// supported ISA; the environment variable HANDREG_SIMD=scalar forces the
/// reference path.
Isa active_isa();

/// Overrides the dispatch choice. Requesting Avx2 on a host without it falls
/// back to Scalar. Not thread-safe with respect to concurrently running kernels.
void set_active_isa(Isa isa);

// All matrices are row-major with explicit leading dimensions. Every gemm
// accumulates into C.

/// C[m,n] += A[m,k] * B[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
/// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
/// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);

double dot(const double* x, const double* y, std::size_t n);
/// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

namespace scalar {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
// Only callable when avx2_supported() is true.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2

}  // namespace handreg::simd

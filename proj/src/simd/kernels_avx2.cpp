// Compiled with -mavx2 -mfma. Nothing in this file may be called unless
// avx2_supported() returned true.
#include "handreg/simd/kernels.hpp"

#include <immintrin.h>

namespace handreg::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// C[4 rows, n] += sum_p a(r, p) * B[p, :], where a(r, p) = a[r * ars + p * aps].
// Covers both the NN and TN layouts through the two A strides.
inline void rows4(std::size_t n, std::size_t k, const double* a, std::size_t ars, std::size_t aps,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d c00 = _mm256_loadu_pd(c + 0 * ldc + j), c01 = _mm256_loadu_pd(c + 0 * ldc + j + 4);
    __m256d c10 = _mm256_loadu_pd(c + 1 * ldc + j), c11 = _mm256_loadu_pd(c + 1 * ldc + j + 4);
    __m256d c20 = _mm256_loadu_pd(c + 2 * ldc + j), c21 = _mm256_loadu_pd(c + 2 * ldc + j + 4);
    __m256d c30 = _mm256_loadu_pd(c + 3 * ldc + j), c31 = _mm256_loadu_pd(c + 3 * ldc + j + 4);
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * ldb + j;
      const __m256d b0 = _mm256_loadu_pd(brow);
      const __m256d b1 = _mm256_loadu_pd(brow + 4);
      const double* ap = a + p * aps;
      __m256d av = _mm256_broadcast_sd(ap);
      c00 = _mm256_fmadd_pd(av, b0, c00);
      c01 = _mm256_fmadd_pd(av, b1, c01);
      av = _mm256_broadcast_sd(ap + ars);
      c10 = _mm256_fmadd_pd(av, b0, c10);
      c11 = _mm256_fmadd_pd(av, b1, c11);
      av = _mm256_broadcast_sd(ap + 2 * ars);
      c20 = _mm256_fmadd_pd(av, b0, c20);
      c21 = _mm256_fmadd_pd(av, b1, c21);
      av = _mm256_broadcast_sd(ap + 3 * ars);
      c30 = _mm256_fmadd_pd(av, b0, c30);
      c31 = _mm256_fmadd_pd(av, b1, c31);
    }
    _mm256_storeu_pd(c + 0 * ldc + j, c00);
    _mm256_storeu_pd(c + 0 * ldc + j + 4, c01);
    _mm256_storeu_pd(c + 1 * ldc + j, c10);
    _mm256_storeu_pd(c + 1 * ldc + j + 4, c11);
    _mm256_storeu_pd(c + 2 * ldc + j, c20);
    _mm256_storeu_pd(c + 2 * ldc + j + 4, c21);
    _mm256_storeu_pd(c + 3 * ldc + j, c30);
    _mm256_storeu_pd(c + 3 * ldc + j + 4, c31);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d c0 = _mm256_loadu_pd(c + 0 * ldc + j);
    __m256d c1 = _mm256_loadu_pd(c + 1 * ldc + j);
    __m256d c2 = _mm256_loadu_pd(c + 2 * ldc + j);
    __m256d c3 = _mm256_loadu_pd(c + 3 * ldc + j);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d bv = _mm256_loadu_pd(b + p * ldb + j);
      const double* ap = a + p * aps;
      c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(ap), bv, c0);
      c1 = _mm256_fmadd_pd(_mm256_broadcast_sd(ap + ars), bv, c1);
      c2 = _mm256_fmadd_pd(_mm256_broadcast_sd(ap + 2 * ars), bv, c2);
      c3 = _mm256_fmadd_pd(_mm256_broadcast_sd(ap + 3 * ars), bv, c3);
    }
    _mm256_storeu_pd(c + 0 * ldc + j, c0);
    _mm256_storeu_pd(c + 1 * ldc + j, c1);
    _mm256_storeu_pd(c + 2 * ldc + j, c2);
    _mm256_storeu_pd(c + 3 * ldc + j, c3);
  }
  for (; j < n; ++j) {
    for (std::size_t r = 0; r < 4; ++r) {
      double s = c[r * ldc + j];
      for (std::size_t p = 0; p < k; ++p) s += a[r * ars + p * aps] * b[p * ldb + j];
      c[r * ldc + j] = s;
    }
  }
}

inline void row1(std::size_t n, std::size_t k, const double* a, std::size_t aps, const double* b,
                 std::size_t ldb, double* c) {
  for (std::size_t p = 0; p < k; ++p) axpy(a[p * aps], b + p * ldb, c, n);
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) rows4(n, k, a + i * lda, lda, 1, b, ldb, c + i * ldc, ldc);
  for (; i < m; ++i) row1(n, k, a + i * lda, 1, b, ldb, c + i * ldc);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) rows4(n, k, a + i, 1, lda, b, ldb, c + i * ldc, ldc);
  for (; i < m; ++i) row1(n, k, a + i, lda, b, ldb, c + i * ldc);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * lda;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + (j + 0) * ldb;
      const double* b1 = b + (j + 1) * ldb;
      const double* b2 = b + (j + 2) * ldb;
      const double* b3 = b + (j + 3) * ldb;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d av = _mm256_loadu_pd(arow + p);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
      }
      double t0 = hsum(s0), t1 = hsum(s1), t2 = hsum(s2), t3 = hsum(s3);
      for (; p < k; ++p) {
        t0 += arow[p] * b0[p];
        t1 += arow[p] * b1[p];
        t2 += arow[p] * b2[p];
        t3 += arow[p] * b3[p];
      }
      double* crow = c + i * ldc + j;
      crow[0] += t0;
      crow[1] += t1;
      crow[2] += t2;
      crow[3] += t3;
    }
    for (; j < n; ++j) c[i * ldc + j] += dot(arow, b + j * ldb, k);
  }
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
  }
  for (; i + 4 <= n; i += 4) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4,
                     _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace handreg::simd::avx2

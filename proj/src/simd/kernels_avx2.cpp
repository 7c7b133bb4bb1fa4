// Compiled with -mavx2 -mfma; nothing in here may run before cpu_has_avx2().
#include "facesync/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace facesync::simd::avx2 {
namespace {

// 4x8 register block: C[i0..i0+4, j0..j0+8] += sum_p A(i,p) * B(p, j).
// A(i,p) lives at a[i*ars + p*acs], so the same block serves A and A^T.
inline void block_4x8(std::size_t k, const double* a, std::size_t ars,
                      std::size_t acs, const double* b, std::size_t ldb,
                      double* c, std::size_t ldc) {
  __m256d c00 = _mm256_loadu_pd(c + 0 * ldc), c01 = _mm256_loadu_pd(c + 0 * ldc + 4);
  __m256d c10 = _mm256_loadu_pd(c + 1 * ldc), c11 = _mm256_loadu_pd(c + 1 * ldc + 4);
  __m256d c20 = _mm256_loadu_pd(c + 2 * ldc), c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
  __m256d c30 = _mm256_loadu_pd(c + 3 * ldc), c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * ldb;
    const __m256d b0 = _mm256_loadu_pd(brow);
    const __m256d b1 = _mm256_loadu_pd(brow + 4);
    const double* ap = a + p * acs;
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
  _mm256_storeu_pd(c + 0 * ldc, c00); _mm256_storeu_pd(c + 0 * ldc + 4, c01);
  _mm256_storeu_pd(c + 1 * ldc, c10); _mm256_storeu_pd(c + 1 * ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c20); _mm256_storeu_pd(c + 2 * ldc + 4, c21);
  _mm256_storeu_pd(c + 3 * ldc, c30); _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

// One row of C, 4 columns at a time, scalar tail.
inline void row_tail(std::size_t n, std::size_t k, const double* a, std::size_t acs,
                     const double* b, std::size_t ldb, double* c) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_loadu_pd(c + j);
    for (std::size_t p = 0; p < k; ++p)
      acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p * acs),
                            _mm256_loadu_pd(b + p * ldb + j), acc);
    _mm256_storeu_pd(c + j, acc);
  }
  for (; j < n; ++j) {
    double s = c[j];
    for (std::size_t p = 0; p < k; ++p) s = std::fma(a[p * acs], b[p * ldb + j], s);
    c[j] = s;
  }
}

void gemm_strided(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t ars, std::size_t acs, const double* b, std::size_t ldb,
                  double* c, std::size_t ldc) {
  const std::size_t n8 = n - n % 8;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (std::size_t j = 0; j < n8; j += 8)
      block_4x8(k, a + i * ars, ars, acs, b + j, ldb, c + i * ldc + j, ldc);
    if (n8 < n)
      for (std::size_t r = 0; r < 4; ++r)
        row_tail(n - n8, k, a + (i + r) * ars, acs, b + n8, ldb, c + (i + r) * ldc + n8);
  }
  for (; i < m; ++i) row_tail(n, k, a + i * ars, acs, b, ldb, c + i * ldc);
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc) {
  gemm_strided(m, n, k, a, lda, 1, b, ldb, c, ldc);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc) {
  gemm_strided(m, n, k, a, 1, lda, b, ldb, c, ldc);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

double dot(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

const KernelTable& table() {
  static const KernelTable t{"avx2", &gemm_nn, &gemm_tn, &axpy, &dot};
  return t;
}

}  // namespace facesync::simd::avx2

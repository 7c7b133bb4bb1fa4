#pragma once

// Dense double-precision kernels used by the convolution and linear layers.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2/FMA
// variant. The active variant is chosen once at startup from CPUID and can be
// pinned with FACESYNC_SIMD=scalar|avx2. Variants agree to within rounding
// (FMA contracts a*b+c into one rounding step), never bit-for-bit.

#include <cstddef>
#include <string_view>

namespace facesync::simd {

// C(m x n) += A(m x k) * B(k x n); all row-major with explicit leading dims.
using GemmNNFn = void (*)(std::size_t m, std::size_t n, std::size_t k,
                          const double* a, std::size_t lda,
                          const double* b, std::size_t ldb,
                          double* c, std::size_t ldc);

// C(m x n) += A^T * B where A is stored k x m.
using GemmTNFn = GemmNNFn;

// y += alpha * x
using AxpyFn = void (*)(std::size_t n, double alpha, const double* x, double* y);

using DotFn = double (*)(std::size_t n, const double* x, const double* y);

struct KernelTable {
  std::string_view name;
  GemmNNFn gemm_nn;
  GemmTNFn gemm_tn;
  AxpyFn axpy;
  DotFn dot;
};

namespace scalar {
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc);
void axpy(std::size_t n, double alpha, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
const KernelTable& table();
}  // namespace scalar

namespace avx2 {
// Only callable when cpu_has_avx2() is true.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc);
void axpy(std::size_t n, double alpha, const double* x, double* y);
double dot(std::size_t n, const double* x, const double* y);
const KernelTable& table();
}  // namespace avx2

bool avx2_compiled();
bool cpu_has_avx2();

/// Kernel table selected for this process.
const KernelTable& active();

/// Force a specific variant ("scalar" or "avx2"). Returns false if the
/// variant is unavailable on this machine. Not thread-safe; call before
/// any network work starts.
bool select(std::string_view name);

}  // namespace facesync::simd

#include "mtae/blas.hpp"

#include <cblas.h>

#include <cstdlib>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#if defined(__x86_64__)
#include <cpuid.h>

// Raw CPUID + XGETBV rather than __builtin_cpu_supports: the latter reads a
// table that libgcc fills in from its own priority-101 constructor, which
// need not have run yet when ours does.
static bool mtae_os_cpu_allow_avx512() {
  unsigned eax, ebx, ecx, edx;
  if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
  const unsigned avx512f = 1u << 16, avx512vl = 1u << 31;
  if ((ebx & avx512f) == 0 || (ebx & avx512vl) == 0) return false;
  if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
  if ((ecx & (1u << 27)) == 0) return false;
  unsigned lo, hi;
  __asm__ volatile("xgetbv" : "=a"(lo), "=d"(hi) : "c"(0));
  return (lo & 0xe6u) == 0xe6u;
}
#endif

// OpenBLAS picks its kernel set from CPUID at library init and its Cooper
// Lake detection misses some AVX-512 parts, falling back to a Prescott-era
// kernel (~5x slower sgemm). Both overrides must be in place before
// OpenBLAS's own initialiser runs, hence a priority-101 constructor and a
// static link. The thread cap has to go through the environment as well:
// calling openblas_set_num_threads during static init touches the thread
// server before the library has set itself up and corrupts it.
__attribute__((constructor(101))) static void mtae_configure_openblas() {
  setenv("OPENBLAS_NUM_THREADS", "1", 0);
#if defined(__x86_64__)
  if (mtae_os_cpu_allow_avx512())
    setenv("OPENBLAS_CORETYPE", "COOPERLAKE", 0);
#endif
#if defined(__GLIBC__)
  // Activation tensors run to tens of MB. With the default thresholds glibc
  // serves each one from a fresh mmap and returns it on free, so every layer
  // pays the page-fault cost again on the next step. Keeping large blocks on
  // the heap lets the arena recycle them.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

namespace mtae {

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
          const float* a, int lda, const float* b, int ldb, float beta,
          float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
  cblas_saxpy(static_cast<int>(n), alpha, x, 1, y, 1);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  cblas_daxpy(static_cast<int>(n), alpha, x, 1, y, 1);
}

}  // namespace mtae

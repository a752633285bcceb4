#pragma once

#include <cstdint>

#ifdef HSF_USE_CBLAS
#include <cblas.h>
extern "C" void openblas_set_num_threads(int);
#endif

namespace hsf {

namespace detail {

#ifdef HSF_USE_CBLAS
// Pinned to one thread so reduction order never depends on the machine.
inline void pin_blas_threads() {
  static const bool done = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)done;
}
#endif

// Fallback kernels, row-major. Loop orders keep the inner loop contiguous.
template <typename T>
void gemm_loops(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
                const T* a, const T* b, T beta, T* c) {
  if (beta == T(0)) {
    for (int64_t i = 0; i < m * n; ++i) c[i] = T(0);
  }
  if (!trans_a && !trans_b) {
    for (int64_t i = 0; i < m; ++i) {
      const T* ai = a + i * k;
      T* ci = c + i * n;
      for (int64_t p = 0; p < k; ++p) {
        T av = ai[p];
        const T* bp = b + p * n;
        for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (int64_t i = 0; i < m; ++i) {
      const T* ai = a + i * k;
      T* ci = c + i * n;
      for (int64_t j = 0; j < n; ++j) {
        const T* bj = b + j * k;
        T acc = T(0);
        for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
        ci[j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    for (int64_t p = 0; p < k; ++p) {
      const T* ap = a + p * m;
      const T* bp = b + p * n;
      for (int64_t i = 0; i < m; ++i) {
        T av = ap[i];
        T* ci = c + i * n;
        for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else {
    for (int64_t i = 0; i < m; ++i) {
      T* ci = c + i * n;
      for (int64_t j = 0; j < n; ++j) {
        const T* bj = b + j * k;
        T acc = T(0);
        for (int64_t p = 0; p < k; ++p) acc += a[p * m + i] * bj[p];
        ci[j] += acc;
      }
    }
  }
}

}  // namespace detail

// C[m,n] = A·B + beta·C, row-major contiguous. trans_a reads A as the
// transpose of a stored (k, m) buffer; trans_b likewise for a (n, k) buffer.
template <typename T>
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          const T* a, const T* b, T beta, T* c) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (beta == T(0))
      for (int64_t i = 0; i < m * n; ++i) c[i] = T(0);
    return;
  }
#ifdef HSF_USE_CBLAS
  detail::pin_blas_threads();
  const auto ta = trans_a ? CblasTrans : CblasNoTrans;
  const auto tb = trans_b ? CblasTrans : CblasNoTrans;
  const int lda = static_cast<int>(trans_a ? m : k);
  const int ldb = static_cast<int>(trans_b ? k : n);
  if constexpr (sizeof(T) == sizeof(float)) {
    cblas_sgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), 1.0f, reinterpret_cast<const float*>(a), lda,
                reinterpret_cast<const float*>(b), ldb, static_cast<float>(beta),
                reinterpret_cast<float*>(c), static_cast<int>(n));
  } else {
    cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), 1.0, reinterpret_cast<const double*>(a), lda,
                reinterpret_cast<const double*>(b), ldb, static_cast<double>(beta),
                reinterpret_cast<double*>(c), static_cast<int>(n));
  }
#else
  detail::gemm_loops(trans_a, trans_b, m, n, k, a, b, beta, c);
#endif
}

}  // namespace hsf

#pragma once
// Data-parallel float kernels behind a runtime-selected dispatch table.
//
// Every kernel has a portable scalar reference and, where the CPU supports
// it, an AVX2+FMA variant. `active()` picks the best table once per process;
// setting VAC_SIMD=scalar in the environment forces the reference path.
// Double-precision callers (gradient checking) use the templated reference
// routines directly.

#include <cstddef>
#include <string_view>
#include <type_traits>

namespace vac::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa) noexcept;

struct AdamCoefficients {
  float lr;
  float beta1;
  float beta2;
  float eps;
  float bias_correction1;  // 1 - beta1^t
  float bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;

  // Row-major C[m,n] = alpha * op(A)[m,k] * op(B)[k,n] + beta * C.
  // With beta == 0 the prior contents of C are ignored (NaNs included).
  void (*sgemm)(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                float beta, float* c, std::size_t ldc);

  float (*sdot)(const float* x, const float* y, std::size_t n);

  // y += alpha * x
  void (*saxpy)(std::size_t n, float alpha, const float* x, float* y);

  // One AMSGrad Adam update over n contiguous parameters.
  void (*adam_amsgrad)(std::size_t n, float* param, const float* grad, float* m, float* v,
                       float* v_max, const AdamCoefficients& c);
};

const KernelTable& scalar_table() noexcept;

// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_table() noexcept;

bool cpu_has_avx2_fma() noexcept;

const KernelTable& active() noexcept;

// Portable reference GEMM usable for any arithmetic type.
template <typename T>
void gemm_reference(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                    T alpha, const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta,
                    T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (beta == T(0)) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
    } else if (beta != T(1)) {
      for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const T av = alpha * (trans_a ? a[p * lda + i] : a[i * lda + p]);
      if (av == T(0)) continue;
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
      } else {
        const T* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

// Type-dispatching GEMM: float goes through the active SIMD table.
template <typename T>
inline void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
                 const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
                 std::size_t ldc) {
  if constexpr (std::is_same_v<T, float>) {
    active().sgemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  } else {
    gemm_reference<T>(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  }
}

template <typename T>
inline T dot(const T* x, const T* y, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return active().sdot(x, y, n);
  } else {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
  }
}

}  // namespace vac::simd

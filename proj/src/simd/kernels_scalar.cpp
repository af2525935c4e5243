#include <algorithm>
#include <cmath>

#include "vac/simd/kernels.hpp"

namespace vac::simd {
namespace {

void sgemm_scalar(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                  float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                  float beta, float* c, std::size_t ldc) {
  gemm_reference<float>(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

float sdot_scalar(const float* x, const float* y, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void saxpy_scalar(std::size_t n, float alpha, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_amsgrad_scalar(std::size_t n, float* param, const float* grad, float* m, float* v,
                         float* v_max, const AdamCoefficients& c) {
  const float one_minus_b1 = 1.0f - c.beta1;
  const float one_minus_b2 = 1.0f - c.beta2;
  const float step_size = c.lr / c.bias_correction1;
  const float inv_sqrt_bc2 = 1.0f / std::sqrt(c.bias_correction2);
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    v_max[i] = std::max(v_max[i], v[i]);
    const float denom = std::sqrt(v_max[i]) * inv_sqrt_bc2 + c.eps;
    param[i] -= step_size * (m[i] / denom);
  }
}

constexpr KernelTable kScalarTable{Isa::scalar, &sgemm_scalar, &sdot_scalar, &saxpy_scalar,
                                   &adam_amsgrad_scalar};

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalarTable; }

}  // namespace vac::simd

// AVX2 + FMA kernels. This translation unit is the only one compiled with
// -mavx2 -mfma; nothing here may be called unless cpu_has_avx2_fma().

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "vac/simd/kernels.hpp"

namespace vac::simd {
namespace {

constexpr std::size_t kRows = 4;
constexpr std::size_t kCols = 16;

inline float hsum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

// Accumulates a kRows x kCols tile: c += alpha * a[rows, k] * panel[k, 16].
// `panel` is packed row-major with exactly kCols floats per k.
inline void tile_4x16(std::size_t k, float alpha, const float* a, std::size_t lda,
                      const float* panel, float* c, std::size_t ldc, std::size_t cols) {
  __m256 acc[kRows][2];
  for (auto& row : acc) row[0] = row[1] = _mm256_setzero_ps();
  const float* a0 = a;
  const float* a1 = a + lda;
  const float* a2 = a + 2 * lda;
  const float* a3 = a + 3 * lda;
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 b0 = _mm256_loadu_ps(panel + p * kCols);
    const __m256 b1 = _mm256_loadu_ps(panel + p * kCols + 8);
    __m256 av = _mm256_broadcast_ss(a0 + p);
    acc[0][0] = _mm256_fmadd_ps(av, b0, acc[0][0]);
    acc[0][1] = _mm256_fmadd_ps(av, b1, acc[0][1]);
    av = _mm256_broadcast_ss(a1 + p);
    acc[1][0] = _mm256_fmadd_ps(av, b0, acc[1][0]);
    acc[1][1] = _mm256_fmadd_ps(av, b1, acc[1][1]);
    av = _mm256_broadcast_ss(a2 + p);
    acc[2][0] = _mm256_fmadd_ps(av, b0, acc[2][0]);
    acc[2][1] = _mm256_fmadd_ps(av, b1, acc[2][1]);
    av = _mm256_broadcast_ss(a3 + p);
    acc[3][0] = _mm256_fmadd_ps(av, b0, acc[3][0]);
    acc[3][1] = _mm256_fmadd_ps(av, b1, acc[3][1]);
  }
  const __m256 va = _mm256_set1_ps(alpha);
  for (std::size_t r = 0; r < kRows; ++r) {
    float* crow = c + r * ldc;
    if (cols == kCols) {
      _mm256_storeu_ps(crow, _mm256_fmadd_ps(va, acc[r][0], _mm256_loadu_ps(crow)));
      _mm256_storeu_ps(crow + 8, _mm256_fmadd_ps(va, acc[r][1], _mm256_loadu_ps(crow + 8)));
    } else {
      alignas(32) float tmp[kCols];
      _mm256_store_ps(tmp, acc[r][0]);
      _mm256_store_ps(tmp + 8, acc[r][1]);
      for (std::size_t j = 0; j < cols; ++j) crow[j] += alpha * tmp[j];
    }
  }
}

inline void tile_1x16(std::size_t k, float alpha, const float* a, const float* panel, float* c,
                      std::size_t cols) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256 av = _mm256_broadcast_ss(a + p);
    acc0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(panel + p * kCols), acc0);
    acc1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(panel + p * kCols + 8), acc1);
  }
  alignas(32) float tmp[kCols];
  _mm256_store_ps(tmp, acc0);
  _mm256_store_ps(tmp + 8, acc1);
  for (std::size_t j = 0; j < cols; ++j) c[j] += alpha * tmp[j];
}

void sgemm_avx2(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                float beta, float* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * ldc;
    if (beta == 0.0f) {
      std::fill(crow, crow + n, 0.0f);
    } else if (beta != 1.0f) {
      for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
    }
  }
  if (m == 0 || n == 0 || k == 0 || alpha == 0.0f) return;

  // Bring op(A) to row-major m x k.
  std::vector<float> a_packed;
  const float* arow = a;
  std::size_t a_stride = lda;
  if (trans_a) {
    a_packed.resize(m * k);
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) a_packed[i * k + p] = a[p * lda + i];
    arow = a_packed.data();
    a_stride = k;
  }

  std::vector<float> panel(k * kCols);
  for (std::size_t j0 = 0; j0 < n; j0 += kCols) {
    const std::size_t cols = std::min(kCols, n - j0);
    // Pack op(B)[:, j0:j0+cols] into a k x 16 panel, zero-padded.
    for (std::size_t p = 0; p < k; ++p) {
      float* dst = panel.data() + p * kCols;
      if (trans_b) {
        for (std::size_t j = 0; j < cols; ++j) dst[j] = b[(j0 + j) * ldb + p];
      } else {
        std::memcpy(dst, b + p * ldb + j0, cols * sizeof(float));
      }
      for (std::size_t j = cols; j < kCols; ++j) dst[j] = 0.0f;
    }
    std::size_t i = 0;
    for (; i + kRows <= m; i += kRows)
      tile_4x16(k, alpha, arow + i * a_stride, a_stride, panel.data(), c + i * ldc + j0, ldc, cols);
    for (; i < m; ++i) tile_1x16(k, alpha, arow + i * a_stride, panel.data(), c + i * ldc + j0, cols);
  }
}

float sdot_avx2(const float* x, const float* y, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  __m256 acc2 = _mm256_setzero_ps();
  __m256 acc3 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    acc2 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 16), _mm256_loadu_ps(y + i + 16), acc2);
    acc3 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 24), _mm256_loadu_ps(y + i + 24), acc3);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
  float acc = hsum(_mm256_add_ps(_mm256_add_ps(acc0, acc1), _mm256_add_ps(acc2, acc3)));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void saxpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Uses separate multiply and add (no FMA) so results are bit-identical to the
// scalar reference.
void adam_amsgrad_avx2(std::size_t n, float* param, const float* grad, float* m, float* v,
                       float* v_max, const AdamCoefficients& c) {
  const float step_size = c.lr / c.bias_correction1;
  const float inv_sqrt_bc2 = 1.0f / std::sqrt(c.bias_correction2);
  const __m256 b1 = _mm256_set1_ps(c.beta1);
  const __m256 b2 = _mm256_set1_ps(c.beta2);
  const __m256 omb1 = _mm256_set1_ps(1.0f - c.beta1);
  const __m256 omb2 = _mm256_set1_ps(1.0f - c.beta2);
  const __m256 step = _mm256_set1_ps(step_size);
  const __m256 isb = _mm256_set1_ps(inv_sqrt_bc2);
  const __m256 eps = _mm256_set1_ps(c.eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(omb1, g));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(omb2, _mm256_mul_ps(g, g)));
    const __m256 vm = _mm256_max_ps(_mm256_loadu_ps(v_max + i), vi);
    const __m256 denom = _mm256_add_ps(_mm256_mul_ps(_mm256_sqrt_ps(vm), isb), eps);
    const __m256 p = _mm256_sub_ps(_mm256_loadu_ps(param + i), _mm256_mul_ps(step, _mm256_div_ps(mi, denom)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    _mm256_storeu_ps(v_max + i, vm);
    _mm256_storeu_ps(param + i, p);
  }
  if (i < n) {
    scalar_table().adam_amsgrad(n - i, param + i, grad + i, m + i, v + i, v_max + i, c);
  }
}

constexpr KernelTable kAvx2Table{Isa::avx2, &sgemm_avx2, &sdot_avx2, &saxpy_avx2,
                                 &adam_amsgrad_avx2};

}  // namespace

const KernelTable* avx2_table() noexcept { return &kAvx2Table; }

}  // namespace vac::simd

#include "vac/dsp/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vac/dsp/window.hpp"
#include "vac/simd/kernels.hpp"

namespace vac::dsp {
namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  if (x == std::round(x)) return 0.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

SincResampler::SincResampler(double ratio) : ratio_(ratio), cutoff_(std::min(1.0, ratio)) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw std::invalid_argument("SincResampler: ratio must be positive");
  const std::size_t n = kHalfTaps * kOversample + 1;
  table_.resize(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) / kOversample;
    table_[i] = cutoff_ * sinc(cutoff_ * d) * kaiser(d / kHalfTaps, kBeta);
  }
  table_[n] = 0.0;
}

double SincResampler::kernel(double d) const {
  const double pos = std::abs(d) * kOversample;
  const auto i = static_cast<std::size_t>(pos);
  if (i >= table_.size() - 1) return 0.0;
  const double frac = pos - static_cast<double>(i);
  return table_[i] + frac * (table_[i + 1] - table_[i]);
}

std::vector<float> SincResampler::process(std::span<const float> input, std::size_t output_length) const {
  std::vector<float> out(output_length, 0.0f);
  const auto n_in = static_cast<std::ptrdiff_t>(input.size());
  constexpr auto half = static_cast<std::ptrdiff_t>(kHalfTaps);
  float weights[2 * kHalfTaps];
  for (std::size_t n = 0; n < output_length; ++n) {
    const double t = static_cast<double>(n) / ratio_;
    const auto base = static_cast<std::ptrdiff_t>(std::floor(t));
    const std::ptrdiff_t first = base - half + 1;
    double wsum = 0.0;
    for (std::ptrdiff_t j = 0; j < 2 * half; ++j) {
      const double w = kernel(t - static_cast<double>(first + j));
      weights[j] = static_cast<float>(w);
      wsum += w;
    }
    if (wsum == 0.0) continue;
    const auto inv = static_cast<float>(1.0 / wsum);
    if (first >= 0 && first + 2 * half <= n_in) {
      out[n] = simd::dot(weights, input.data() + first, 2 * kHalfTaps) * inv;
    } else {
      float acc = 0.0f;
      for (std::ptrdiff_t j = 0; j < 2 * half; ++j) {
        const std::ptrdiff_t k = first + j;
        if (k >= 0 && k < n_in) acc += weights[j] * input[static_cast<std::size_t>(k)];
      }
      out[n] = acc * inv;
    }
  }
  return out;
}

std::vector<float> resample(std::span<const float> input, double in_rate, double out_rate) {
  if (in_rate == out_rate) return {input.begin(), input.end()};
  const double ratio = out_rate / in_rate;
  const auto length = static_cast<std::size_t>(std::llround(static_cast<double>(input.size()) * ratio));
  return SincResampler(ratio).process(input, length);
}

std::vector<float> decimate2(std::span<const float> input) {
  const SincResampler filter(0.5);
  // Integer output positions: the taps are identical for every sample.
  constexpr auto half = static_cast<std::ptrdiff_t>(SincResampler::kHalfTaps);
  float weights[2 * SincResampler::kHalfTaps];
  double wsum = 0.0;
  for (std::ptrdiff_t j = 0; j < 2 * half; ++j) {
    const double w = filter.kernel(static_cast<double>(half - 1 - j));
    weights[j] = static_cast<float>(w);
    wsum += w;
  }
  for (auto& w : weights) w = static_cast<float>(w / wsum);

  const std::size_t length = input.size() / 2;
  const auto n_in = static_cast<std::ptrdiff_t>(input.size());
  std::vector<float> out(length);
  for (std::size_t n = 0; n < length; ++n) {
    const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(2 * n) - half + 1;
    if (first >= 0 && first + 2 * half <= n_in) {
      out[n] = simd::dot(weights, input.data() + first, 2 * SincResampler::kHalfTaps);
    } else {
      float acc = 0.0f;
      for (std::ptrdiff_t j = 0; j < 2 * half; ++j) {
        const std::ptrdiff_t k = first + j;
        if (k >= 0 && k < n_in) acc += weights[j] * input[static_cast<std::size_t>(k)];
      }
      out[n] = acc;
    }
  }
  return out;
}

}  // namespace vac::dsp

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vac::dsp {

// Kaiser-windowed sinc interpolator: 64 taps (32 per side), beta = 8.
// The cutoff follows the target rate when downsampling so the output is
// band-limited to its own Nyquist frequency. Samples outside the input are
// treated as zero and each output's tap weights are normalized to unit DC gain.
class SincResampler {
 public:
  static constexpr std::size_t kHalfTaps = 32;
  static constexpr double kBeta = 8.0;

  // ratio = output_rate / input_rate
  explicit SincResampler(double ratio);

  double ratio() const noexcept { return ratio_; }
  double cutoff() const noexcept { return cutoff_; }

  // Output sample n is taken at input position n / ratio.
  std::vector<float> process(std::span<const float> input, std::size_t output_length) const;

  // Continuous kernel value at offset d (input samples) before normalization.
  double kernel(double d) const;

 private:
  static constexpr std::size_t kOversample = 512;
  double ratio_;
  double cutoff_;
  std::vector<double> table_;  // kernel sampled on [0, kHalfTaps] (symmetric)
};

// Output length round(n * out_rate / in_rate).
std::vector<float> resample(std::span<const float> input, double in_rate, double out_rate);

// Low-pass at a quarter of the input rate, keep every second sample.
std::vector<float> decimate2(std::span<const float> input);

}  // namespace vac::dsp

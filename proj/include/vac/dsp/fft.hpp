#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace vac::dsp {

// Real-to-complex / complex-to-real DFT of a fixed length, backed by FFTW.
// Instances own their work buffers, so one instance per thread is safe;
// plans are shared process-wide.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  // out.size() == bins(); unnormalized forward transform.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);

  // out.size() == size(); result is scaled by 1/n so inverse(forward(x)) == x.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  struct Buffers;
  std::size_t n_;
  std::unique_ptr<Buffers> buf_;
};

// Magnitudes |X[k]| for k = 0..n/2.
std::vector<double> magnitude_spectrum(std::span<const double> x);

}  // namespace vac::dsp

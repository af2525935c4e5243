#include "vac/dsp/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace vac::dsp {
namespace {

// FFTW's planner is not re-entrant; execution with the new-array interface
// is. Plans are created once per size and never destroyed.
struct PlanPair {
  fftw_plan forward;
  fftw_plan inverse;
};

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

PlanPair plans_for(std::size_t n) {
  static std::map<std::size_t, PlanPair> cache;
  std::lock_guard lock(planner_mutex());
  if (auto it = cache.find(n); it != cache.end()) return it->second;
  auto* real = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  auto* cplx = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
  const int len = static_cast<int>(n);
  PlanPair p{fftw_plan_dft_r2c_1d(len, real, cplx, FFTW_ESTIMATE),
             fftw_plan_dft_c2r_1d(len, cplx, real, FFTW_ESTIMATE)};
  fftw_free(real);
  fftw_free(cplx);
  if (!p.forward || !p.inverse) throw std::runtime_error("FFTW planning failed");
  cache.emplace(n, p);
  return p;
}

}  // namespace

struct RealFft::Buffers {
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
  PlanPair plans{};
  ~Buffers() {
    fftw_free(real);
    fftw_free(cplx);
  }
};

RealFft::RealFft(std::size_t n) : n_(n), buf_(std::make_unique<Buffers>()) {
  if (n == 0) throw std::invalid_argument("RealFft: zero length");
  buf_->plans = plans_for(n);
  buf_->real = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  buf_->cplx = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins()));
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  if (in.size() != n_ || out.size() != bins()) throw std::invalid_argument("RealFft::forward size");
  std::memcpy(buf_->real, in.data(), n_ * sizeof(double));
  fftw_execute_dft_r2c(buf_->plans.forward, buf_->real, buf_->cplx);
  for (std::size_t k = 0; k < bins(); ++k) out[k] = {buf_->cplx[k][0], buf_->cplx[k][1]};
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  if (in.size() != bins() || out.size() != n_) throw std::invalid_argument("RealFft::inverse size");
  for (std::size_t k = 0; k < bins(); ++k) {
    buf_->cplx[k][0] = in[k].real();
    buf_->cplx[k][1] = in[k].imag();
  }
  fftw_execute_dft_c2r(buf_->plans.inverse, buf_->cplx, buf_->real);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = buf_->real[i] * scale;
}

std::vector<double> magnitude_spectrum(std::span<const double> x) {
  RealFft fft(x.size());
  std::vector<std::complex<double>> spec(fft.bins());
  fft.forward(x, spec);
  std::vector<double> mag(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) mag[k] = std::abs(spec[k]);
  return mag;
}

}  // namespace vac::dsp

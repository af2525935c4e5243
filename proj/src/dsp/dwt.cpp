#include "vac/dsp/dwt.hpp"

#include <stdexcept>

namespace vac::dsp {

std::array<double, 8> db4_dec_hi() {
  std::array<double, 8> hi{};
  constexpr std::size_t len = kDb4DecLo.size();
  for (std::size_t k = 0; k < len; ++k) {
    const double sign = (k % 2 == 0) ? -1.0 : 1.0;
    hi[k] = sign * kDb4DecLo[len - 1 - k];
  }
  return hi;
}

void dwt_step(std::span<const double> x, std::span<double> approx, std::span<double> detail) {
  const std::size_t n = x.size();
  if (n % 2 != 0 || approx.size() != n / 2 || detail.size() != n / 2)
    throw std::invalid_argument("dwt_step: size mismatch");
  static const std::array<double, 8> hi = db4_dec_hi();
  constexpr std::size_t len = kDb4DecLo.size();
  for (std::size_t i = 0; i < n / 2; ++i) {
    double a = 0.0;
    double d = 0.0;
    // (2i + len/2 - k) mod n, kept non-negative by adding a multiple of n.
    const std::size_t origin = 2 * i + len / 2 + n * len;
    for (std::size_t k = 0; k < len; ++k) {
      const double v = x[(origin - k) % n];
      a += kDb4DecLo[k] * v;
      d += hi[k] * v;
    }
    approx[i] = a;
    detail[i] = d;
  }
}

std::vector<std::vector<double>> wavedec(std::span<const double> x, int levels) {
  if (levels < 1) throw std::invalid_argument("wavedec: levels must be >= 1");
  if (x.size() % (std::size_t{1} << levels) != 0)
    throw std::invalid_argument("wavedec: length not divisible by 2^levels");
  std::vector<std::vector<double>> details;
  std::vector<double> current(x.begin(), x.end());
  for (int level = 0; level < levels; ++level) {
    std::vector<double> approx(current.size() / 2);
    std::vector<double> detail(current.size() / 2);
    dwt_step(current, approx, detail);
    details.push_back(std::move(detail));
    current = std::move(approx);
  }
  std::vector<std::vector<double>> bands;
  bands.reserve(details.size() + 1);
  bands.push_back(std::move(current));
  for (auto it = details.rbegin(); it != details.rend(); ++it) bands.push_back(std::move(*it));
  return bands;
}

}  // namespace vac::dsp

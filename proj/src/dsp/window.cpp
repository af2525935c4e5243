#include "vac/dsp/window.hpp"

#include <cmath>
#include <numbers>

namespace vac::dsp {

std::vector<double> hann_periodic(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

double bessel_i0(double x) {
  // Power series; converges quickly for the |x| <= ~20 range windows use.
  double sum = 1.0;
  double term = 1.0;
  const double half = 0.5 * x;
  for (int k = 1; k < 200; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

double kaiser(double x, double beta) {
  if (x < -1.0 || x > 1.0) return 0.0;
  return bessel_i0(beta * std::sqrt(1.0 - x * x)) / bessel_i0(beta);
}

}  // namespace vac::dsp

#pragma once

#include <cstddef>
#include <vector>

namespace vac::dsp {

// Periodic Hann window (the STFT convention): w[i] = 0.5 - 0.5 cos(2*pi*i/n).
std::vector<double> hann_periodic(std::size_t n);

// Zeroth-order modified Bessel function of the first kind.
double bessel_i0(double x);

// Kaiser window value at normalized position x in [-1, 1].
double kaiser(double x, double beta);

}  // namespace vac::dsp

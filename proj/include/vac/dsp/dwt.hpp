#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace vac::dsp {

// Daubechies wavelet with 4 vanishing moments (8-tap filters).
inline constexpr std::array<double, 8> kDb4DecLo{
    -0.010597401785069032, 0.0328830116668852,  0.030841381835560764, -0.18703481171909309,
    -0.027983769416859854, 0.6308807679298589,  0.7148465705529157,   0.2303778133088965};

// High-pass is the quadrature mirror: hi[k] = (-1)^(k+1) * lo[L-1-k].
std::array<double, 8> db4_dec_hi();

// One periodized analysis step on an even-length signal:
//   approx[i] = sum_k lo[k] * x[(2i + L/2 - k) mod n], detail likewise with hi.
void dwt_step(std::span<const double> x, std::span<double> approx, std::span<double> detail);

// Multi-level periodized DWT. x.size() must be divisible by 2^levels.
// Bands are returned as [approx_L, detail_L, detail_{L-1}, ..., detail_1].
std::vector<std::vector<double>> wavedec(std::span<const double> x, int levels);

}  // namespace vac::dsp

#include "vac/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "vac/dsp/dwt.hpp"
#include "vac/dsp/fft.hpp"
#include "vac/dsp/resample.hpp"
#include "vac/dsp/window.hpp"
#include "vac/error.hpp"

namespace vac::features {
namespace {

constexpr double kCanonicalRate = audio::kCanonicalRate;

std::size_t reflect_index(std::ptrdiff_t j, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  j %= period;
  if (j < 0) j += period;
  if (j >= static_cast<std::ptrdiff_t>(n)) j = period - j;
  return static_cast<std::size_t>(j);
}

// Centered, reflect-padded frames of a Hann-windowed STFT. Calls
// `sink(frame_index, spectrum)` for each frame.
template <typename Sink>
void stft_frames(std::span<const float> x, std::size_t window, std::size_t hop, Sink&& sink) {
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "empty signal");
  const std::size_t frames = 1 + x.size() / hop;
  const auto w = dsp::hann_periodic(window);
  dsp::RealFft fft(window);
  std::vector<double> segment(window);
  std::vector<std::complex<double>> spectrum(fft.bins());
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(f * hop) - half;
    for (std::size_t i = 0; i < window; ++i)
      segment[i] = w[i] * x[reflect_index(start + static_cast<std::ptrdiff_t>(i), x.size())];
    fft.forward(segment, spectrum);
    sink(f, std::span<const std::complex<double>>(spectrum));
  }
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::string_view to_string(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::waveform: return "waveform";
    case FeatureKind::fft: return "fft";
    case FeatureKind::mfcc: return "mfcc";
    case FeatureKind::spectrogram: return "spectrogram";
    case FeatureKind::wavelets: return "wavelets";
    case FeatureKind::fused: return "fused";
  }
  return "unknown";
}

std::optional<FeatureKind> parse_kind(std::string_view text) noexcept {
  for (auto k : {FeatureKind::waveform, FeatureKind::fft, FeatureKind::mfcc, FeatureKind::spectrogram,
                 FeatureKind::wavelets, FeatureKind::fused})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

bool is_2d(FeatureKind kind) noexcept { return kind == FeatureKind::mfcc || kind == FeatureKind::spectrogram; }

FeatureTensor waveform_feature(std::span<const float> clip) {
  FeatureTensor t;
  t.kind = FeatureKind::waveform;
  t.data = dsp::decimate2(clip);
  t.rows = 1;
  t.cols = t.data.size();
  return t;
}

FeatureTensor fft_feature(std::span<const float> clip) {
  const std::size_t n = clip.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "fft_feature needs at least 2 samples");
  std::vector<double> x(clip.begin(), clip.end());
  const auto mag = dsp::magnitude_spectrum(x);

  std::vector<double> sums(kFftBands, 0.0);
  std::vector<std::size_t> counts(kFftBands, 0);
  const auto rate = static_cast<std::uint64_t>(kCanonicalRate);
  for (std::size_t j = 1; j < mag.size(); ++j) {
    // Bin j sits at j * rate / n Hz; band b covers (b, b + 1] Hz.
    const std::uint64_t num = static_cast<std::uint64_t>(j) * rate;
    const std::uint64_t band = (num + n - 1) / n - 1;
    if (band >= kFftBands) continue;
    sums[band] += mag[j];
    ++counts[band];
  }
  FeatureTensor t;
  t.kind = FeatureKind::fft;
  t.rows = 1;
  t.cols = kFftBands;
  t.data.resize(kFftBands);
  double norm2 = 0.0;
  for (std::size_t b = 0; b < kFftBands; ++b) {
    if (counts[b] > 0) sums[b] /= static_cast<double>(counts[b]);
    norm2 += sums[b] * sums[b];
  }
  const double scale = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 1.0;
  for (std::size_t b = 0; b < kFftBands; ++b) t.data[b] = static_cast<float>(sums[b] * scale);
  return t;
}

std::vector<std::vector<double>> mel_filterbank(std::size_t filters, std::size_t n_fft, double sample_rate,
                                                double f_min, double f_max) {
  const std::size_t bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(filters + 1));
  std::vector<std::vector<double>> bank(filters, std::vector<double>(bins, 0.0));
  for (std::size_t m = 0; m < filters; ++m) {
    const double lo = edges[m];
    const double mid = edges[m + 1];
    const double hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      bank[m][k] = w;
    }
  }
  return bank;
}

FeatureTensor mfcc_feature(std::span<const float> clip) {
  const auto wave = dsp::decimate2(clip);
  static const auto bank = mel_filterbank(kMelFilters, kStftWindow, kFeatureRate, 0.0, kFeatureRate / 2.0);

  // Orthonormal DCT-II basis, first kMfccCoefficients rows.
  static const auto dct = [] {
    std::vector<std::vector<double>> basis(kMfccCoefficients, std::vector<double>(kMelFilters));
    const double n = static_cast<double>(kMelFilters);
    for (std::size_t j = 0; j < kMfccCoefficients; ++j) {
      const double s = j == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      for (std::size_t m = 0; m < kMelFilters; ++m)
        basis[j][m] = s * std::cos(std::numbers::pi * static_cast<double>(j) * (static_cast<double>(m) + 0.5) / n);
    }
    return basis;
  }();

  FeatureTensor t;
  t.kind = FeatureKind::mfcc;
  t.rows = 1 + wave.size() / kMfccHop;
  t.cols = kMfccCoefficients;
  t.data.resize(t.rows * t.cols);
  std::vector<double> power(kStftWindow / 2 + 1);
  std::vector<double> log_mel(kMelFilters);
  stft_frames(wave, kStftWindow, kMfccHop, [&](std::size_t f, std::span<const std::complex<double>> spec) {
    for (std::size_t k = 0; k < spec.size(); ++k) power[k] = std::norm(spec[k]);
    for (std::size_t m = 0; m < kMelFilters; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) e += bank[m][k] * power[k];
      log_mel[m] = std::log(std::max(e, kMfccLogFloor));
    }
    for (std::size_t j = 0; j < kMfccCoefficients; ++j) {
      double c = 0.0;
      for (std::size_t m = 0; m < kMelFilters; ++m) c += dct[j][m] * log_mel[m];
      t.data[f * t.cols + j] = static_cast<float>(c);
    }
  });
  return t;
}

FeatureTensor spectrogram_feature(std::span<const float> clip) {
  FeatureTensor t;
  t.kind = FeatureKind::spectrogram;
  t.rows = kStftWindow / 2 + 1;
  t.cols = 1 + clip.size() / kSpectrogramHop;
  t.data.resize(t.rows * t.cols);
  stft_frames(clip, kStftWindow, kSpectrogramHop, [&](std::size_t f, std::span<const std::complex<double>> spec) {
    for (std::size_t k = 0; k < spec.size(); ++k)
      t.data[k * t.cols + f] = static_cast<float>(std::log1p(std::abs(spec[k])));
  });
  return t;
}

FeatureTensor wavelet_feature(std::span<const float> clip) {
  const auto wave = dsp::decimate2(clip);
  constexpr std::size_t block = std::size_t{1} << kWaveletLevels;
  const std::size_t padded = (wave.size() + block - 1) / block * block;
  std::vector<double> x(padded, 0.0);
  std::copy(wave.begin(), wave.end(), x.begin());
  const auto bands = dsp::wavedec(x, kWaveletLevels);
  FeatureTensor t;
  t.kind = FeatureKind::wavelets;
  t.rows = 1;
  t.cols = padded;
  t.data.reserve(padded);
  for (const auto& band : bands)
    for (double v : band) t.data.push_back(static_cast<float>(v));
  return t;
}

FeatureTensor extract(FeatureKind kind, std::span<const float> clip) {
  switch (kind) {
    case FeatureKind::waveform: return waveform_feature(clip);
    case FeatureKind::fft: return fft_feature(clip);
    case FeatureKind::mfcc: return mfcc_feature(clip);
    case FeatureKind::spectrogram: return spectrogram_feature(clip);
    case FeatureKind::wavelets: return wavelet_feature(clip);
    case FeatureKind::fused: {
      std::vector<FeatureTensor> parts;
      for (auto k : {FeatureKind::waveform, FeatureKind::fft, FeatureKind::mfcc, FeatureKind::spectrogram,
                     FeatureKind::wavelets})
        parts.push_back(extract(k, clip));
      return fuse_concat(parts);
    }
  }
  throw Error(ErrorCode::UnknownFeatureKind, "unknown feature kind");
}

std::pair<std::size_t, std::size_t> canonical_shape(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::waveform: return {1, kWaveformWidth};
    case FeatureKind::fft: return {1, kFftBands};
    case FeatureKind::mfcc: return {kMfccFrames, kMfccCoefficients};
    case FeatureKind::spectrogram: return {kSpectrogramBins, kSpectrogramFrames};
    case FeatureKind::wavelets: return {1, kWaveletWidth};
    case FeatureKind::fused:
      return {1, kWaveformWidth + kFftBands + kMfccFrames * kMfccCoefficients +
                     kSpectrogramBins * kSpectrogramFrames + kWaveletWidth};
  }
  throw Error(ErrorCode::UnknownFeatureKind, "unknown feature kind");
}

FeatureTensor fuse_concat(std::span<const FeatureTensor> parts) {
  if (parts.empty()) throw Error(ErrorCode::EmptyFeatureList, "nothing to fuse");
  FeatureTensor t;
  t.kind = FeatureKind::fused;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.data.size();
  t.data.reserve(total);
  for (const auto& p : parts) t.data.insert(t.data.end(), p.data.begin(), p.data.end());
  t.rows = 1;
  t.cols = total;
  return t;
}

double bandwidth_probe(std::span<const float> clip) {
  constexpr double kBandHz = 500.0;
  constexpr double kRelativeFloor = 1e-4;
  const std::size_t n = clip.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "bandwidth_probe needs at least 2 samples");
  const auto w = dsp::hann_periodic(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = w[i] * clip[i];
  const auto mag = dsp::magnitude_spectrum(x);

  const auto bands = static_cast<std::size_t>(kCanonicalRate / 2.0 / kBandHz);
  std::vector<double> sums(bands, 0.0);
  std::vector<std::size_t> counts(bands, 0);
  for (std::size_t j = 1; j < mag.size(); ++j) {
    const double f = static_cast<double>(j) * kCanonicalRate / static_cast<double>(n);
    const auto b = static_cast<std::size_t>(std::ceil(f / kBandHz)) - 1;
    if (b >= bands) continue;
    sums[b] += mag[j];
    ++counts[b];
  }
  double peak = 0.0;
  for (std::size_t b = 0; b < bands; ++b) {
    if (counts[b] > 0) sums[b] /= static_cast<double>(counts[b]);
    peak = std::max(peak, sums[b]);
  }
  if (peak == 0.0) throw Error(ErrorCode::SilentClip, "clip has no spectral content");
  for (std::size_t b = bands; b-- > 0;)
    if (sums[b] > kRelativeFloor * peak) return kBandHz * static_cast<double>(b + 1);
  return kBandHz;
}

std::vector<std::uint8_t> encode_tensor(const FeatureTensor& tensor) {
  if (tensor.rows * tensor.cols != tensor.data.size())
    throw Error(ErrorCode::ShapeMismatch, "tensor shape does not match data length");
  std::vector<std::uint8_t> out;
  out.reserve(16 + 4 * tensor.data.size());
  for (char c : {'F', 'T', 'N', 'S'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u16(out, static_cast<std::uint16_t>(tensor.kind));
  put_u32(out, static_cast<std::uint32_t>(tensor.rows));
  put_u32(out, static_cast<std::uint32_t>(tensor.cols));
  put_u16(out, 0);
  for (float v : tensor.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "FTNS", 4) != 0)
    throw Error(ErrorCode::MalformedContainer, "missing FTNS header");
  const auto kind = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (kind > static_cast<std::uint16_t>(FeatureKind::fused))
    throw Error(ErrorCode::UnknownFeatureKind, "kind code " + std::to_string(kind));
  FeatureTensor t;
  t.kind = static_cast<FeatureKind>(kind);
  t.rows = get_u32(bytes.data() + 6);
  t.cols = get_u32(bytes.data() + 10);
  const std::size_t count = t.rows * t.cols;
  if (bytes.size() != 16 + 4 * count) throw Error(ErrorCode::MalformedContainer, "FTNS payload size mismatch");
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) t.data[i] = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
  return t;
}

void write_tensor(const std::filesystem::path& path, const FeatureTensor& tensor) {
  const auto bytes = encode_tensor(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

FeatureTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

}  // namespace vac::features

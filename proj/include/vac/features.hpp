#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vac/audio.hpp"

namespace vac::features {

enum class FeatureKind : std::uint16_t {
  waveform = 0,
  fft = 1,
  mfcc = 2,
  spectrogram = 3,
  wavelets = 4,
  fused = 5,
};

std::string_view to_string(FeatureKind kind) noexcept;
std::optional<FeatureKind> parse_kind(std::string_view text) noexcept;

// True for kinds fed to the 2D trunk (mfcc, spectrogram).
bool is_2d(FeatureKind kind) noexcept;

// Row-major real array. 1D kinds have rows == 1.
struct FeatureTensor {
  FeatureKind kind = FeatureKind::waveform;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  std::size_t size() const noexcept { return data.size(); }
};

// Analysis constants.
inline constexpr int kFeatureRate = 24000;        // waveform / mfcc / wavelets operate here
inline constexpr std::size_t kFftBands = 24000;   // 1 Hz bands over (0, 24 kHz]
inline constexpr std::size_t kStftWindow = 2048;
inline constexpr std::size_t kSpectrogramHop = 512;
inline constexpr std::size_t kMfccHop = 558;
inline constexpr std::size_t kMelFilters = 40;
inline constexpr std::size_t kMfccCoefficients = 13;
inline constexpr double kMfccLogFloor = 1e-10;
inline constexpr int kWaveletLevels = 13;

// Canonical-clip shapes.
inline constexpr std::size_t kWaveformWidth = 72000;
inline constexpr std::size_t kMfccFrames = 130;
inline constexpr std::size_t kSpectrogramBins = 1025;
inline constexpr std::size_t kSpectrogramFrames = 282;
inline constexpr std::size_t kWaveletWidth = 73728;

// Extractors accept any mono 48 kHz signal; canonical 3 s clips produce the
// shapes above, longer inputs produce proportionally more frames.
FeatureTensor waveform_feature(std::span<const float> clip);
FeatureTensor fft_feature(std::span<const float> clip);
FeatureTensor mfcc_feature(std::span<const float> clip);
FeatureTensor spectrogram_feature(std::span<const float> clip);
FeatureTensor wavelet_feature(std::span<const float> clip);

FeatureTensor extract(FeatureKind kind, std::span<const float> clip);
inline FeatureTensor extract(FeatureKind kind, const audio::Clip& clip) { return extract(kind, clip.samples); }

// Shape a canonical clip produces for `kind` (fused excluded).
std::pair<std::size_t, std::size_t> canonical_shape(FeatureKind kind);

// Flattens each input row-major and concatenates in order; kind = fused.
FeatureTensor fuse_concat(std::span<const FeatureTensor> parts);

// Highest f (multiple of 500 Hz) whose band (f-500, f] has mean spectral
// magnitude above 1e-4 of the strongest band. Throws SilentClip.
double bandwidth_probe(std::span<const float> clip);

// Binary export: 16-byte header ("FTNS", kind u16, rows u32, cols u32,
// reserved u16) followed by little-endian float32 data.
std::vector<std::uint8_t> encode_tensor(const FeatureTensor& tensor);
FeatureTensor decode_tensor(std::span<const std::uint8_t> bytes);
void write_tensor(const std::filesystem::path& path, const FeatureTensor& tensor);
FeatureTensor read_tensor(const std::filesystem::path& path);

// HTK-scale triangular mel filterbank, rows = filters, cols = n_fft/2 + 1.
std::vector<std::vector<double>> mel_filterbank(std::size_t filters, std::size_t n_fft, double sample_rate,
                                                double f_min, double f_max);

}  // namespace vac::features

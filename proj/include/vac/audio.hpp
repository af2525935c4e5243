#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vac::audio {

inline constexpr int kCanonicalRate = 48000;
inline constexpr double kClipSeconds = 3.0;
inline constexpr std::size_t kClipSamples = 144000;

// Decoded audio. Samples are interleaved when channels == 2.
struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate = kCanonicalRate;
  int channels = 1;

  std::size_t frames() const noexcept {
    return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0;
  }
  double duration() const noexcept {
    return static_cast<double>(frames()) / static_cast<double>(sample_rate);
  }
};

enum class Split { unassigned, train, validation, test };

std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view text);

// A canonical mono 48 kHz, 3-second segment of one source recording.
struct Clip {
  std::vector<float> samples;
  std::string source_id;
  std::size_t chunk_index = 0;
  Split split = Split::unassigned;

  // "<source_id>#<chunk_index>"
  std::string id() const;
};

enum class WavEncoding { pcm16, float32 };

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes);
AudioBuffer load_wav(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buffer, WavEncoding encoding);
void write_wav(const std::filesystem::path& path, const AudioBuffer& buffer, WavEncoding encoding);

// Stereo is averaged per frame; other rates are resampled to 48 kHz.
AudioBuffer to_canonical(const AudioBuffer& buffer);

// floor(N / 144000) clips; the trailing remainder is dropped.
std::vector<Clip> chunk(const AudioBuffer& canonical, std::string_view source_id,
                        Split split = Split::unassigned);

// Convenience: load, canonicalize and chunk one file.
std::vector<Clip> load_clips(const std::filesystem::path& path, std::string_view source_id,
                             Split split = Split::unassigned);

double rms(std::span<const float> samples) noexcept;

// FNV-1a over the raw sample bytes; used to prove set disjointness.
std::uint64_t content_hash(std::span<const float> samples) noexcept;

}  // namespace vac::audio

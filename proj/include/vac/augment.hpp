#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vac/audio.hpp"

namespace vac::augment {

enum class AugmentType : std::size_t { volume = 0, pitch = 1, speed = 2, noise = 3 };
inline constexpr std::size_t kAugmentTypes = 4;

// Parameter ranges of the stochastic recipe.
inline constexpr double kVolumeMinDb = -5.0, kVolumeMaxDb = 5.0;
inline constexpr double kPitchMinSemitones = -0.25, kPitchMaxSemitones = 0.25;
inline constexpr double kSpeedMin = 0.92, kSpeedMax = 1.08;
inline constexpr double kNoiseRatioMin = 0.05, kNoiseRatioMax = 0.20;
inline constexpr double kEpsilonMin = 1e-6, kEpsilonMax = 1e-5;
inline constexpr std::size_t kDefaultAugmentationsPerClip = 8;

struct AugmentationSpec {
  double volume_gain_db = 0.0;
  double pitch_semitones = 0.0;
  double speed_factor = 1.0;
  double noise_ratio = 0.0;  // noise RMS / signal RMS
  std::array<bool, kAugmentTypes> active{};
  // Independent 50% rolls before the "at least one" correction.
  std::array<bool, kAugmentTypes> rolled{};
  std::uint64_t seed = 0;

  bool is_active(AugmentType t) const noexcept { return active[static_cast<std::size_t>(t)]; }
  std::size_t active_count() const noexcept;
};

AugmentationSpec draw_spec(std::uint64_t rng_seed);

// Each op keeps the clip length. The span overloads do the work; the Clip
// overloads copy provenance through.
std::vector<float> change_volume(std::span<const float> clip, double gain_db);
std::vector<float> pitch_shift(std::span<const float> clip, double semitones);
std::vector<float> change_speed(std::span<const float> clip, double factor);
std::vector<float> add_noise(std::span<const float> clip, double ratio, std::uint64_t seed);

audio::Clip change_volume(const audio::Clip& clip, double gain_db);
audio::Clip pitch_shift(const audio::Clip& clip, double semitones);
audio::Clip change_speed(const audio::Clip& clip, double factor);
audio::Clip add_noise(const audio::Clip& clip, double ratio, std::uint64_t seed);

// Phase-vocoder time stretch (2048-point STFT, hop 512). rate > 1 shortens.
std::vector<float> time_stretch(std::span<const float> x, double rate, std::size_t output_length);

// Active ops in the fixed order volume -> pitch -> speed -> noise.
std::vector<float> augment_samples(std::span<const float> clip, const AugmentationSpec& spec);
audio::Clip augment_clip(const audio::Clip& clip, const AugmentationSpec& spec);

// One planned training example: which validation clip to transform, and how.
struct PlannedAugmentation {
  std::size_t source_index = 0;
  std::size_t ordinal = 0;
  AugmentationSpec spec;
};

// Seed for output ordinal i: splitmix64(seed ^ i).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t ordinal) noexcept;

// k specs per validation clip, in clip-major order.
std::vector<PlannedAugmentation> plan_train_set(std::size_t validation_count, std::size_t k, std::uint64_t seed);

struct TrainClip {
  audio::Clip clip;
  std::string source_clip_id;
};

std::vector<TrainClip> build_train_set(std::span<const audio::Clip> validation_clips,
                                       std::size_t k = kDefaultAugmentationsPerClip, std::uint64_t seed = 0);

}  // namespace vac::augment

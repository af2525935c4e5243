#include "vac/augment.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "vac/dsp/fft.hpp"
#include "vac/dsp/resample.hpp"
#include "vac/dsp/window.hpp"
#include "vac/error.hpp"

namespace vac::augment {
namespace {

constexpr std::size_t kVocoderWindow = 2048;
constexpr std::size_t kVocoderHop = 512;

// Uniform double in [0, 1) from the top 53 bits.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

// Pushes a draw away from the identity value by epsilon, staying in range.
double away_from(double value, double identity, double eps, double lo, double hi) {
  const double pushed = value >= identity ? value + eps : value - eps;
  return std::clamp(pushed, lo, hi);
}

void clip_to_unit(std::vector<float>& x) {
  for (float& v : x) v = std::clamp(v, -1.0f, 1.0f);
}

std::size_t reflect_index(std::ptrdiff_t j, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  j %= period;
  if (j < 0) j += period;
  if (j >= static_cast<std::ptrdiff_t>(n)) j = period - j;
  return static_cast<std::size_t>(j);
}

audio::Clip with_samples(const audio::Clip& like, std::vector<float> samples) {
  audio::Clip out;
  out.samples = std::move(samples);
  out.source_id = like.source_id;
  out.chunk_index = like.chunk_index;
  out.split = like.split;
  return out;
}

}  // namespace

std::size_t AugmentationSpec::active_count() const noexcept {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

AugmentationSpec draw_spec(std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  AugmentationSpec spec;
  for (std::size_t t = 0; t < kAugmentTypes; ++t) spec.rolled[t] = unit(rng) < 0.5;
  spec.active = spec.rolled;
  // Fallback pick is drawn unconditionally so the parameter stream below does
  // not depend on the rolls.
  const auto fallback = static_cast<std::size_t>(unit(rng) * kAugmentTypes);
  if (spec.active_count() == 0) spec.active[fallback] = true;

  const double volume = uniform(rng, kVolumeMinDb, kVolumeMaxDb);
  const double volume_eps = uniform(rng, kEpsilonMin, kEpsilonMax);
  const double pitch = uniform(rng, kPitchMinSemitones, kPitchMaxSemitones);
  const double pitch_eps = uniform(rng, kEpsilonMin, kEpsilonMax);
  const double speed = uniform(rng, kSpeedMin, kSpeedMax);
  const double speed_eps = uniform(rng, kEpsilonMin, kEpsilonMax);
  const double noise = uniform(rng, kNoiseRatioMin, kNoiseRatioMax);
  spec.seed = rng();

  if (spec.is_active(AugmentType::volume))
    spec.volume_gain_db = away_from(volume, 0.0, volume_eps, kVolumeMinDb, kVolumeMaxDb);
  if (spec.is_active(AugmentType::pitch))
    spec.pitch_semitones = away_from(pitch, 0.0, pitch_eps, kPitchMinSemitones, kPitchMaxSemitones);
  if (spec.is_active(AugmentType::speed))
    spec.speed_factor = away_from(speed, 1.0, speed_eps, kSpeedMin, kSpeedMax);
  if (spec.is_active(AugmentType::noise)) spec.noise_ratio = noise;
  return spec;
}

std::vector<float> change_volume(std::span<const float> clip, double gain_db) {
  const double scale = std::pow(10.0, gain_db / 20.0);
  std::vector<float> out(clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) out[i] = static_cast<float>(clip[i] * scale);
  clip_to_unit(out);
  return out;
}

std::vector<float> time_stretch(std::span<const float> x, double rate, std::size_t output_length) {
  if (!(rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "stretch rate must be positive");
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "empty signal");
  const std::size_t n_fft = kVocoderWindow;
  const std::size_t hop = kVocoderHop;
  const std::size_t bins = n_fft / 2 + 1;
  const auto window = dsp::hann_periodic(n_fft);
  dsp::RealFft fft(n_fft);

  // Analysis, centered with reflect padding; one extra zero frame at the end.
  const std::size_t frames = 1 + x.size() / hop;
  std::vector<std::vector<std::complex<double>>> stft(frames + 1, std::vector<std::complex<double>>(bins));
  std::vector<double> segment(n_fft);
  const auto half = static_cast<std::ptrdiff_t>(n_fft / 2);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(f * hop) - half;
    for (std::size_t i = 0; i < n_fft; ++i)
      segment[i] = window[i] * x[reflect_index(start + static_cast<std::ptrdiff_t>(i), x.size())];
    fft.forward(segment, stft[f]);
  }

  std::vector<double> advance(bins);
  for (std::size_t k = 0; k < bins; ++k)
    advance[k] = 2.0 * std::numbers::pi * static_cast<double>(hop) * static_cast<double>(k) / static_cast<double>(n_fft);

  std::vector<double> phase(bins);
  for (std::size_t k = 0; k < bins; ++k) phase[k] = std::arg(stft[0][k]);

  // Synthesis by weighted overlap-add.
  std::vector<double> steps;
  for (double t = 0.0; t < static_cast<double>(frames); t += rate) steps.push_back(t);
  const std::size_t full = n_fft + hop * (steps.size() - 1);
  std::vector<double> y(full, 0.0);
  std::vector<double> norm(full, 0.0);
  std::vector<std::complex<double>> frame(bins);
  std::vector<double> time(n_fft);
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const auto i = static_cast<std::size_t>(steps[s]);
    const double a = steps[s] - static_cast<double>(i);
    const auto& left = stft[i];
    const auto& right = stft[i + 1];
    for (std::size_t k = 0; k < bins; ++k) {
      const double mag = (1.0 - a) * std::abs(left[k]) + a * std::abs(right[k]);
      frame[k] = std::polar(mag, phase[k]);
      double dphi = std::arg(right[k]) - std::arg(left[k]) - advance[k];
      dphi -= 2.0 * std::numbers::pi * std::round(dphi / (2.0 * std::numbers::pi));
      phase[k] += advance[k] + dphi;
    }
    frame[0] = {frame[0].real(), 0.0};
    frame[bins - 1] = {frame[bins - 1].real(), 0.0};
    fft.inverse(frame, time);
    const std::size_t offset = s * hop;
    for (std::size_t j = 0; j < n_fft; ++j) {
      y[offset + j] += time[j] * window[j];
      norm[offset + j] += window[j] * window[j];
    }
  }

  std::vector<float> out(output_length, 0.0f);
  const std::size_t first = n_fft / 2;
  for (std::size_t n = 0; n < output_length && first + n < full; ++n) {
    const double w = norm[first + n];
    out[n] = static_cast<float>(w > 1e-10 ? y[first + n] / w : y[first + n]);
  }
  return out;
}

std::vector<float> pitch_shift(std::span<const float> clip, double semitones) {
  if (semitones == 0.0) return {clip.begin(), clip.end()};
  const double rate = std::pow(2.0, -semitones / 12.0);
  const auto stretched_length =
      static_cast<std::size_t>(std::llround(static_cast<double>(clip.size()) / rate));
  const auto stretched = time_stretch(clip, rate, stretched_length);
  auto out = dsp::SincResampler(rate).process(stretched, clip.size());
  clip_to_unit(out);
  return out;
}

std::vector<float> change_speed(std::span<const float> clip, double factor) {
  if (!(factor > 0.0)) throw Error(ErrorCode::InvalidArgument, "speed factor must be positive");
  if (factor == 1.0) return {clip.begin(), clip.end()};
  const auto natural = static_cast<std::size_t>(std::llround(static_cast<double>(clip.size()) / factor));
  auto out = dsp::SincResampler(1.0 / factor).process(clip, natural);
  out.resize(clip.size(), 0.0f);
  clip_to_unit(out);
  return out;
}

std::vector<float> add_noise(std::span<const float> clip, double ratio, std::uint64_t seed) {
  const double signal_rms = audio::rms(clip);
  if (signal_rms == 0.0) throw Error(ErrorCode::SilentClip, "cannot scale noise to a silent clip");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> noise(clip.size());
  double acc = 0.0;
  for (double& v : noise) {
    v = gauss(rng);
    acc += v * v;
  }
  const double noise_rms = std::sqrt(acc / static_cast<double>(noise.size()));
  const double scale = noise_rms > 0.0 ? ratio * signal_rms / noise_rms : 0.0;
  std::vector<float> out(clip.size());
  for (std::size_t i = 0; i < clip.size(); ++i) out[i] = static_cast<float>(clip[i] + scale * noise[i]);
  clip_to_unit(out);
  return out;
}

audio::Clip change_volume(const audio::Clip& clip, double gain_db) {
  return with_samples(clip, change_volume(std::span<const float>(clip.samples), gain_db));
}
audio::Clip pitch_shift(const audio::Clip& clip, double semitones) {
  return with_samples(clip, pitch_shift(std::span<const float>(clip.samples), semitones));
}
audio::Clip change_speed(const audio::Clip& clip, double factor) {
  return with_samples(clip, change_speed(std::span<const float>(clip.samples), factor));
}
audio::Clip add_noise(const audio::Clip& clip, double ratio, std::uint64_t seed) {
  return with_samples(clip, add_noise(std::span<const float>(clip.samples), ratio, seed));
}

std::vector<float> augment_samples(std::span<const float> clip, const AugmentationSpec& spec) {
  std::vector<float> x(clip.begin(), clip.end());
  if (spec.is_active(AugmentType::volume)) x = change_volume(x, spec.volume_gain_db);
  if (spec.is_active(AugmentType::pitch)) x = pitch_shift(x, spec.pitch_semitones);
  if (spec.is_active(AugmentType::speed)) x = change_speed(x, spec.speed_factor);
  if (spec.is_active(AugmentType::noise)) x = add_noise(x, spec.noise_ratio, spec.seed);
  return x;
}

audio::Clip augment_clip(const audio::Clip& clip, const AugmentationSpec& spec) {
  return with_samples(clip, augment_samples(clip.samples, spec));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t ordinal) noexcept {
  std::uint64_t z = (seed ^ ordinal) + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<PlannedAugmentation> plan_train_set(std::size_t validation_count, std::size_t k, std::uint64_t seed) {
  std::vector<PlannedAugmentation> plan;
  plan.reserve(validation_count * k);
  for (std::size_t i = 0; i < validation_count; ++i) {
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t ordinal = i * k + r;
      plan.push_back({i, ordinal, draw_spec(derive_seed(seed, ordinal))});
    }
  }
  return plan;
}

std::vector<TrainClip> build_train_set(std::span<const audio::Clip> validation_clips, std::size_t k,
                                       std::uint64_t seed) {
  if (validation_clips.empty() && k > 0) throw Error(ErrorCode::InvalidArgument, "no validation clips to augment");
  std::vector<TrainClip> out;
  for (const auto& item : plan_train_set(validation_clips.size(), k, seed)) {
    const auto& source = validation_clips[item.source_index];
    TrainClip tc{augment_clip(source, item.spec), source.id()};
    tc.clip.split = audio::Split::train;
    out.push_back(std::move(tc));
  }
  return out;
}

}  // namespace vac::augment

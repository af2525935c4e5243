#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "vac/audio.hpp"
#include "vac/labels.hpp"

namespace vac::synth {

inline constexpr double kMinRpm = 600.0;
inline constexpr double kMaxRpm = 3000.0;

// Class indices follow the label vocabularies in labels.hpp.
struct EngineSpec {
  std::size_t fuel = 0;        // gasoline, diesel
  std::size_t config = 1;      // flat, inline, v
  int cylinders = 4;
  std::size_t aspiration = 0;  // normal, turbo
  std::size_t status = 0;      // normal, misfire
  double rpm = 1500.0;
  std::optional<int> misfire_cylinder;

  // Four-stroke firing rate: rpm / 60 * cylinders / 2.
  double firing_frequency() const noexcept { return rpm / 60.0 * cylinders / 2.0; }
  LabelSet labels() const;
  // Throws InvalidSpec.
  void validate() const;

  static EngineSpec from_labels(const LabelSet& labels, double rpm, std::optional<int> misfire_cylinder = {});
};

// Mono 48 kHz engine recording. Deterministic per (spec, seed).
audio::AudioBuffer synth_engine(const EngineSpec& spec, double duration_seconds, std::uint64_t seed);

struct CorpusOptions {
  double duration_seconds = audio::kClipSeconds;
  double base_rpm = 900.0;
  double rpm_jitter = 0.10;  // uniform +-fraction per sample
  std::size_t threads = 1;
};

// Writes one WAV per requested sample plus manifest.jsonl into out_dir and
// returns the manifest path. Misfiring samples get a random cylinder.
std::filesystem::path synth_corpus(const std::vector<std::pair<LabelSet, std::size_t>>& counts, std::uint64_t seed,
                                   const std::filesystem::path& out_dir, const CorpusOptions& options = {});

// Every valid label combination (2 * 3 * 6 * 2 * 2 = 144), in index order.
std::vector<LabelSet> all_label_combinations();

// `total` samples spread as evenly as possible over all combinations.
std::vector<std::pair<LabelSet, std::size_t>> balanced_counts(std::size_t total);
// Spreads `total` samples evenly over `combos`; the remainder goes to a seeded
// random subset so small corpora still cover every attribute.
std::vector<std::pair<LabelSet, std::size_t>> balanced_counts(std::span<const LabelSet> combos, std::size_t total,
                                                               std::uint64_t seed);

}  // namespace vac::synth

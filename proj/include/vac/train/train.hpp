#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vac/audio.hpp"
#include "vac/features.hpp"
#include "vac/labels.hpp"
#include "vac/models.hpp"
#include "vac/train/manifest.hpp"

namespace vac::train {

// ------------------------------------------------------------------ splits

// Test share of n sources: ceil(n / 5).
std::size_t test_count(std::size_t n) noexcept;

// Assigns every source to validation or test (80/20 by source, stratified
// over label combinations by largest-remainder apportionment). All rows of a
// source share its split. Throws EmptyManifest.
Manifest split_dataset(const Manifest& manifest, std::uint64_t seed);

// ------------------------------------------------------------------ data

struct LabeledClip {
  audio::Clip clip;
  LabelSet labels;
};

struct Example {
  features::FeatureTensor features;
  LabelSet labels;
  std::string clip_id;
  std::uint64_t content_hash = 0;
};

// Loads and chunks every row with the given split.
std::vector<LabeledClip> load_split(const Manifest& manifest, audio::Split split, std::size_t threads = 1);

// Training clips derived from validation clips: k augmentations each when
// `augment`, else the validation clips themselves. `limit`, when set,
// subsamples the result (seeded) to at most that many clips.
std::vector<LabeledClip> make_training_clips(std::span<const LabeledClip> validation, bool augment, std::size_t k,
                                             std::uint64_t seed, std::optional<std::size_t> limit = {},
                                             std::size_t threads = 1);

// Feature extraction with an optional on-disk cache keyed by content hash.
std::vector<Example> featurize(std::span<const LabeledClip> clips, features::FeatureKind kind, std::size_t threads = 1,
                               const std::filesystem::path& cache_dir = {});

// Stacks examples into a [b, 1, ...] network input.
nn::Tensor<float> make_batch(std::span<const Example> examples, std::span<const std::size_t> indices);

// ------------------------------------------------------------------ metrics

struct TaskMetrics {
  std::size_t classes = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  // rows = actual, cols = predicted
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::vector<double>> row_percent;
};

struct MetricsReport {
  std::array<TaskMetrics, kTaskCount> tasks;
  const TaskMetrics& operator[](Task t) const { return tasks[index(t)]; }
};

// Macro averages cover classes with support in `actual`; a class never
// predicted has undefined precision and is left out of the precision mean.
TaskMetrics compute_task_metrics(std::span<const std::size_t> predicted, std::span<const std::size_t> actual,
                                 std::size_t classes);

using Predictions = std::array<std::vector<std::size_t>, kTaskCount>;

// Predictions for every example (argmax, lowest index on ties).
Predictions predict(models::MultiTaskModel<float>& model, std::span<const Example> examples,
                    std::size_t batch_size = 64);

// Scores predictions against labels, skipping masked labels per task.
MetricsReport score(const Predictions& predictions, std::span<const Example> examples);

// Throws EmptySplit.
MetricsReport evaluate(models::MultiTaskModel<float>& model, std::span<const Example> examples,
                       std::size_t batch_size = 64);
MetricsReport evaluate_naive(const models::NaiveBaseline& naive, std::span<const Example> examples);

std::string format_report(const MetricsReport& report);
std::string report_to_json(const MetricsReport& report, int indent = 2);

// ------------------------------------------------------------------ training

struct TrainConfig {
  std::size_t epochs = 100;
  // 0 selects the default: 128, or 64 (parallel) / 32 (cascade) for spectrograms.
  std::size_t batch_size = 0;
  float learning_rate = 1e-3f;
  double dropout_p = 0.5;
  bool augment = true;
  std::size_t k_augment = 8;
  std::uint64_t seed = 0;
  models::Architecture architecture = models::Architecture::parallel;
  features::FeatureKind feature_kind = features::FeatureKind::mfcc;
  models::CascadeMode cascade_mode = models::CascadeMode::soft;
  // Caps the training set (seeded subsample) when set.
  std::optional<std::size_t> train_limit;
  // Validation evaluation cadence in epochs (the final epoch is always evaluated).
  std::size_t eval_every = 1;

  void validate() const;
};

std::size_t effective_batch_size(const TrainConfig& config) noexcept;

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<std::array<double, kTaskCount>> validation_accuracy;
};

struct TrainResult {
  std::unique_ptr<models::MultiTaskModel<float>> model;  // final weights
  nn::Checkpoint final_checkpoint;
  nn::Checkpoint best_checkpoint;  // highest validation misfire accuracy
  std::size_t best_epoch = 0;
  std::vector<EpochLog> epochs;
  std::optional<MetricsReport> final_validation;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Minibatch Adam on the summed multi-task NLL. Throws NonFiniteLoss naming the
// offending batch. Reproducible bit-for-bit for a fixed seed.
TrainResult train_model(const TrainConfig& config, std::span<const Example> train_set,
                        std::span<const Example> validation_set, const EpochCallback& on_epoch = {});

struct PipelineOptions {
  std::size_t threads = 1;
  std::filesystem::path cache_dir;
  // Writes final.ckpt, best.ckpt and epochs.csv when non-empty.
  std::filesystem::path out_dir;
};

// End to end from a split manifest: uses its train rows when present, else
// derives the training set from the validation clips.
TrainResult train(const TrainConfig& config, const Manifest& manifest, const PipelineOptions& options = {},
                  const EpochCallback& on_epoch = {});

std::string epoch_csv_header();
std::string epoch_csv_row(const EpochLog& log);
void write_epoch_csv(const std::filesystem::path& path, std::span<const EpochLog> logs);

// ------------------------------------------------------------------ sweep

struct SweepGrid {
  std::vector<std::size_t> epochs;
  std::vector<float> learning_rates;
  std::vector<double> dropouts;
};

struct SweepRow {
  TrainConfig config;
  MetricsReport validation;
};

// One train + evaluate per grid point; rows sorted by validation misfire
// accuracy, best first (ties keep grid order).
std::vector<SweepRow> sweep(const TrainConfig& base, const SweepGrid& grid, std::span<const Example> train_set,
                            std::span<const Example> validation_set);

std::string format_sweep(std::span<const SweepRow> rows);

}  // namespace vac::train

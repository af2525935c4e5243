#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <json.hpp>
#include <random>
#include <set>

#include "test_support.hpp"
#include "vac/error.hpp"
#include "vac/synth.hpp"
#include "vac/train/train.hpp"

using namespace vac;
using features::FeatureKind;
using vac::testing::TempDir;

namespace {

train::Manifest fake_manifest(std::size_t sources, std::size_t rows_per_source = 1) {
  const auto combos = synth::all_label_combinations();
  train::Manifest m;
  for (std::size_t s = 0; s < sources; ++s)
    for (std::size_t r = 0; r < rows_per_source; ++r) {
      train::ManifestRow row;
      row.file = "/nonexistent/src" + std::to_string(s) + "_" + std::to_string(r) + ".wav";
      row.source_id = "src" + std::to_string(s);
      row.labels = combos[s % 7];
      m.push_back(row);
    }
  return m;
}

std::vector<train::Example> random_examples(std::size_t n, std::uint64_t seed) {
  const auto combos = synth::all_label_combinations();
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  std::vector<train::Example> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& e = out[i];
    e.features.kind = FeatureKind::mfcc;
    std::tie(e.features.rows, e.features.cols) = features::canonical_shape(FeatureKind::mfcc);
    e.features.data.resize(e.features.rows * e.features.cols);
    e.labels = combos[rng() % combos.size()];
    for (std::size_t j = 0; j < e.features.data.size(); ++j)
      e.features.data[j] = d(rng) + 0.5f * static_cast<float>(e.labels[Task::misfire]) * static_cast<float>(j % 13 == 0);
    e.clip_id = "ex" + std::to_string(i) + "#0";
    e.content_hash = i;
  }
  return out;
}

train::TrainConfig small_config() {
  train::TrainConfig c;
  c.epochs = 2;
  c.batch_size = 8;
  c.seed = 3;
  c.augment = false;
  return c;
}

}  // namespace

TEST(Split, EightyTwentyBySource) {
  EXPECT_EQ(train::test_count(286), 58u);
  EXPECT_EQ(train::test_count(5), 1u);
  EXPECT_EQ(train::test_count(1), 1u);
  for (auto [n, t] : {std::pair<std::size_t, std::size_t>{286, 58}, {5, 1}}) {
    const auto split = train::split_dataset(fake_manifest(n), 9);
    std::size_t tests = 0;
    for (const auto& r : split) tests += r.split == audio::Split::test;
    EXPECT_EQ(tests, t);
    EXPECT_EQ(split.size() - tests, n - t);
  }
}

TEST(Split, DeterministicAndConsistentPerSource) {
  const auto m = fake_manifest(40, 3);
  const auto a = train::split_dataset(m, 4), b = train::split_dataset(m, 4), c = train::split_dataset(m, 5);
  std::map<std::string, audio::Split> by_source;
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].split, b[i].split);
    differs |= a[i].split != c[i].split;
    EXPECT_NE(a[i].split, audio::Split::unassigned);
    auto [it, fresh] = by_source.emplace(a[i].source_id, a[i].split);
    if (!fresh) EXPECT_EQ(it->second, a[i].split);
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(std::count_if(by_source.begin(), by_source.end(), [](auto& kv) { return kv.second == audio::Split::test; }),
            8);
}

TEST(Split, EmptyManifestRaises) {
  try {
    train::split_dataset({}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyManifest);
  }
}

TEST(TrainingClips, SizesAndDisjointContent) {
  std::vector<train::LabeledClip> val(3);
  for (std::size_t i = 0; i < val.size(); ++i) {
    val[i].clip.samples = vac::testing::sine(200.0 * static_cast<double>(i + 1), audio::kClipSamples, 48000.0, 0.3);
    val[i].clip.source_id = "v" + std::to_string(i);
    val[i].clip.split = audio::Split::validation;
  }
  const auto plain = train::make_training_clips(val, false, 8, 1);
  ASSERT_EQ(plain.size(), 3u);
  for (const auto& c : plain) EXPECT_EQ(c.clip.split, audio::Split::train);

  const auto aug = train::make_training_clips(val, true, 8, 1);
  ASSERT_EQ(aug.size(), 24u);
  std::set<std::uint64_t> val_hashes;
  for (const auto& v : val) val_hashes.insert(audio::content_hash(v.clip.samples));
  for (const auto& c : aug) EXPECT_FALSE(val_hashes.count(audio::content_hash(c.clip.samples)));

  EXPECT_EQ(train::make_training_clips(val, true, 8, 1, std::size_t{5}).size(), 5u);
  EXPECT_THROW(train::make_training_clips(val, true, 0, 1), Error);
}

TEST(Metrics, WorkedExample) {
  // 30% of 100 positives: always predicting positive.
  std::vector<std::size_t> actual(100, 0), predicted(100, 1);
  for (std::size_t i = 0; i < 30; ++i) actual[i] = 1;
  const auto m = train::compute_task_metrics(predicted, actual, 2);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.3);
  EXPECT_DOUBLE_EQ(m.macro_precision, 0.3);
  EXPECT_DOUBLE_EQ(m.macro_recall, 0.5);
  EXPECT_EQ(m.confusion[0][1], 70u);
  EXPECT_EQ(m.confusion[1][1], 30u);
  EXPECT_DOUBLE_EQ(m.row_percent[0][1], 100.0);
}

TEST(Metrics, PerfectPredictorScoresOne) {
  std::vector<std::size_t> y{0, 1, 2, 2, 1, 0, 5};
  const auto m = train::compute_task_metrics(y, y, 6);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.macro_precision, 1.0);
  EXPECT_EQ(m.macro_recall, 1.0);
}

TEST(Metrics, NaiveAccuracyEqualsModalShare) {
  auto ex = random_examples(60, 2);
  models::NaiveBaseline naive;
  std::vector<LabelSet> labels;
  for (const auto& e : ex) labels.push_back(e.labels);
  naive.fit(labels);
  const auto report = train::evaluate_naive(naive, ex);
  for (Task t : kAllTasks) {
    const auto modal = naive.predict(t);
    const auto hits = std::count_if(ex.begin(), ex.end(), [&](const auto& e) { return e.labels[t] == modal; });
    EXPECT_EQ(report[t].accuracy, static_cast<double>(hits) / 60.0);
  }
  EXPECT_THROW(train::evaluate_naive(naive, {}), Error);
}

TEST(Metrics, JsonCarriesEveryTask) {
  const auto ex = random_examples(20, 3);
  models::NaiveBaseline naive;
  naive.fit(std::vector<LabelSet>{ex[0].labels});
  const auto j = nlohmann::json::parse(train::report_to_json(train::evaluate_naive(naive, ex)));
  for (Task t : kAllTasks) {
    const auto& task = j.at(std::string(short_name(t)));
    EXPECT_EQ(task.at("total").get<std::size_t>(), 20u);
    std::size_t diag = 0;
    const auto& conf = task.at("confusion");
    for (std::size_t i = 0; i < conf.size(); ++i) diag += conf[i][i].get<std::size_t>();
    EXPECT_DOUBLE_EQ(task.at("accuracy").get<double>(), static_cast<double>(diag) / 20.0);
  }
  EXPECT_NE(train::format_report(train::evaluate_naive(naive, ex)).find("misfire"), std::string::npos);
}

TEST(Training, ZeroLearningRateLeavesWeightsUnchanged) {
  const auto ex = random_examples(16, 4);
  auto cfg = small_config();
  cfg.learning_rate = 0.0f;
  const auto result = train::train_model(cfg, ex, {});
  auto fresh = models::build_model<float>({cfg.architecture, cfg.feature_kind, cfg.dropout_p, cfg.cascade_mode, cfg.seed});
  const auto before = models::to_checkpoint(*fresh);
  std::set<std::string> trainable;
  for (auto* p : fresh->parameters())
    if (p->trainable) trainable.insert(p->name);
  ASSERT_EQ(before.tensors.size(), result.final_checkpoint.tensors.size());
  for (std::size_t i = 0; i < before.tensors.size(); ++i)
    if (trainable.count(before.tensors[i].name))
      EXPECT_EQ(before.tensors[i].data, result.final_checkpoint.tensors[i].data) << before.tensors[i].name;
}

TEST(Training, ReproducibleAndLossFalls) {
  const auto ex = random_examples(32, 5);
  auto cfg = small_config();
  cfg.epochs = 4;
  const auto a = train::train_model(cfg, ex, ex);
  const auto b = train::train_model(cfg, ex, ex);
  ASSERT_EQ(a.epochs.size(), 4u);
  for (std::size_t i = 0; i < a.epochs.size(); ++i) EXPECT_EQ(a.epochs[i].train_loss, b.epochs[i].train_loss);
  EXPECT_EQ(nn::encode_checkpoint(a.final_checkpoint), nn::encode_checkpoint(b.final_checkpoint));
  EXPECT_LT(a.epochs.back().train_loss, a.epochs.front().train_loss);
  ASSERT_TRUE(a.final_validation.has_value());
  EXPECT_GE(a.best_epoch, 1u);
}

TEST(Training, EvalCadence) {
  const auto ex = random_examples(16, 6);
  auto cfg = small_config();
  cfg.epochs = 5;
  cfg.eval_every = 2;
  const auto r = train::train_model(cfg, ex, ex);
  std::vector<bool> evaluated;
  for (const auto& e : r.epochs) evaluated.push_back(e.validation_accuracy.has_value());
  EXPECT_EQ(evaluated, (std::vector<bool>{false, true, false, true, true}));
}

TEST(Training, NonFiniteLossNamesTheBatch) {
  auto ex = random_examples(16, 7);
  ex[3].features.data[5] = std::numeric_limits<float>::quiet_NaN();
  try {
    train::train_model(small_config(), ex, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST(Training, InvalidConfigurations) {
  const auto ex = random_examples(4, 8);
  auto bad = small_config();
  bad.epochs = 0;
  EXPECT_THROW(train::train_model(bad, ex, {}), Error);
  bad = small_config();
  bad.dropout_p = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = small_config();
  bad.feature_kind = FeatureKind::fft;
  EXPECT_THROW(train::train_model(bad, ex, {}), Error);
}

TEST(Training, BatchSizeDefaults) {
  train::TrainConfig c;
  EXPECT_EQ(train::effective_batch_size(c), 128u);
  c.feature_kind = FeatureKind::spectrogram;
  EXPECT_EQ(train::effective_batch_size(c), 64u);
  c.architecture = models::Architecture::cascade;
  EXPECT_EQ(train::effective_batch_size(c), 32u);
  c.batch_size = 7;
  EXPECT_EQ(train::effective_batch_size(c), 7u);
}

TEST(Training, EpochCsv) {
  EXPECT_EQ(train::epoch_csv_header(), "epoch,train_loss,acc_fuel,acc_config,acc_cyl,acc_turbo,acc_misfire");
  train::EpochLog log{3, 1.5, std::array<double, kTaskCount>{1, 0.5, 0.25, 0.125, 0}};
  EXPECT_EQ(train::epoch_csv_row(log), "3,1.500000,1.000000,0.500000,0.250000,0.125000,0.000000");
}

TEST(Sweep, SinglePointMatchesDirectTraining) {
  const auto ex = random_examples(8, 9);
  auto cfg = small_config();
  cfg.epochs = 10;
  const auto rows = train::sweep(cfg, {{10}, {1e-3f}, {0.5}}, ex, ex);
  ASSERT_EQ(rows.size(), 1u);
  auto direct = train::train_model(cfg, ex, ex);
  const auto report = train::evaluate(*direct.model, ex);
  for (Task t : kAllTasks) EXPECT_EQ(rows[0].validation[t].accuracy, report[t].accuracy);
}

TEST(Sweep, GridProductSortedAndDuplicatesAgree) {
  const auto ex = random_examples(8, 10);
  const auto rows = train::sweep(small_config(), {{10, 10}, {1e-3f, 1e-2f}, {0.5}}, ex, ex);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i)
    EXPECT_GE(rows[i - 1].validation[Task::misfire].accuracy, rows[i].validation[Task::misfire].accuracy);
  std::map<float, std::vector<double>> by_lr;
  for (const auto& r : rows) by_lr[r.config.learning_rate].push_back(r.validation[Task::misfire].accuracy);
  for (auto& [lr, accs] : by_lr) {
    ASSERT_EQ(accs.size(), 2u);
    EXPECT_EQ(accs[0], accs[1]);
  }
  EXPECT_FALSE(train::format_sweep(rows).empty());
}

TEST(Pipeline, SmallCorpusEndToEnd) {
  TempDir dir;
  const auto combos = synth::all_label_combinations();
  std::vector<std::pair<LabelSet, std::size_t>> counts;
  for (std::size_t i = 0; i < 10; ++i) counts.emplace_back(combos[i * 13], 1);
  const auto manifest_path = synth::synth_corpus(counts, 11, dir / "corpus");
  const auto manifest = train::split_dataset(train::read_manifest(manifest_path), 11);

  auto cfg = small_config();
  cfg.augment = true;
  cfg.k_augment = 1;
  train::PipelineOptions opts;
  opts.out_dir = dir / "run";
  opts.cache_dir = dir / "cache";
  const auto r = train::train(cfg, manifest, opts);
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "final.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "best.ckpt"));
  std::ifstream csv(dir / "run" / "epochs.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, train::epoch_csv_header());
  EXPECT_FALSE(std::filesystem::is_empty(dir / "cache"));

  const auto restored = models::from_checkpoint(nn::read_checkpoint(dir / "run" / "final.ckpt"));
  EXPECT_EQ(restored->descriptor(), r.model->descriptor());

  // A second run reads features back from the cache and reproduces the weights.
  const auto again = train::train(cfg, manifest, opts);
  EXPECT_EQ(nn::encode_checkpoint(again.final_checkpoint), nn::encode_checkpoint(r.final_checkpoint));
}

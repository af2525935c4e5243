#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vac/augment.hpp"
#include "vac/error.hpp"
#include "vac/features.hpp"
#include "vac/models.hpp"
#include "vac/nn/checkpoint.hpp"
#include "vac/synth.hpp"
#include "vac/train/manifest.hpp"
#include "vac/train/train.hpp"

namespace fs = std::filesystem;
using namespace vac;

namespace {

// Bad input detected before any work starts; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  int verbosity = 0;
};

Globals g;

void info(const std::string& msg) {
  if (g.verbosity >= 0) std::cerr << msg << "\n";
}
void debug(const std::string& msg) {
  if (g.verbosity >= 1) std::cerr << msg << "\n";
}

features::FeatureKind feature_arg(const std::string& text) {
  auto kind = features::parse_kind(text);
  if (!kind) throw UsageError("unknown feature kind '" + text + "'");
  return *kind;
}

std::vector<std::size_t> class_filter(Task t, const std::vector<std::string>& values) {
  std::vector<std::size_t> out;
  for (const auto& v : values) {
    auto cls = parse_class(t, v);
    if (!cls) throw UsageError("invalid " + std::string(manifest_key(t)) + " value '" + v + "'");
    out.push_back(*cls);
  }
  return out;
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
  std::size_t count = 0;
  std::string out;
  std::array<std::vector<std::string>, kTaskCount> only;
  synth::CorpusOptions corpus;
};

int run_synth(const SynthArgs& a) {
  std::array<std::vector<std::size_t>, kTaskCount> allowed;
  for (Task t : kAllTasks) allowed[index(t)] = class_filter(t, a.only[index(t)]);
  if (a.count == 0) throw UsageError("--count must be positive");
  if (a.corpus.duration_seconds < audio::kClipSeconds) throw UsageError("--duration must be at least 3 seconds");
  if (!(a.corpus.base_rpm >= synth::kMinRpm && a.corpus.base_rpm <= synth::kMaxRpm))
    throw UsageError("--base-rpm must lie in [600, 3000]");
  if (!(a.corpus.rpm_jitter >= 0.0 && a.corpus.rpm_jitter < 1.0)) throw UsageError("--rpm-jitter must lie in [0, 1)");

  std::vector<LabelSet> combos;
  for (const auto& c : synth::all_label_combinations()) {
    bool keep = true;
    for (Task t : kAllTasks) {
      const auto& allow = allowed[index(t)];
      if (!allow.empty() && std::find(allow.begin(), allow.end(), c[t]) == allow.end()) keep = false;
    }
    if (keep) combos.push_back(c);
  }
  if (combos.empty()) throw UsageError("the attribute filters exclude every label combination");

  auto opts = a.corpus;
  opts.threads = g.threads;
  const auto manifest = synth::synth_corpus(synth::balanced_counts(combos, a.count, g.seed), g.seed, a.out, opts);
  std::cout << "wrote " << a.count << " recordings and " << manifest.string() << "\n";
  return 0;
}

// ------------------------------------------------------------------ prepare

struct PrepareArgs {
  std::string manifest;
  std::string out;
  std::size_t k_augment = 8;
  bool no_augment = false;
};

int run_prepare(const PrepareArgs& a) {
  if (!a.no_augment && a.k_augment == 0) throw UsageError("--k-augment must be at least 1 when augmentation is on");
  const auto manifest = train::split_dataset(train::read_manifest(a.manifest), g.seed);
  const auto validation = train::load_split(manifest, audio::Split::validation, g.threads);
  if (validation.empty()) throw Error(ErrorCode::EmptySplit, "no validation clips after splitting");
  const auto clips =
      train::make_training_clips(validation, !a.no_augment, a.k_augment, g.seed, std::nullopt, g.threads);

  const fs::path out(a.out);
  fs::create_directories(out / "train");
  train::Manifest rows;
  for (const auto& row : manifest)
    if (row.split != audio::Split::train) rows.push_back(row);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "train_%06zu.wav", i);
    const fs::path file = out / "train" / name;
    audio::AudioBuffer buf;
    buf.samples = clips[i].clip.samples;
    audio::write_wav(file, buf, audio::WavEncoding::float32);
    train::ManifestRow row;
    row.file = file;
    row.source_id = clips[i].clip.id() + (a.no_augment ? "~copy" : "~aug") + std::to_string(i);
    row.labels = clips[i].labels;
    row.split = audio::Split::train;
    rows.push_back(std::move(row));
  }
  train::write_manifest(out / "manifest.jsonl", rows);

  std::size_t sources_val = 0, sources_test = 0;
  std::vector<std::string> seen;
  for (const auto& row : manifest) {
    if (std::find(seen.begin(), seen.end(), row.source_id) != seen.end()) continue;
    seen.push_back(row.source_id);
    (row.split == audio::Split::test ? sources_test : sources_val) += 1;
  }
  std::cout << "validation sources " << sources_val << ", test sources " << sources_test << ", validation clips "
            << validation.size() << ", train clips " << clips.size() << "\n"
            << "manifest " << (out / "manifest.jsonl").string() << "\n";
  return 0;
}

// ------------------------------------------------------------------ train / sweep

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string cache_dir;
  std::string arch = "parallel";
  std::string feature = "mfcc";
  std::string cascade_mode = "soft";
  std::size_t epochs = 100;
  std::size_t batch_size = 0;
  float lr = 1e-3f;
  double dropout = 0.5;
  std::size_t k_augment = 8;
  bool no_augment = false;
  std::size_t limit = 0;
  std::size_t eval_every = 1;
};

train::TrainConfig make_config(const TrainArgs& a) {
  train::TrainConfig c;
  auto arch = models::parse_architecture(a.arch);
  if (!arch) throw UsageError("unknown architecture '" + a.arch + "'");
  auto mode = models::parse_cascade_mode(a.cascade_mode);
  if (!mode) throw UsageError("unknown cascade mode '" + a.cascade_mode + "'");
  c.architecture = *arch;
  c.cascade_mode = *mode;
  c.feature_kind = feature_arg(a.feature);
  c.epochs = a.epochs;
  c.batch_size = a.batch_size;
  c.learning_rate = a.lr;
  c.dropout_p = a.dropout;
  c.augment = !a.no_augment;
  c.k_augment = a.k_augment;
  c.seed = g.seed;
  if (a.limit > 0) c.train_limit = a.limit;
  c.eval_every = a.eval_every;
  try {
    c.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return c;
}

void log_epoch(const train::EpochLog& log) {
  std::string line = "epoch " + std::to_string(log.epoch) + " loss " + std::to_string(log.train_loss);
  if (log.validation_accuracy) {
    for (Task t : kAllTasks)
      line += " " + std::string(short_name(t)) + " " + std::to_string((*log.validation_accuracy)[index(t)]);
  }
  info(line);
}

int run_train(const TrainArgs& a) {
  const auto config = make_config(a);
  const auto manifest = train::read_manifest(a.manifest);
  info("effective batch size " + std::to_string(train::effective_batch_size(config)));
  train::PipelineOptions opts{g.threads, a.cache_dir, a.out};
  const auto result = train::train(config, manifest, opts, log_epoch);
  if (result.final_validation) std::cout << train::format_report(*result.final_validation);
  if (!a.out.empty())
    std::cout << "checkpoints in " << a.out << " (best epoch " << result.best_epoch << ")\n";
  return 0;
}

struct SweepArgs {
  TrainArgs base;
  std::vector<std::size_t> epochs{10};
  std::vector<float> lrs{1e-3f};
  std::vector<double> dropouts{0.5};
};

int run_sweep(const SweepArgs& a) {
  const auto config = make_config(a.base);
  const auto manifest = train::read_manifest(a.base.manifest);
  const auto validation = train::load_split(manifest, audio::Split::validation, g.threads);
  if (validation.empty()) throw Error(ErrorCode::EmptySplit, "manifest has no validation clips");
  auto train_clips = train::load_split(manifest, audio::Split::train, g.threads);
  if (train_clips.empty())
    train_clips = train::make_training_clips(validation, config.augment, config.k_augment, config.seed,
                                             config.train_limit, g.threads);
  const auto tr = train::featurize(train_clips, config.feature_kind, g.threads, a.base.cache_dir);
  const auto va = train::featurize(validation, config.feature_kind, g.threads, a.base.cache_dir);
  train::SweepGrid grid{a.epochs, a.lrs, a.dropouts};
  std::vector<train::SweepRow> rows;
  try {
    rows = train::sweep(config, grid, tr, va);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw UsageError(e.what());
    throw;
  }
  std::cout << train::format_sweep(rows);
  return 0;
}

// ------------------------------------------------------------------ eval

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string feature;
  std::string cache_dir;
  bool json = false;
  bool naive = false;
};

int run_eval(const EvalArgs& a) {
  audio::Split split;
  try {
    split = audio::parse_split(a.split);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto ckpt = nn::read_checkpoint(a.checkpoint);
  const auto config = models::parse_descriptor(ckpt.descriptor);
  if (!a.feature.empty()) {
    const auto requested = feature_arg(a.feature);
    if (requested != config.feature)
      throw UsageError("checkpoint was trained on " + std::string(features::to_string(config.feature)) +
                       " features but --feature is " + std::string(features::to_string(requested)));
  }
  const auto manifest = train::read_manifest(a.manifest);
  const auto clips = train::load_split(manifest, split, g.threads);
  const auto examples = train::featurize(clips, config.feature, g.threads, a.cache_dir);

  train::MetricsReport report;
  if (a.naive) {
    std::vector<LabelSet> labels;
    for (const auto& c : train::load_split(manifest, audio::Split::validation, g.threads)) labels.push_back(c.labels);
    models::NaiveBaseline naive;
    naive.fit(labels);
    report = train::evaluate_naive(naive, examples);
  } else {
    auto model = models::from_checkpoint(ckpt);
    report = train::evaluate(*model, examples);
  }
  if (a.json)
    std::cout << train::report_to_json(report) << "\n";
  else
    std::cout << train::format_report(report);
  return 0;
}

// ------------------------------------------------------------------ probe

int run_probe(const std::string& wav) {
  const auto buffer = audio::to_canonical(audio::load_wav(wav));
  const double cutoff = features::bandwidth_probe(buffer.samples);
  std::cout << "cutoff " << cutoff << " Hz" << (cutoff >= 23500.0 ? " (full band)" : " (attenuated)") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicle engine audio classification toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat key=value file; subcommand keys are written as <subcommand>.<option>");
  bool seed_given = false;
  app.add_option("--seed", g.seed, "Seed for every randomized step")->each([&](const std::string&) { seed_given = true; });
  app.add_option("--threads", g.threads, "Worker threads for synthesis and feature extraction")
      ->check(CLI::Range(std::size_t{1}, std::size_t{256}));
  app.add_flag("-v,--verbose", [](std::int64_t n) { g.verbosity += static_cast<int>(n); }, "More logging");
  app.add_flag("-q,--quiet", [](std::int64_t) { g.verbosity = -1; }, "Only print results and errors");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic engine corpus");
  synth->add_option("--count", synth_args.count, "Number of recordings")->required();
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  for (Task t : kAllTasks)
    synth->add_option("--" + std::string(manifest_key(t)), synth_args.only[index(t)],
                      "Restrict to these " + std::string(manifest_key(t)) + " classes");
  synth->add_option("--duration", synth_args.corpus.duration_seconds, "Seconds per recording");
  synth->add_option("--base-rpm", synth_args.corpus.base_rpm, "Nominal engine speed");
  synth->add_option("--rpm-jitter", synth_args.corpus.rpm_jitter, "Uniform relative rpm spread");

  PrepareArgs prepare_args;
  auto* prepare = app.add_subcommand("prepare", "Split a manifest and build the training set");
  prepare->add_option("--manifest", prepare_args.manifest, "Input manifest")->required()->check(CLI::ExistingFile);
  prepare->add_option("--out", prepare_args.out, "Output directory")->required();
  prepare->add_option("--k-augment", prepare_args.k_augment, "Augmented copies per validation clip");
  prepare->add_flag("--no-augment", prepare_args.no_augment, "Train on the validation clips themselves");

  TrainArgs train_args;
  const auto add_train_options = [](CLI::App* cmd, TrainArgs& a) {
    cmd->add_option("--manifest", a.manifest, "Split manifest")->required()->check(CLI::ExistingFile);
    cmd->add_option("--cache-dir", a.cache_dir, "Feature cache directory");
    cmd->add_option("--arch", a.arch, "parallel or cascade");
    cmd->add_option("--feature", a.feature, "waveform, fft, mfcc, spectrogram or wavelets");
    cmd->add_option("--cascade-mode", a.cascade_mode, "soft, detached or oracle");
    cmd->add_option("--batch-size", a.batch_size, "0 picks the default for the feature kind");
    cmd->add_option("--k-augment", a.k_augment, "Augmented copies per validation clip");
    cmd->add_flag("--no-augment", a.no_augment, "Train on the validation clips themselves");
    cmd->add_option("--limit", a.limit, "Cap on training clips (0 keeps all)");
  };
  auto* train = app.add_subcommand("train", "Train a model");
  add_train_options(train, train_args);
  train->add_option("--out", train_args.out, "Directory for checkpoints and the epoch log");
  train->add_option("--epochs", train_args.epochs, "Training epochs");
  train->add_option("--lr", train_args.lr, "Adam learning rate");
  train->add_option("--dropout", train_args.dropout, "Dropout probability");
  train->add_option("--eval-every", train_args.eval_every, "Validation cadence in epochs");

  SweepArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Grid search over epochs, learning rate and dropout");
  add_train_options(sweep, sweep_args.base);
  sweep->add_option("--epochs", sweep_args.epochs, "Epoch grid")->delimiter(',');
  sweep->add_option("--lr", sweep_args.lrs, "Learning-rate grid")->delimiter(',');
  sweep->add_option("--dropout", sweep_args.dropouts, "Dropout grid")->delimiter(',');

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on one split");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", eval_args.manifest, "Split manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", eval_args.split, "train, validation or test");
  eval->add_option("--feature", eval_args.feature, "Expected feature kind (must match the checkpoint)");
  eval->add_option("--cache-dir", eval_args.cache_dir, "Feature cache directory");
  eval->add_flag("--json", eval_args.json, "Machine-readable output");
  eval->add_flag("--naive", eval_args.naive, "Score the modal-class baseline fitted on validation labels");

  std::string probe_wav;
  auto* probe = app.add_subcommand("probe", "Estimate the bandwidth of a recording");
  probe->add_option("wav", probe_wav, "WAV file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const bool randomized = synth->parsed() || prepare->parsed() || train->parsed() || sweep->parsed();
  if (randomized) std::cerr << "seed " << g.seed << (seed_given ? "" : " (default)") << "\n";
  debug("threads " + std::to_string(g.threads));

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (prepare->parsed()) return run_prepare(prepare_args);
    if (train->parsed()) return run_train(train_args);
    if (sweep->parsed()) return run_sweep(sweep_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (probe->parsed()) return run_probe(probe_wav);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidSpec ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

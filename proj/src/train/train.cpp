#include "vac/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "vac/augment.hpp"
#include "vac/error.hpp"
#include "vac/nn/loss.hpp"
#include "vac/parallel.hpp"

namespace vac::train {
namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Fisher-Yates with an explicit draw so the order is stable across standard libraries.
template <typename V>
void shuffle(V& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(unit(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::size_t> subsample(std::size_t n, std::size_t limit, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit >= n) return idx;
  std::mt19937_64 rng(augment::derive_seed(seed, 0x5EED5EEDULL));
  shuffle(idx, rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::size_t argmax_row(const nn::Tensor<float>& m, std::size_t row) {
  const std::size_t k = m.dim(1);
  const float* p = m.data.data() + row * k;
  return static_cast<std::size_t>(std::max_element(p, p + k) - p);
}

}  // namespace

// ------------------------------------------------------------------ splits

std::size_t test_count(std::size_t n) noexcept { return (n + 4) / 5; }

Manifest split_dataset(const Manifest& manifest, std::uint64_t seed) {
  // Source ids in sorted order, each with the label key of its first row.
  std::map<std::string, std::string> source_key;
  for (const auto& row : manifest) {
    if (row.split == audio::Split::train) continue;
    source_key.emplace(row.source_id, row.labels.combination_key());
  }
  if (source_key.empty()) throw Error(ErrorCode::EmptyManifest, "manifest has no sources to split");

  std::map<std::string, std::vector<std::string>> strata;
  for (const auto& [source, key] : source_key) strata[key].push_back(source);

  const std::size_t n = source_key.size();
  const std::size_t total_test = test_count(n);
  struct Quota {
    std::string key;
    std::size_t count;
    double remainder;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  for (const auto& [key, sources] : strata) {
    const double exact = static_cast<double>(total_test) * static_cast<double>(sources.size()) / static_cast<double>(n);
    const auto whole = static_cast<std::size_t>(std::floor(exact));
    quotas.push_back({key, whole, exact - static_cast<double>(whole)});
    assigned += whole;
  }
  std::vector<std::size_t> order(quotas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return quotas[a].remainder > quotas[b].remainder; });
  for (std::size_t i = 0; assigned < total_test; ++i, ++assigned) ++quotas[order[i % order.size()]].count;

  std::mt19937_64 rng(seed);
  std::map<std::string, audio::Split> split_of;
  for (const auto& q : quotas) {
    auto sources = strata[q.key];
    shuffle(sources, rng);
    for (std::size_t i = 0; i < sources.size(); ++i)
      split_of[sources[i]] = i < q.count ? audio::Split::test : audio::Split::validation;
  }

  Manifest out = manifest;
  for (auto& row : out)
    if (row.split != audio::Split::train) row.split = split_of.at(row.source_id);
  return out;
}

// ------------------------------------------------------------------ data

std::vector<LabeledClip> load_split(const Manifest& manifest, audio::Split split, std::size_t threads) {
  std::vector<const ManifestRow*> rows;
  for (const auto& row : manifest)
    if (row.split == split) rows.push_back(&row);
  std::vector<std::vector<LabeledClip>> per_row(rows.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    for (auto& clip : audio::load_clips(rows[i]->file, rows[i]->source_id, split))
      per_row[i].push_back({std::move(clip), rows[i]->labels});
  });
  std::vector<LabeledClip> out;
  for (auto& group : per_row)
    for (auto& c : group) out.push_back(std::move(c));
  return out;
}

std::vector<LabeledClip> make_training_clips(std::span<const LabeledClip> validation, bool augment_on, std::size_t k,
                                             std::uint64_t seed, std::optional<std::size_t> limit,
                                             std::size_t threads) {
  if (!augment_on) {
    std::vector<LabeledClip> out;
    for (std::size_t i : subsample(validation.size(), limit.value_or(validation.size()), seed)) {
      out.push_back(validation[i]);
      out.back().clip.split = audio::Split::train;
    }
    return out;
  }
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "augmentation needs k >= 1");
  const auto plan = augment::plan_train_set(validation.size(), k, seed);
  const auto chosen = subsample(plan.size(), limit.value_or(plan.size()), seed);
  std::vector<LabeledClip> out(chosen.size());
  parallel_for(chosen.size(), threads, [&](std::size_t i) {
    const auto& item = plan[chosen[i]];
    const auto& source = validation[item.source_index];
    out[i].clip = augment::augment_clip(source.clip, item.spec);
    out[i].clip.split = audio::Split::train;
    out[i].labels = source.labels;
  });
  return out;
}

std::vector<Example> featurize(std::span<const LabeledClip> clips, features::FeatureKind kind, std::size_t threads,
                               const std::filesystem::path& cache_dir) {
  if (!cache_dir.empty()) std::filesystem::create_directories(cache_dir);
  std::vector<Example> out(clips.size());
  parallel_for(clips.size(), threads, [&](std::size_t i) {
    const auto& c = clips[i];
    auto& e = out[i];
    e.labels = c.labels;
    e.clip_id = c.clip.id();
    e.content_hash = audio::content_hash(c.clip.samples);
    if (cache_dir.empty()) {
      e.features = features::extract(kind, c.clip);
      return;
    }
    const auto path = cache_dir / (hex64(e.content_hash) + "." + std::string(features::to_string(kind)) + ".ftns");
    if (std::filesystem::exists(path)) {
      e.features = features::read_tensor(path);
      if (e.features.kind == kind) return;
    }
    e.features = features::extract(kind, c.clip);
    const auto tmp = path.string() + ".tmp" + std::to_string(i);
    features::write_tensor(tmp, e.features);
    std::filesystem::rename(tmp, path);
  });
  return out;
}

nn::Tensor<float> make_batch(std::span<const Example> examples, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  const auto& first = examples[indices[0]].features;
  std::vector<std::size_t> shape{indices.size()};
  for (auto d : models::input_shape(first)) shape.push_back(d);
  nn::Tensor<float> x(shape);
  const std::size_t per = first.size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& f = examples[indices[i]].features;
    if (f.size() != per || f.kind != first.kind)
      throw Error(ErrorCode::ShapeMismatch, "examples in a batch must share feature kind and shape");
    std::copy(f.data.begin(), f.data.end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return x;
}

// ------------------------------------------------------------------ metrics

TaskMetrics compute_task_metrics(std::span<const std::size_t> predicted, std::span<const std::size_t> actual,
                                 std::size_t classes) {
  if (predicted.size() != actual.size()) throw Error(ErrorCode::ShapeMismatch, "prediction and label counts differ");
  TaskMetrics m;
  m.classes = classes;
  m.total = actual.size();
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  m.row_percent.assign(classes, std::vector<double>(classes, 0.0));
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] >= classes || predicted[i] >= classes)
      throw Error(ErrorCode::InvalidArgument, "class index out of range");
    ++m.confusion[actual[i]][predicted[i]];
  }
  std::size_t trace = 0;
  double recall_sum = 0.0, precision_sum = 0.0;
  std::size_t recall_n = 0, precision_n = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    trace += m.confusion[c][c];
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      row += m.confusion[c][j];
      col += m.confusion[j][c];
    }
    if (row == 0) continue;  // absent from the split
    for (std::size_t j = 0; j < classes; ++j)
      m.row_percent[c][j] = 100.0 * static_cast<double>(m.confusion[c][j]) / static_cast<double>(row);
    recall_sum += static_cast<double>(m.confusion[c][c]) / static_cast<double>(row);
    ++recall_n;
    if (col > 0) {
      precision_sum += static_cast<double>(m.confusion[c][c]) / static_cast<double>(col);
      ++precision_n;
    }
  }
  m.accuracy = m.total ? static_cast<double>(trace) / static_cast<double>(m.total) : 0.0;
  m.macro_recall = recall_n ? recall_sum / static_cast<double>(recall_n) : 0.0;
  m.macro_precision = precision_n ? precision_sum / static_cast<double>(precision_n) : 0.0;
  return m;
}

Predictions predict(models::MultiTaskModel<float>& model, std::span<const Example> examples, std::size_t batch_size) {
  Predictions out;
  for (auto& v : out) v.reserve(examples.size());
  batch_size = std::max<std::size_t>(batch_size, 1);
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t end = std::min(examples.size(), start + batch_size);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    std::vector<LabelSet> labels;
    for (auto i : idx) labels.push_back(examples[i].labels);
    const auto logp = model.forward(make_batch(examples, idx), nn::Mode::eval, labels);
    for (Task t : kAllTasks)
      for (std::size_t r = 0; r < idx.size(); ++r) out[index(t)].push_back(argmax_row(logp[index(t)], r));
  }
  return out;
}

MetricsReport score(const Predictions& predictions, std::span<const Example> examples) {
  MetricsReport report;
  for (Task t : kAllTasks) {
    std::vector<std::size_t> pred, actual;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      if (!examples[i].labels.has(t)) continue;
      pred.push_back(predictions[index(t)].at(i));
      actual.push_back(examples[i].labels[t]);
    }
    report.tasks[index(t)] = compute_task_metrics(pred, actual, class_count(t));
  }
  return report;
}

MetricsReport evaluate(models::MultiTaskModel<float>& model, std::span<const Example> examples,
                       std::size_t batch_size) {
  if (examples.empty()) throw Error(ErrorCode::EmptySplit, "no examples to evaluate");
  return score(predict(model, examples, batch_size), examples);
}

MetricsReport evaluate_naive(const models::NaiveBaseline& naive, std::span<const Example> examples) {
  if (examples.empty()) throw Error(ErrorCode::EmptySplit, "no examples to evaluate");
  Predictions p;
  for (Task t : kAllTasks) p[index(t)].assign(examples.size(), naive.predict(t));
  return score(p, examples);
}

std::string format_report(const MetricsReport& report) {
  std::ostringstream s;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %9s %9s %9s %7s\n", "task", "accuracy", "macro_p", "macro_r", "n");
  s << line;
  for (Task t : kAllTasks) {
    const auto& m = report[t];
    std::snprintf(line, sizeof line, "%-8s %9.4f %9.4f %9.4f %7zu\n", std::string(short_name(t)).c_str(), m.accuracy,
                  m.macro_precision, m.macro_recall, m.total);
    s << line;
  }
  for (Task t : kAllTasks) {
    const auto& m = report[t];
    s << "\nconfusion " << short_name(t) << " (rows actual, cols predicted; count / row %)\n";
    std::snprintf(line, sizeof line, "%10s", "");
    s << line;
    for (std::size_t j = 0; j < m.classes; ++j) {
      std::snprintf(line, sizeof line, " %16s", std::string(class_name(t, j)).c_str());
      s << line;
    }
    s << "\n";
    for (std::size_t i = 0; i < m.classes; ++i) {
      std::snprintf(line, sizeof line, "%10s", std::string(class_name(t, i)).c_str());
      s << line;
      for (std::size_t j = 0; j < m.classes; ++j) {
        std::snprintf(line, sizeof line, " %7zu /%6.1f%%", m.confusion[i][j], m.row_percent[i][j]);
        s << line;
      }
      s << "\n";
    }
  }
  return s.str();
}

std::string report_to_json(const MetricsReport& report, int indent) {
  nlohmann::json j = nlohmann::json::object();
  for (Task t : kAllTasks) {
    const auto& m = report[t];
    nlohmann::json task;
    task["accuracy"] = m.accuracy;
    task["macro_precision"] = m.macro_precision;
    task["macro_recall"] = m.macro_recall;
    task["total"] = m.total;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < m.classes; ++c) names.emplace_back(class_name(t, c));
    task["classes"] = names;
    task["confusion"] = m.confusion;
    task["row_percent"] = m.row_percent;
    j[std::string(short_name(t))] = task;
  }
  return j.dump(indent);
}

// ------------------------------------------------------------------ training

void TrainConfig::validate() const {
  const auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidArgument, why); };
  if (epochs == 0) fail("epochs must be positive");
  if (!(learning_rate >= 0.0f) || !std::isfinite(learning_rate)) fail("learning rate must be finite and >= 0");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout must be in [0, 1)");
  if (augment && k_augment == 0) fail("k_augment must be positive when augmentation is on");
  if (eval_every == 0) fail("eval_every must be positive");
  if (train_limit && *train_limit == 0) fail("train_limit must be positive");
}

std::size_t effective_batch_size(const TrainConfig& config) noexcept {
  if (config.batch_size > 0) return config.batch_size;
  if (config.feature_kind == features::FeatureKind::spectrogram)
    return config.architecture == models::Architecture::cascade ? 32 : 64;
  return 128;
}

TrainResult train_model(const TrainConfig& config, std::span<const Example> train_set,
                        std::span<const Example> validation_set, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw Error(ErrorCode::EmptySplit, "training set is empty");
  for (const auto& e : train_set)
    if (e.features.kind != config.feature_kind)
      throw Error(ErrorCode::InvalidArgument, "training features are " + std::string(features::to_string(e.features.kind)) +
                                                  ", config expects " +
                                                  std::string(features::to_string(config.feature_kind)));

  TrainResult result;
  result.model = models::build_model<float>(
      {config.architecture, config.feature_kind, config.dropout_p, config.cascade_mode, config.seed});
  auto& model = *result.model;
  nn::Adam optimizer(model.parameters(), nn::AdamConfig{config.learning_rate});
  const std::size_t batch = effective_batch_size(config);
  const std::size_t n = train_set.size();
  double best = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.seed + epoch);
    shuffle(order, rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(batch, n - start));
      std::vector<LabelSet> labels;
      for (auto i : idx) labels.push_back(train_set[i].labels);
      const auto out = model.forward(make_batch(train_set, idx), nn::Mode::train, labels);

      models::TaskOutputs<float> grads;
      double total = 0.0;
      for (Task t : kAllTasks) {
        std::vector<std::size_t> targets(idx.size(), 0);
        std::unique_ptr<bool[]> present(new bool[idx.size()]());
        bool any = false;
        for (std::size_t r = 0; r < idx.size(); ++r) {
          if (!labels[r].has(t)) continue;
          targets[r] = labels[r][t];
          present[r] = true;
          any = true;
        }
        if (!any) continue;
        const auto& lp = out[index(t)];
        bool finite = lp.all_finite();
        if (finite) {
          auto loss = nn::nll_loss<float>(lp, targets, std::span<const bool>(present.get(), idx.size()));
          total += loss.loss;
          grads[index(t)] = std::move(loss.grad);
        } else {
          total = std::numeric_limits<double>::quiet_NaN();
        }
      }
      if (!std::isfinite(total)) {
        std::string ids;
        for (std::size_t r = 0; r < std::min<std::size_t>(idx.size(), 4); ++r)
          ids += (r ? ", " : "") + train_set[idx[r]].clip_id;
        throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches) +
                                                  " (first clips: " + ids + ")");
      }
      model.zero_grad();
      model.backward(grads);
      optimizer.step();
      loss_sum += total;
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(batches);
    if (!validation_set.empty() && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      auto report = evaluate(model, validation_set);
      std::array<double, kTaskCount> acc{};
      for (Task t : kAllTasks) acc[index(t)] = report[t].accuracy;
      log.validation_accuracy = acc;
      if (acc[index(Task::misfire)] > best) {
        best = acc[index(Task::misfire)];
        result.best_epoch = epoch;
        result.best_checkpoint = models::to_checkpoint(model, &optimizer);
      }
      if (epoch == config.epochs) result.final_validation = std::move(report);
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  result.final_checkpoint = models::to_checkpoint(model, &optimizer);
  if (result.best_epoch == 0) {
    result.best_epoch = config.epochs;
    result.best_checkpoint = result.final_checkpoint;
  }
  return result;
}

TrainResult train(const TrainConfig& config, const Manifest& manifest, const PipelineOptions& options,
                  const EpochCallback& on_epoch) {
  config.validate();
  const auto validation = load_split(manifest, audio::Split::validation, options.threads);
  if (validation.empty()) throw Error(ErrorCode::EmptySplit, "manifest has no validation sources");
  auto prepared = load_split(manifest, audio::Split::train, options.threads);
  std::vector<LabeledClip> train_clips;
  if (prepared.empty()) {
    train_clips = make_training_clips(validation, config.augment, config.k_augment, config.seed, config.train_limit,
                                      options.threads);
  } else {
    for (std::size_t i : subsample(prepared.size(), config.train_limit.value_or(prepared.size()), config.seed))
      train_clips.push_back(std::move(prepared[i]));
  }
  const auto train_examples = featurize(train_clips, config.feature_kind, options.threads, options.cache_dir);
  const auto val_examples = featurize(validation, config.feature_kind, options.threads, options.cache_dir);
  auto result = train_model(config, train_examples, val_examples, on_epoch);
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    nn::write_checkpoint(options.out_dir / "final.ckpt", result.final_checkpoint);
    nn::write_checkpoint(options.out_dir / "best.ckpt", result.best_checkpoint);
    write_epoch_csv(options.out_dir / "epochs.csv", result.epochs);
  }
  return result;
}

std::string epoch_csv_header() { return "epoch,train_loss,acc_fuel,acc_config,acc_cyl,acc_turbo,acc_misfire"; }

std::string epoch_csv_row(const EpochLog& log) {
  std::string s = std::to_string(log.epoch) + "," + format_fixed(log.train_loss, 6);
  for (Task t : kAllTasks) {
    s += ",";
    if (log.validation_accuracy) s += format_fixed((*log.validation_accuracy)[index(t)], 6);
  }
  return s;
}

void write_epoch_csv(const std::filesystem::path& path, std::span<const EpochLog> logs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << epoch_csv_header() << "\n";
  for (const auto& log : logs) out << epoch_csv_row(log) << "\n";
}

// ------------------------------------------------------------------ sweep

std::vector<SweepRow> sweep(const TrainConfig& base, const SweepGrid& grid, std::span<const Example> train_set,
                            std::span<const Example> validation_set) {
  if (grid.epochs.empty() || grid.learning_rates.empty() || grid.dropouts.empty())
    throw Error(ErrorCode::InvalidArgument, "sweep grid has an empty axis");
  for (auto e : grid.epochs)
    if (e < 10 || e > 100) throw Error(ErrorCode::InvalidArgument, "sweep epochs must lie in [10, 100]");
  for (auto lr : grid.learning_rates)
    if (!(lr >= 1e-4f && lr <= 1e-1f)) throw Error(ErrorCode::InvalidArgument, "sweep learning rate must lie in [1e-4, 0.1]");
  for (auto d : grid.dropouts)
    if (!(d >= 0.0 && d <= 0.75)) throw Error(ErrorCode::InvalidArgument, "sweep dropout must lie in [0, 0.75]");
  if (validation_set.empty()) throw Error(ErrorCode::EmptySplit, "sweep needs validation examples");

  std::vector<SweepRow> rows;
  for (auto e : grid.epochs)
    for (auto lr : grid.learning_rates)
      for (auto d : grid.dropouts) {
        TrainConfig c = base;
        c.epochs = e;
        c.learning_rate = lr;
        c.dropout_p = d;
        c.eval_every = e;
        auto result = train_model(c, train_set, validation_set);
        rows.push_back({c, evaluate(*result.model, validation_set)});
      }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.validation[Task::misfire].accuracy > b.validation[Task::misfire].accuracy;
  });
  return rows;
}

std::string format_sweep(std::span<const SweepRow> rows) {
  std::ostringstream s;
  char line[200];
  std::snprintf(line, sizeof line, "%6s %10s %8s %9s %9s %9s %9s %9s\n", "epochs", "lr", "dropout", "fuel", "config",
                "cyl", "turbo", "misfire");
  s << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%6zu %10.6g %8.3f %9.4f %9.4f %9.4f %9.4f %9.4f\n", r.config.epochs,
                  static_cast<double>(r.config.learning_rate), r.config.dropout_p, r.validation[Task::fuel].accuracy,
                  r.validation[Task::config].accuracy, r.validation[Task::cylinders].accuracy,
                  r.validation[Task::aspiration].accuracy, r.validation[Task::misfire].accuracy);
    s << line;
  }
  return s.str();
}

}  // namespace vac::train

#include "vac/models.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "vac/error.hpp"

namespace vac::models {
namespace {

using features::FeatureKind;
using nn::LayerSpec;

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void check_kind(FeatureKind kind) {
  if (static_cast<std::uint16_t>(kind) > static_cast<std::uint16_t>(FeatureKind::fused))
    throw Error(ErrorCode::UnknownFeatureKind, "feature kind code " + std::to_string(static_cast<int>(kind)));
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
nn::Tensor<T> slice_columns(const nn::Tensor<T>& m, std::size_t begin, std::size_t count) {
  const std::size_t b = m.dim(0), w = m.dim(1);
  nn::Tensor<T> out({b, count});
  for (std::size_t n = 0; n < b; ++n)
    std::copy_n(m.data.begin() + static_cast<std::ptrdiff_t>(n * w + begin), count,
                out.data.begin() + static_cast<std::ptrdiff_t>(n * count));
  return out;
}

template <typename T>
void add_into(nn::Tensor<T>& acc, const nn::Tensor<T>& g) {
  if (acc.empty()) {
    acc = g;
    return;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

}  // namespace

std::string_view to_string(Architecture a) noexcept {
  return a == Architecture::parallel ? "parallel" : "cascade";
}

std::string_view to_string(CascadeMode m) noexcept {
  switch (m) {
    case CascadeMode::soft: return "soft";
    case CascadeMode::detached: return "detached";
    case CascadeMode::oracle: return "oracle";
  }
  return "soft";
}

std::optional<Architecture> parse_architecture(std::string_view text) noexcept {
  if (text == "parallel") return Architecture::parallel;
  if (text == "cascade") return Architecture::cascade;
  return std::nullopt;
}

std::optional<CascadeMode> parse_cascade_mode(std::string_view text) noexcept {
  if (text == "soft") return CascadeMode::soft;
  if (text == "detached") return CascadeMode::detached;
  if (text == "oracle" || text == "oracle-labels") return CascadeMode::oracle;
  return std::nullopt;
}

std::vector<LayerSpec> build_trunk(FeatureKind kind, double dropout_p) {
  check_kind(kind);
  std::vector<LayerSpec> specs;
  if (features::is_2d(kind)) {
    const std::size_t k = kind == FeatureKind::mfcc ? 2 : 3;
    std::size_t in = 1;
    for (std::size_t out : kTrunk2dChannels) {
      specs.push_back(LayerSpec::conv2d(in, out, k, k).without_bias());
      specs.push_back(LayerSpec::maxpool2d(2, 2));
      specs.push_back(LayerSpec::batchnorm(out));
      specs.push_back(LayerSpec::relu());
      specs.push_back(LayerSpec::dropout(dropout_p));
      in = out;
    }
  } else {
    std::size_t in = 1;
    for (std::size_t i = 0; i < kTrunk1dChannels.size(); ++i) {
      const std::size_t out = kTrunk1dChannels[i];
      specs.push_back((i == 0 ? LayerSpec::conv1d(in, out, 80, 4) : LayerSpec::conv1d(in, out, 3)).without_bias());
      specs.push_back(LayerSpec::maxpool1d(4));
      specs.push_back(LayerSpec::batchnorm(out));
      specs.push_back(LayerSpec::relu());
      specs.push_back(LayerSpec::dropout(dropout_p));
      in = out;
    }
  }
  specs.push_back(LayerSpec::global_avg_pool());
  return specs;
}

std::size_t trunk_width(FeatureKind kind) {
  check_kind(kind);
  return features::is_2d(kind) ? kTrunk2dChannels.back() : kTrunk1dChannels.back();
}

std::vector<std::size_t> input_shape(const features::FeatureTensor& t) {
  if (features::is_2d(t.kind)) return {1, t.rows, t.cols};
  return {1, t.rows * t.cols};
}

std::vector<LayerSpec> head_specs(std::size_t in_features, std::size_t classes) {
  return {LayerSpec::linear(in_features, classes), LayerSpec::log_softmax()};
}

// ------------------------------------------------------------------ base

template <typename T>
std::string MultiTaskModel<T>::descriptor() const {
  std::ostringstream s;
  s << "vac-model 1\n";
  s << "architecture=" << to_string(config_.architecture) << "\n";
  s << "feature=" << features::to_string(config_.feature) << "\n";
  s << "dropout=" << format_double(config_.dropout_p) << "\n";
  if (config_.architecture == Architecture::cascade) s << "cascade_mode=" << to_string(config_.cascade_mode) << "\n";
  s << topology();
  return s.str();
}

template <typename T>
std::size_t MultiTaskModel<T>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters())
    if (p->trainable) n += p->value.size();
  return n;
}

template <typename T>
void MultiTaskModel<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T(0));
}

// ------------------------------------------------------------------ parallel

template <typename T>
ParallelModel<T>::ParallelModel(const ModelConfig& config, std::array<Task, kTaskCount> head_order)
    : MultiTaskModel<T>(config),
      order_(head_order),
      trunk_(build_trunk(config.feature, config.dropout_p), "trunk", mix(config.seed, 100)) {
  const std::size_t w = trunk_width(config.feature);
  for (Task t : order_)
    heads_[index(t)] = nn::Sequential<T>(head_specs(w, class_count(t)), "head." + std::string(short_name(t)),
                                         mix(config.seed, 200 + index(t)));
}

template <typename T>
TaskOutputs<T> ParallelModel<T>::forward(const nn::Tensor<T>& x, nn::Mode mode, std::span<const LabelSet>) {
  const auto emb = trunk_.forward(x, mode);
  TaskOutputs<T> out;
  for (Task t : order_) out[index(t)] = heads_[index(t)].forward(emb, mode);
  return out;
}

template <typename T>
void ParallelModel<T>::backward(const TaskOutputs<T>& grads) {
  nn::Tensor<T> d_emb;
  for (Task t : order_) {
    const auto& g = grads[index(t)];
    if (g.empty()) continue;
    add_into(d_emb, heads_[index(t)].backward(g));
  }
  if (!d_emb.empty()) trunk_.backward(d_emb);
}

template <typename T>
std::vector<nn::Parameter<T>*> ParallelModel<T>::parameters() {
  auto out = trunk_.parameters();
  for (Task t : order_)
    for (auto* p : heads_[index(t)].parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::string ParallelModel<T>::topology() const {
  std::string s = "trunk: " + trunk_.describe() + "\n";
  for (Task t : kAllTasks) s += "head." + std::string(short_name(t)) + ": " + heads_[index(t)].describe() + "\n";
  return s;
}

// ------------------------------------------------------------------ cascade

template <typename T>
CascadeModel<T>::CascadeModel(const ModelConfig& config)
    : MultiTaskModel<T>(config),
      trunk1_(build_trunk(config.feature, config.dropout_p), "stage1.trunk", mix(config.seed, 300)),
      trunk2_(build_trunk(config.feature, config.dropout_p), "stage2.trunk", mix(config.seed, 400)),
      misfire_head_(head_specs(trunk_width(config.feature) + kCascadeWidth, class_count(Task::misfire)),
                    "stage2.head.misfire", mix(config.seed, 500)) {
  const std::size_t w = trunk_width(config.feature);
  for (std::size_t i = 0; i < kAttributeTaskCount; ++i) {
    const Task t = kAllTasks[i];
    heads1_[i] = nn::Sequential<T>(head_specs(w, class_count(t)), "stage1.head." + std::string(short_name(t)),
                                   mix(config.seed, 600 + i));
  }
}

template <typename T>
nn::Tensor<T> CascadeModel<T>::stage2_forward(const nn::Tensor<T>& x, const nn::Tensor<T>& cascaded, nn::Mode mode) {
  const auto emb = trunk2_.forward(x, mode);
  const std::size_t b = emb.dim(0), w = emb.dim(1);
  if (cascaded.rank() != 2 || cascaded.dim(0) != b || cascaded.dim(1) != kCascadeWidth)
    throw Error(ErrorCode::ShapeMismatch, "cascaded input must be [b,13], got " + nn::shape_string(cascaded.shape));
  nn::Tensor<T> z({b, w + kCascadeWidth});
  for (std::size_t n = 0; n < b; ++n) {
    std::copy_n(emb.data.begin() + static_cast<std::ptrdiff_t>(n * w), w,
                z.data.begin() + static_cast<std::ptrdiff_t>(n * (w + kCascadeWidth)));
    std::copy_n(cascaded.data.begin() + static_cast<std::ptrdiff_t>(n * kCascadeWidth), kCascadeWidth,
                z.data.begin() + static_cast<std::ptrdiff_t>(n * (w + kCascadeWidth) + w));
  }
  return misfire_head_.forward(z, mode);
}

template <typename T>
TaskOutputs<T> CascadeModel<T>::forward(const nn::Tensor<T>& x, nn::Mode mode, std::span<const LabelSet> labels) {
  TaskOutputs<T> out;
  const auto emb1 = trunk1_.forward(x, mode);
  batch_ = emb1.dim(0);
  for (std::size_t i = 0; i < kAttributeTaskCount; ++i) out[i] = heads1_[i].forward(emb1, mode);

  cascaded_ = nn::Tensor<T>({batch_, kCascadeWidth});
  if (this->config_.cascade_mode == CascadeMode::oracle) {
    if (labels.size() != batch_)
      throw Error(ErrorCode::ShapeMismatch, "oracle cascade mode needs one label set per example");
    for (std::size_t n = 0; n < batch_; ++n) {
      std::size_t offset = 0;
      for (std::size_t i = 0; i < kAttributeTaskCount; ++i) {
        const Task t = kAllTasks[i];
        if (labels[n].has(t)) cascaded_[n * kCascadeWidth + offset + labels[n][t]] = T(1);
        offset += class_count(t);
      }
    }
  } else {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < kAttributeTaskCount; ++i) {
      const std::size_t k = class_count(kAllTasks[i]);
      for (std::size_t n = 0; n < batch_; ++n)
        std::copy_n(out[i].data.begin() + static_cast<std::ptrdiff_t>(n * k), k,
                    cascaded_.data.begin() + static_cast<std::ptrdiff_t>(n * kCascadeWidth + offset));
      offset += k;
    }
  }
  out[index(Task::misfire)] = stage2_forward(x, cascaded_, mode);
  return out;
}

template <typename T>
void CascadeModel<T>::backward(const TaskOutputs<T>& grads) {
  std::array<nn::Tensor<T>, kAttributeTaskCount> attr;
  for (std::size_t i = 0; i < kAttributeTaskCount; ++i) attr[i] = grads[i];

  const auto& g_misfire = grads[index(Task::misfire)];
  if (!g_misfire.empty()) {
    const auto dz = misfire_head_.backward(g_misfire);
    const std::size_t w = dz.dim(1) - kCascadeWidth;
    trunk2_.backward(slice_columns(dz, 0, w));
    if (this->config_.cascade_mode == CascadeMode::soft) {
      std::size_t offset = w;
      for (std::size_t i = 0; i < kAttributeTaskCount; ++i) {
        const std::size_t k = class_count(kAllTasks[i]);
        add_into(attr[i], slice_columns(dz, offset, k));
        offset += k;
      }
    }
  }

  nn::Tensor<T> d_emb1;
  for (std::size_t i = 0; i < kAttributeTaskCount; ++i) {
    if (attr[i].empty()) continue;
    add_into(d_emb1, heads1_[i].backward(attr[i]));
  }
  if (!d_emb1.empty()) trunk1_.backward(d_emb1);
}

template <typename T>
std::vector<nn::Parameter<T>*> CascadeModel<T>::stage1_parameters() {
  auto out = trunk1_.parameters();
  for (auto& h : heads1_)
    for (auto* p : h.parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<nn::Parameter<T>*> CascadeModel<T>::stage2_parameters() {
  auto out = trunk2_.parameters();
  for (auto* p : misfire_head_.parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::vector<nn::Parameter<T>*> CascadeModel<T>::parameters() {
  auto out = stage1_parameters();
  for (auto* p : stage2_parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::string CascadeModel<T>::topology() const {
  std::string s = "stage1.trunk: " + trunk1_.describe() + "\n";
  for (std::size_t i = 0; i < kAttributeTaskCount; ++i)
    s += "stage1.head." + std::string(short_name(kAllTasks[i])) + ": " + heads1_[i].describe() + "\n";
  s += "stage2.trunk: " + trunk2_.describe() + "\n";
  s += "stage2.head.misfire: " + misfire_head_.describe() + "\n";
  return s;
}

template <typename T>
TaskOutputs<T> forward_cascade(CascadeModel<T>& model, const nn::Tensor<T>& x, CascadeMode mode, nn::Mode nn_mode,
                               std::span<const LabelSet> labels) {
  const CascadeMode saved = model.mode();
  model.set_mode(mode);
  try {
    auto out = model.forward(x, nn_mode, labels);
    model.set_mode(saved);
    return out;
  } catch (...) {
    model.set_mode(saved);
    throw;
  }
}

template <typename T>
std::unique_ptr<MultiTaskModel<T>> build_model(const ModelConfig& config) {
  if (config.architecture == Architecture::parallel) return std::make_unique<ParallelModel<T>>(config);
  return std::make_unique<CascadeModel<T>>(config);
}

template class MultiTaskModel<float>;
template class MultiTaskModel<double>;
template class ParallelModel<float>;
template class ParallelModel<double>;
template class CascadeModel<float>;
template class CascadeModel<double>;
template std::unique_ptr<MultiTaskModel<float>> build_model<float>(const ModelConfig&);
template std::unique_ptr<MultiTaskModel<double>> build_model<double>(const ModelConfig&);
template TaskOutputs<float> forward_cascade<float>(CascadeModel<float>&, const nn::Tensor<float>&, CascadeMode,
                                                   nn::Mode, std::span<const LabelSet>);
template TaskOutputs<double> forward_cascade<double>(CascadeModel<double>&, const nn::Tensor<double>&, CascadeMode,
                                                     nn::Mode, std::span<const LabelSet>);

// ------------------------------------------------------------------ persistence

ModelConfig parse_descriptor(std::string_view descriptor) {
  std::istringstream in{std::string(descriptor)};
  std::string line;
  if (!std::getline(in, line) || line != "vac-model 1")
    throw Error(ErrorCode::CheckpointMismatch, "unrecognized model descriptor");
  ModelConfig c;
  bool have_arch = false, have_feature = false;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "architecture") {
      const auto a = parse_architecture(value);
      if (!a) throw Error(ErrorCode::CheckpointMismatch, "unknown architecture '" + value + "'");
      c.architecture = *a;
      have_arch = true;
    } else if (key == "feature") {
      const auto k = features::parse_kind(value);
      if (!k) throw Error(ErrorCode::UnknownFeatureKind, "unknown feature kind '" + value + "'");
      c.feature = *k;
      have_feature = true;
    } else if (key == "dropout") {
      c.dropout_p = std::strtod(value.c_str(), nullptr);
    } else if (key == "cascade_mode") {
      const auto m = parse_cascade_mode(value);
      if (!m) throw Error(ErrorCode::CheckpointMismatch, "unknown cascade mode '" + value + "'");
      c.cascade_mode = *m;
    }
  }
  if (!have_arch || !have_feature) throw Error(ErrorCode::CheckpointMismatch, "descriptor lacks architecture or feature");
  return c;
}

nn::Checkpoint to_checkpoint(MultiTaskModel<float>& model, const nn::Adam* optimizer) {
  nn::Checkpoint c;
  c.descriptor = model.descriptor();
  for (auto* p : model.parameters()) c.tensors.push_back({p->name, p->value.shape, p->value.data});
  if (optimizer) {
    nn::OptimizerRecord o;
    o.steps = optimizer->steps();
    o.learning_rate = optimizer->config().learning_rate;
    o.beta1 = optimizer->config().beta1;
    o.beta2 = optimizer->config().beta2;
    o.eps = optimizer->config().eps;
    for (const auto& s : optimizer->slots()) {
      o.m.push_back(s.m);
      o.v.push_back(s.v);
      o.v_max.push_back(s.v_max);
    }
    c.optimizer = std::move(o);
  }
  return c;
}

void load_parameters(MultiTaskModel<float>& model, const nn::Checkpoint& ckpt) {
  std::map<std::string, const nn::TensorRecord*> by_name;
  for (const auto& t : ckpt.tensors) by_name[t.name] = &t;
  const auto params = model.parameters();
  if (params.size() != ckpt.tensors.size())
    throw Error(ErrorCode::CheckpointMismatch, "checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                                                   " tensors, model expects " + std::to_string(params.size()));
  for (auto* p : params) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) throw Error(ErrorCode::CheckpointMismatch, "checkpoint lacks " + p->name);
    if (it->second->shape != p->value.shape)
      throw Error(ErrorCode::CheckpointMismatch, "shape of " + p->name + " differs");
    p->value.data = it->second->data;
  }
}

std::unique_ptr<MultiTaskModel<float>> from_checkpoint(const nn::Checkpoint& ckpt) {
  auto model = build_model<float>(parse_descriptor(ckpt.descriptor));
  if (model->descriptor() != ckpt.descriptor)
    throw Error(ErrorCode::CheckpointMismatch, "checkpoint topology does not match a rebuilt model");
  load_parameters(*model, ckpt);
  return model;
}

void NaiveBaseline::fit(std::span<const LabelSet> labels) {
  if (labels.empty()) throw Error(ErrorCode::EmptyLabelSet, "cannot fit the naive baseline on no labels");
  for (Task t : kAllTasks) {
    std::vector<std::size_t> counts(class_count(t), 0);
    for (const auto& l : labels)
      if (l.has(t)) ++counts[l[t]];
    // max_element returns the first maximum, i.e. the lowest class index on ties.
    modal_[index(t)] = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }
}

}  // namespace vac::models

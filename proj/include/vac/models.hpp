#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vac/features.hpp"
#include "vac/labels.hpp"
#include "vac/nn/adam.hpp"
#include "vac/nn/checkpoint.hpp"
#include "vac/nn/layers.hpp"

namespace vac::models {

enum class Architecture { parallel, cascade };

// soft: gradients flow through the cascaded attribute log-probabilities.
// detached: the same values, treated as constants by backprop.
// oracle: one-hot ground-truth attributes replace the predictions.
enum class CascadeMode { soft, detached, oracle };

std::string_view to_string(Architecture a) noexcept;
std::string_view to_string(CascadeMode m) noexcept;
std::optional<Architecture> parse_architecture(std::string_view text) noexcept;
std::optional<CascadeMode> parse_cascade_mode(std::string_view text) noexcept;

inline constexpr std::array<std::size_t, 4> kTrunk1dChannels{128, 128, 256, 512};
inline constexpr std::array<std::size_t, 3> kTrunk2dChannels{32, 64, 128};

// 1D kinds: four conv -> maxpool(4) -> batchnorm -> relu -> dropout blocks,
// the first with kernel 80 / stride 4, the rest kernel 3. 2D kinds: three
// blocks with 2x2 (mfcc) or 3x3 (spectrogram) kernels and 2x2 pooling. Both
// finish with global average pooling. Throws UnknownFeatureKind.
std::vector<nn::LayerSpec> build_trunk(features::FeatureKind kind, double dropout_p = 0.5);
std::size_t trunk_width(features::FeatureKind kind);

// Shape of one example as the network sees it: [1, w] for 1D kinds and
// [1, rows, cols] for 2D kinds (the batch dimension is prepended).
std::vector<std::size_t> input_shape(const features::FeatureTensor& t);

template <typename T>
using TaskOutputs = std::array<nn::Tensor<T>, kTaskCount>;

struct ModelConfig {
  Architecture architecture = Architecture::parallel;
  features::FeatureKind feature = features::FeatureKind::mfcc;
  double dropout_p = 0.5;
  CascadeMode cascade_mode = CascadeMode::soft;
  std::uint64_t seed = 0;
};

// Shared interface of the Parallel and Cascade classifiers. Outputs are the
// five per-task log-probability matrices [b, classes].
template <typename T>
class MultiTaskModel {
 public:
  virtual ~MultiTaskModel() = default;

  // `labels` supplies the one-hot attributes in oracle cascade mode and is
  // ignored otherwise.
  virtual TaskOutputs<T> forward(const nn::Tensor<T>& x, nn::Mode mode, std::span<const LabelSet> labels = {}) = 0;
  // Gradients w.r.t. each output of the latest forward; an empty tensor
  // stands for zero.
  virtual void backward(const TaskOutputs<T>& grads) = 0;
  virtual std::vector<nn::Parameter<T>*> parameters() = 0;

  const ModelConfig& config() const noexcept { return config_; }
  // Canonical, self-describing architecture text stored in checkpoints.
  std::string descriptor() const;
  std::size_t parameter_count();
  void zero_grad();

 protected:
  explicit MultiTaskModel(const ModelConfig& config) : config_(config) {}
  virtual std::string topology() const = 0;
  ModelConfig config_;
};

// Linear + log-softmax head.
std::vector<nn::LayerSpec> head_specs(std::size_t in_features, std::size_t classes);

template <typename T>
class ParallelModel final : public MultiTaskModel<T> {
 public:
  // Heads may be listed in any order; names follow the task, not the position.
  explicit ParallelModel(const ModelConfig& config,
                         std::array<Task, kTaskCount> head_order = kAllTasks);

  TaskOutputs<T> forward(const nn::Tensor<T>& x, nn::Mode mode, std::span<const LabelSet> labels = {}) override;
  void backward(const TaskOutputs<T>& grads) override;
  std::vector<nn::Parameter<T>*> parameters() override;

  nn::Sequential<T>& trunk() { return trunk_; }
  nn::Sequential<T>& head(Task t) { return heads_[index(t)]; }

 protected:
  std::string topology() const override;

 private:
  std::array<Task, kTaskCount> order_;
  nn::Sequential<T> trunk_;
  std::array<nn::Sequential<T>, kTaskCount> heads_;
};

// Stage 1: trunk + four attribute heads. Stage 2: an independent trunk whose
// embedding is concatenated with the 13 cascaded attribute values before the
// misfire head.
template <typename T>
class CascadeModel final : public MultiTaskModel<T> {
 public:
  explicit CascadeModel(const ModelConfig& config);

  TaskOutputs<T> forward(const nn::Tensor<T>& x, nn::Mode mode, std::span<const LabelSet> labels = {}) override;
  void backward(const TaskOutputs<T>& grads) override;
  std::vector<nn::Parameter<T>*> parameters() override;

  CascadeMode mode() const noexcept { return this->config_.cascade_mode; }
  void set_mode(CascadeMode m) noexcept { this->config_.cascade_mode = m; }

  // The [b, 13] vector the latest forward fed into stage 2.
  const nn::Tensor<T>& cascaded() const noexcept { return cascaded_; }

  // Stage 2 alone with an explicit cascaded vector [b, 13].
  nn::Tensor<T> stage2_forward(const nn::Tensor<T>& x, const nn::Tensor<T>& cascaded, nn::Mode mode);

  std::vector<nn::Parameter<T>*> stage1_parameters();
  std::vector<nn::Parameter<T>*> stage2_parameters();
  nn::Sequential<T>& stage2_trunk() { return trunk2_; }
  nn::Sequential<T>& misfire_head() { return misfire_head_; }

 protected:
  std::string topology() const override;

 private:
  nn::Sequential<T> trunk1_;
  std::array<nn::Sequential<T>, kAttributeTaskCount> heads1_;
  nn::Sequential<T> trunk2_;
  nn::Sequential<T> misfire_head_;
  nn::Tensor<T> cascaded_;
  std::size_t batch_ = 0;
};

template <typename T>
std::unique_ptr<MultiTaskModel<T>> build_model(const ModelConfig& config);

template <typename T>
inline std::unique_ptr<ParallelModel<T>> build_parallel(features::FeatureKind kind, double dropout_p = 0.5,
                                                         std::uint64_t seed = 0) {
  return std::make_unique<ParallelModel<T>>(ModelConfig{Architecture::parallel, kind, dropout_p, CascadeMode::soft, seed});
}

template <typename T>
inline std::unique_ptr<CascadeModel<T>> build_cascade(features::FeatureKind kind, double dropout_p = 0.5,
                                                       CascadeMode mode = CascadeMode::soft, std::uint64_t seed = 0) {
  return std::make_unique<CascadeModel<T>>(ModelConfig{Architecture::cascade, kind, dropout_p, mode, seed});
}

// Forward with an explicit cascade mode (restores the model's own mode after).
template <typename T>
TaskOutputs<T> forward_cascade(CascadeModel<T>& model, const nn::Tensor<T>& x, CascadeMode mode, nn::Mode nn_mode,
                               std::span<const LabelSet> labels = {});

// Parses the header of a descriptor back into a config (seed is not stored).
ModelConfig parse_descriptor(std::string_view descriptor);

// Checkpoint conversion. Loading rebuilds the architecture from the
// descriptor and requires every parameter name and shape to match.
nn::Checkpoint to_checkpoint(MultiTaskModel<float>& model, const nn::Adam* optimizer = nullptr);
std::unique_ptr<MultiTaskModel<float>> from_checkpoint(const nn::Checkpoint& ckpt);
void load_parameters(MultiTaskModel<float>& model, const nn::Checkpoint& ckpt);

// Per-task modal-class baseline.
class NaiveBaseline {
 public:
  // Ties go to the lowest class index. Throws EmptyLabelSet.
  void fit(std::span<const LabelSet> labels);
  std::size_t predict(Task t) const { return modal_[index(t)]; }
  const std::array<std::size_t, kTaskCount>& modal() const noexcept { return modal_; }

 private:
  std::array<std::size_t, kTaskCount> modal_{};
};

}  // namespace vac::models

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vac/nn/tensor.hpp"

namespace vac::nn {

// train: batch statistics + dropout; eval: running statistics, no dropout;
// check: batch statistics without touching running statistics, no dropout
// (the deterministic mode used for finite-difference checks).
enum class Mode { train, eval, check };

enum class LayerKind { conv1d, conv2d, batchnorm, relu, maxpool, dropout, global_avg_pool, linear, log_softmax };

std::string_view to_string(LayerKind kind) noexcept;

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 1, kernel_w = 1;
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pool_h = 1, pool_w = 1;
  std::size_t in_features = 0, out_features = 0;
  double dropout_p = 0.0;
  // Convolutions only; a bias directly ahead of batch normalization is redundant.
  bool bias = true;

  static LayerSpec conv1d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride = 1);
  static LayerSpec conv2d(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw, std::size_t sh = 1,
                          std::size_t sw = 1);
  static LayerSpec batchnorm(std::size_t channels);
  static LayerSpec relu();
  static LayerSpec maxpool1d(std::size_t pool);
  static LayerSpec maxpool2d(std::size_t ph, std::size_t pw);
  static LayerSpec dropout(double p);
  static LayerSpec global_avg_pool();
  static LayerSpec linear(std::size_t in, std::size_t out);
  static LayerSpec log_softmax();
  LayerSpec without_bias() const;

  // Throws InvalidArgument when a hyperparameter is missing or out of range.
  void validate() const;
  // Canonical text, e.g. "conv1d(1>128,k80,s4)".
  std::string describe() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  // Buffers (batchnorm running statistics) and frozen weights are false.
  bool trainable = true;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  // Takes dL/d(output) of the latest forward, accumulates parameter
  // gradients and returns dL/d(input).
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  virtual const LayerSpec& spec() const = 0;
};

// Weights uniform in +-sqrt(1 / fan_in), biases zero. Dropout layers draw
// their masks from a generator seeded with `dropout_seed`.
template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const std::string& name, std::mt19937_64& init_rng,
                                     std::uint64_t dropout_seed = 0);

template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(const std::vector<LayerSpec>& specs, const std::string& prefix, std::uint64_t seed);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);
  std::vector<Parameter<T>*> parameters();
  void zero_grad();

  std::size_t size() const noexcept { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
  std::string describe() const;

 private:
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// Output shape a spec produces for a given input shape (throws ShapeMismatch).
std::vector<std::size_t> output_shape(const LayerSpec& spec, const std::vector<std::size_t>& input);

}  // namespace vac::nn

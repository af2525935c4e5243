#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vac/nn/layers.hpp"

namespace vac::nn {

struct AdamConfig {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam with the AMSGrad max-accumulator and no weight decay. Only trainable
// parameters are updated; buffers are ignored.
class Adam {
 public:
  struct Slot {
    std::vector<float> m, v, v_max;
  };

  Adam(std::vector<Parameter<float>*> params, AdamConfig config = {});

  // Throws NonFiniteGradient (before touching any parameter) if a gradient
  // holds NaN or infinity.
  void step();
  void zero_grad();

  std::uint64_t steps() const noexcept { return steps_; }
  const AdamConfig& config() const noexcept { return config_; }
  const std::vector<Parameter<float>*>& parameters() const noexcept { return params_; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }

  // Restores state saved from an optimizer over the same parameter list.
  void restore(std::uint64_t steps, std::vector<Slot> slots);

 private:
  std::vector<Parameter<float>*> params_;
  AdamConfig config_;
  std::vector<Slot> slots_;
  std::uint64_t steps_ = 0;
};

}  // namespace vac::nn

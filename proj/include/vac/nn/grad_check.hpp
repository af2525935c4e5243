#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vac/nn/layers.hpp"
#include "vac/nn/loss.hpp"

namespace vac::nn {

struct GradCheckOptions {
  double eps = 1e-4;
  // Entries checked per parameter tensor; tensors this small or smaller are
  // checked exhaustively.
  std::size_t samples_per_parameter = 16;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
  std::size_t frozen_skipped = 0;
};

// Compares backprop gradients against central differences. `evaluate(true)`
// must zero gradients, run forward + loss + backward and return the loss;
// `evaluate(false)` only returns the loss. Non-trainable parameters are
// skipped. Error per entry: |g_bp - g_fd| / max(1e-8, |g_bp| + |g_fd|).
GradCheckReport grad_check(const std::vector<Parameter<double>*>& params,
                           const std::function<double(bool with_backward)>& evaluate,
                           const GradCheckOptions& options = {});

using LossFn = std::function<LossResult<double>(const Tensor<double>& output)>;

// Convenience wrapper for a plain layer stack in check mode.
GradCheckReport grad_check(Sequential<double>& net, const Tensor<double>& input, const LossFn& loss_fn,
                           const GradCheckOptions& options = {});

}  // namespace vac::nn

#pragma once

#include <cstddef>
#include <span>

#include "vac/nn/tensor.hpp"

namespace vac::nn {

template <typename T>
struct LossResult {
  T loss = T(0);
  Tensor<T> grad;       // dL/d(log_probs)
  std::size_t count = 0;  // unmasked samples
};

// Mean over unmasked rows of -log_probs[row, target]. An empty mask means
// every row counts. Rows must be log-distributions (exponentials summing to
// one within 1e-5). Throws AllMasked, ShapeMismatch or InvalidArgument.
template <typename T>
LossResult<T> nll_loss(const Tensor<T>& log_probs, std::span<const std::size_t> targets,
                       std::span<const bool> mask = {});

}  // namespace vac::nn

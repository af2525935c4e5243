#include "vac/nn/loss.hpp"

#include <cmath>
#include <string>

namespace vac::nn {

template <typename T>
LossResult<T> nll_loss(const Tensor<T>& log_probs, std::span<const std::size_t> targets, std::span<const bool> mask) {
  if (log_probs.rank() != 2)
    throw Error(ErrorCode::ShapeMismatch, "nll_loss expects [b,k], got " + shape_string(log_probs.shape));
  const std::size_t b = log_probs.dim(0), k = log_probs.dim(1);
  if (targets.size() != b) throw Error(ErrorCode::ShapeMismatch, "target count differs from batch size");
  if (!mask.empty() && mask.size() != b) throw Error(ErrorCode::ShapeMismatch, "mask length differs from batch size");

  LossResult<T> r;
  r.grad = Tensor<T>(log_probs.shape);
  for (std::size_t n = 0; n < b; ++n)
    if (mask.empty() || mask[n]) ++r.count;
  if (r.count == 0) throw Error(ErrorCode::AllMasked, "every sample in the batch is masked");

  double total = 0.0;
  const T weight = static_cast<T>(1.0 / static_cast<double>(r.count));
  for (std::size_t n = 0; n < b; ++n) {
    if (!mask.empty() && !mask[n]) continue;
    if (targets[n] >= k)
      throw Error(ErrorCode::InvalidArgument, "target " + std::to_string(targets[n]) + " out of range for " +
                                                  std::to_string(k) + " classes");
    double mass = 0.0;
    for (std::size_t j = 0; j < k; ++j) mass += std::exp(static_cast<double>(log_probs[n * k + j]));
    if (!(std::abs(mass - 1.0) <= 1e-5))
      throw Error(ErrorCode::InvalidArgument, "row " + std::to_string(n) + " is not a log-distribution");
    total -= log_probs[n * k + targets[n]];
    r.grad[n * k + targets[n]] = -weight;
  }
  r.loss = static_cast<T>(total / static_cast<double>(r.count));
  return r;
}

template LossResult<float> nll_loss<float>(const Tensor<float>&, std::span<const std::size_t>, std::span<const bool>);
template LossResult<double> nll_loss<double>(const Tensor<double>&, std::span<const std::size_t>,
                                             std::span<const bool>);

}  // namespace vac::nn

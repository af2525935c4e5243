#include "vac/nn/adam.hpp"

#include <cmath>

#include "vac/simd/kernels.hpp"

namespace vac::nn {

Adam::Adam(std::vector<Parameter<float>*> params, AdamConfig config) : config_(config) {
  if (!(config.learning_rate >= 0.0f) || !(config.beta1 >= 0.0f && config.beta1 < 1.0f) ||
      !(config.beta2 >= 0.0f && config.beta2 < 1.0f) || !(config.eps > 0.0f))
    throw Error(ErrorCode::InvalidArgument, "invalid Adam hyperparameters");
  for (auto* p : params) {
    if (!p->trainable) continue;
    if (p->grad.shape != p->value.shape)
      throw Error(ErrorCode::ShapeMismatch, "gradient shape differs for " + p->name);
    params_.push_back(p);
    const std::size_t n = p->value.size();
    slots_.push_back({std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f), std::vector<float>(n, 0.0f)});
  }
}

void Adam::step() {
  for (auto* p : params_)
    if (!p->grad.all_finite()) throw Error(ErrorCode::NonFiniteGradient, "non-finite gradient in " + p->name);
  ++steps_;
  const double t = static_cast<double>(steps_);
  simd::AdamCoefficients c{};
  c.lr = config_.learning_rate;
  c.beta1 = config_.beta1;
  c.beta2 = config_.beta2;
  c.eps = config_.eps;
  c.bias_correction1 = static_cast<float>(1.0 - std::pow(static_cast<double>(config_.beta1), t));
  c.bias_correction2 = static_cast<float>(1.0 - std::pow(static_cast<double>(config_.beta2), t));
  const auto& k = simd::active();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i];
    auto& s = slots_[i];
    k.adam_amsgrad(p->value.size(), p->value.data.data(), p->grad.data.data(), s.m.data(), s.v.data(),
                   s.v_max.data(), c);
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->grad.fill(0.0f);
}

void Adam::restore(std::uint64_t steps, std::vector<Slot> slots) {
  if (slots.size() != slots_.size()) throw Error(ErrorCode::CheckpointMismatch, "optimizer slot count differs");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::size_t n = params_[i]->value.size();
    if (slots[i].m.size() != n || slots[i].v.size() != n || slots[i].v_max.size() != n)
      throw Error(ErrorCode::CheckpointMismatch, "optimizer state shape differs for " + params_[i]->name);
  }
  slots_ = std::move(slots);
  steps_ = steps;
}

}  // namespace vac::nn

#include "vac/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace vac::nn {

GradCheckReport grad_check(const std::vector<Parameter<double>*>& params,
                           const std::function<double(bool)>& evaluate, const GradCheckOptions& options) {
  GradCheckReport report;
  evaluate(true);
  std::vector<std::vector<double>> analytic;
  for (auto* p : params) analytic.push_back(p->grad.data);

  std::mt19937_64 rng(options.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto* p = params[pi];
    if (!p->trainable) {
      ++report.frozen_skipped;
      continue;
    }
    std::vector<std::size_t> idx(p->value.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > options.samples_per_parameter) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(options.samples_per_parameter);
    }
    for (std::size_t i : idx) {
      const double saved = p->value[i];
      p->value[i] = saved + options.eps;
      const double up = evaluate(false);
      p->value[i] = saved - options.eps;
      const double down = evaluate(false);
      p->value[i] = saved;
      const double fd = (up - down) / (2.0 * options.eps);
      const double bp = analytic[pi][i];
      const double rel = std::abs(bp - fd) / std::max(1e-8, std::abs(bp) + std::abs(fd));
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_parameter.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        report.worst_parameter = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

GradCheckReport grad_check(Sequential<double>& net, const Tensor<double>& input, const LossFn& loss_fn,
                           const GradCheckOptions& options) {
  auto evaluate = [&](bool with_backward) {
    if (with_backward) net.zero_grad();
    const auto out = net.forward(input, Mode::check);
    auto loss = loss_fn(out);
    if (with_backward) net.backward(loss.grad);
    return static_cast<double>(loss.loss);
  };
  return grad_check(net.parameters(), evaluate, options);
}

}  // namespace vac::nn

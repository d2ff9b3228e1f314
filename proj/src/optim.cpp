#include "datk/optim.hpp"

#include <algorithm>
#include <cmath>

#include "datk/error.hpp"

namespace datk {

void sgd_momentum_step(ParameterSet& params, const GradientRecord& grads,
                       std::span<const std::string> names, const SgdOptions& opts) {
  if (!(opts.lr > 0.0)) throw ContractError("sgd: learning rate must be positive");
  if (opts.momentum < 0.0 || opts.momentum >= 1.0) throw ContractError("sgd: momentum must be in [0,1)");
  for (const std::string& name : names) {
    if (!grads.has(name)) throw ContractError("sgd: missing gradient for parameter '" + name + "'");
    if (grads.grads.at(name).shape() != params.at(name).shape()) {
      throw ContractError("sgd: gradient shape mismatch for '" + name + "'");
    }
  }
  const double sign = opts.direction == Direction::Descent ? 1.0 : -1.0;
  for (const std::string& name : names) {
    auto& e = params.entry(name);
    const Tensor& g = grads.grads.at(name);
    if (!e.velocity) e.velocity = Tensor::zeros_like(e.value);
    Tensor& v = *e.velocity;
    for (std::size_t i = 0; i < v.numel(); ++i) {
      v[i] = opts.momentum * v[i] + (sign * g[i] + opts.weight_decay * e.value[i]);
      e.value[i] -= opts.lr * v[i];
    }
  }
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& fn,
                                  const Tensor& point, double step) {
  if (!(step > 0.0)) throw ContractError("finite difference step must be positive");
  Tensor out = Tensor::zeros_like(point);
  Tensor probe = point;
  for (std::size_t i = 0; i < point.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = fn(probe);
    probe[i] = orig - step;
    const double down = fn(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("finite difference: non-finite value at coordinate " + std::to_string(i));
    }
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

double gradient_relative_error(const Tensor& analytic, const Tensor& numeric) {
  if (analytic.shape() != numeric.shape()) throw ContractError("gradient shapes differ");
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.numel(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

}  // namespace datk

#pragma once

#include <functional>
#include <span>
#include <string>

#include "datk/params.hpp"
#include "datk/tensor.hpp"

namespace datk {

enum class Direction { Descent, Ascent };

struct SgdOptions {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Direction direction = Direction::Descent;
};

// SGD with heavy-ball momentum on the named parameters. Descent:
//   v <- momentum*v + (g + wd*p);  p <- p - lr*v
// Ascent is descent on the negated objective, so weight decay still
// shrinks the parameters:
//   v <- momentum*v + (-g + wd*p); p <- p - lr*v
// Velocity buffers are created (zero) on first use. Throws ContractError
// when a named parameter has no gradient in `grads`.
void sgd_momentum_step(ParameterSet& params, const GradientRecord& grads,
                       std::span<const std::string> names, const SgdOptions& opts);

// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every
// coordinate of `point`.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& fn,
                                  const Tensor& point, double step = 1e-3);

// ||a - b|| / max(||a||, ||b||), the gradient-check metric.
double gradient_relative_error(const Tensor& analytic, const Tensor& numeric);

}  // namespace datk

#pragma once

// l-infinity attacks. Every output satisfies |x' - x|_inf <= epsilon and
// x' in [0,1]. The model is always run in eval mode.

#include <functional>
#include <random>
#include <span>
#include <string_view>

#include "datk/graph.hpp"
#include "datk/layers.hpp"
#include "datk/models.hpp"
#include "datk/tensor.hpp"

namespace datk::attacks {

// CE: cross-entropy ascent (PGD). Eaeg: CE + beta*KL(f(x'), f(x)).
// Kl: KL(f(x'), f(x)) alone, the TRADES inner maximization.
enum class LossKind { CeOnly, Eaeg, Kl };
// Gaussian: x + 0.001*N(0,1). UniformEps: x + U(-eps, eps).
enum class Init { Gaussian, UniformEps };

std::string_view loss_kind_name(LossKind k);
std::string_view init_name(Init i);

struct AttackConfig {
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  int steps = 10;
  double beta = 15.0;
  LossKind loss_kind = LossKind::CeOnly;
  Init init = Init::UniformEps;

  // Throws ConfigError on a negative radius, non-positive step with steps > 0,
  // or negative beta or step count.
  void validate() const;
  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

inline constexpr double kGaussianInitScale = 1e-3;

// Builds logits for an input Var on the given graph.
using LogitFn = std::function<Var(Graph&, Var)>;

// Eval-mode forward of `net` through `bank`.
LogitFn eval_logits(models::SmallConvNet& net, Bank bank);

// Clamp to [center - eps, center + eps], then to [0,1].
Tensor project_linf(const Tensor& candidate, const Tensor& center, double epsilon);

// Input gradient of the chosen attack loss at x_adv.
Tensor loss_input_gradient(const LogitFn& model, const Tensor& x_adv, std::span<const int> labels,
                           LossKind kind, double beta, const Tensor* benign_logits);

Tensor fgsm(const Tensor& x, std::span<const int> labels, const LogitFn& model, double epsilon);

// Iterated signed-gradient ascent, dispatching on cfg.loss_kind.
Tensor run_attack(const Tensor& x, std::span<const int> labels, const LogitFn& model,
                  const AttackConfig& cfg, std::mt19937_64& rng);

// run_attack with loss_kind forced to CeOnly.
Tensor pgd(const Tensor& x, std::span<const int> labels, const LogitFn& model, AttackConfig cfg,
           std::mt19937_64& rng);
// run_attack with loss_kind forced to Eaeg.
Tensor eaeg(const Tensor& x, std::span<const int> labels, const LogitFn& model, AttackConfig cfg,
            std::mt19937_64& rng);

// Eval-time PGD-K preset (uniform init, CE) and training-time EAEG preset
// (gaussian init, K=5).
AttackConfig pgd_config(double epsilon, double alpha, int steps);
AttackConfig eaeg_config(double epsilon, double alpha, double beta, int steps = 5);

}  // namespace datk::attacks

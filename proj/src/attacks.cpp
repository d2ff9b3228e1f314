#include "datk/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "datk/error.hpp"
#include "datk/losses.hpp"

namespace datk::attacks {

std::string_view loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::CeOnly:
      return "ce";
    case LossKind::Eaeg:
      return "eaeg";
    case LossKind::Kl:
      return "kl";
  }
  return "?";
}

std::string_view init_name(Init i) { return i == Init::Gaussian ? "gaussian" : "uniform"; }

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be >= 0");
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (steps > 0 && !(alpha > 0.0)) throw ConfigError("alpha must be > 0 when steps > 0");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
}

LogitFn eval_logits(models::SmallConvNet& net, Bank bank) {
  return [&net, bank](Graph& g, Var x) { return net.forward(g, x, Mode::Eval, bank); };
}

Tensor project_linf(const Tensor& candidate, const Tensor& center, double epsilon) {
  if (candidate.shape() != center.shape()) throw ContractError("project_linf: shape mismatch");
  Tensor out(candidate.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double v = std::clamp(candidate[i], center[i] - epsilon, center[i] + epsilon);
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

Tensor loss_input_gradient(const LogitFn& model, const Tensor& x_adv, std::span<const int> labels,
                           LossKind kind, double beta, const Tensor* benign_logits) {
  Graph g(false);
  const Var x = g.input(x_adv);
  const Var logits = model(g, x);
  Var loss;
  if (kind == LossKind::CeOnly) {
    loss = losses::cross_entropy(g, logits, labels);
  } else {
    if (!benign_logits) throw ContractError("attack loss needs benign logits");
    const Var fx = g.constant(*benign_logits);
    if (kind == LossKind::Eaeg) {
      loss = losses::loss_ae(g, fx, logits, labels, beta);
    } else {
      loss = losses::kl_divergence(g, losses::softmax_probs(g, logits), losses::softmax_probs(g, fx));
    }
  }
  return *g.backward(loss, x).input_grad;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Tensor signed_step(const Tensor& x_adv, const Tensor& grad, double alpha) {
  Tensor out(x_adv.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x_adv[i] + alpha * sign(grad[i]);
  return out;
}

Tensor benign_logits_of(const LogitFn& model, const Tensor& x) {
  Graph g(false);
  return g.value(model(g, g.constant(x)));
}

}  // namespace

Tensor fgsm(const Tensor& x, std::span<const int> labels, const LogitFn& model, double epsilon) {
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  const Tensor grad = loss_input_gradient(model, x, labels, LossKind::CeOnly, 0.0, nullptr);
  return project_linf(signed_step(x, grad, epsilon), x, epsilon);
}

Tensor run_attack(const Tensor& x, std::span<const int> labels, const LogitFn& model,
                  const AttackConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  Tensor start(x.shape());
  if (cfg.init == Init::Gaussian) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < x.numel(); ++i) start[i] = x[i] + kGaussianInitScale * normal(rng);
  } else {
    std::uniform_real_distribution<double> uni(-cfg.epsilon, cfg.epsilon);
    for (std::size_t i = 0; i < x.numel(); ++i) start[i] = x[i] + uni(rng);
  }
  Tensor x_adv = project_linf(start, x, cfg.epsilon);
  if (cfg.steps == 0) return x_adv;

  Tensor fx;
  if (cfg.loss_kind != LossKind::CeOnly) fx = benign_logits_of(model, x);
  for (int k = 0; k < cfg.steps; ++k) {
    const Tensor grad =
        loss_input_gradient(model, x_adv, labels, cfg.loss_kind, cfg.beta, fx.empty() ? nullptr : &fx);
    x_adv = project_linf(signed_step(x_adv, grad, cfg.alpha), x, cfg.epsilon);
  }
  return x_adv;
}

Tensor pgd(const Tensor& x, std::span<const int> labels, const LogitFn& model, AttackConfig cfg,
           std::mt19937_64& rng) {
  cfg.loss_kind = LossKind::CeOnly;
  return run_attack(x, labels, model, cfg, rng);
}

Tensor eaeg(const Tensor& x, std::span<const int> labels, const LogitFn& model, AttackConfig cfg,
            std::mt19937_64& rng) {
  cfg.loss_kind = LossKind::Eaeg;
  return run_attack(x, labels, model, cfg, rng);
}

AttackConfig pgd_config(double epsilon, double alpha, int steps) {
  AttackConfig c;
  c.epsilon = epsilon;
  c.alpha = alpha;
  c.steps = steps;
  c.loss_kind = LossKind::CeOnly;
  c.init = Init::UniformEps;
  return c;
}

AttackConfig eaeg_config(double epsilon, double alpha, double beta, int steps) {
  AttackConfig c;
  c.epsilon = epsilon;
  c.alpha = alpha;
  c.steps = steps;
  c.beta = beta;
  c.loss_kind = LossKind::Eaeg;
  c.init = Init::Gaussian;
  return c;
}

}  // namespace datk::attacks

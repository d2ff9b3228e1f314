#pragma once

// Scalar objectives over batches of logits [N,c]. Batch reduction is the
// arithmetic mean. Probabilities are floored at 1e-12 and renormalized
// before any logarithm. D_KL(a, b) = sum_i a_i * ln(a_i / b_i): the first
// argument is the numerator distribution.

#include <span>

#include "datk/graph.hpp"
#include "datk/tensor.hpp"

namespace datk::losses {

inline constexpr double kProbFloor = 1e-12;

// Softmax with max-subtraction, then floor and renormalize.
Var softmax_probs(Graph& g, Var logits);
Var cross_entropy(Graph& g, Var logits, std::span<const int> labels);
// p, q are probability batches (already floored).
Var kl_divergence(Graph& g, Var p, Var q);
// 1/2 [KL(m, p) + KL(m, q)], m = (p + q) / 2.
Var js_divergence(Graph& g, Var p, Var q);

// CE(adv) + beta * KL(softmax(adv), softmax(x)). Callers that attack pass a
// constant logits_x so no gradient reaches the benign branch.
Var loss_ae(Graph& g, Var logits_x, Var logits_adv, std::span<const int> labels, double beta);
// CE(x) + beta * KL(softmax(adv), softmax(x)).
Var loss_at(Graph& g, Var logits_x, Var logits_adv, std::span<const int> labels, double beta);
// Same functional form as loss_at; the TRADES baseline objective.
Var loss_trades(Graph& g, Var logits_x, Var logits_adv, std::span<const int> labels, double beta);

struct DatLoss {
  Var total;
  Var at_benign;
  Var at_recombined;
  Var js;
};
// 1/2 (L_AT(x) + L_AT(x_hat)) + omega * JS(softmax(x), softmax(x_hat)).
DatLoss loss_dat(Graph& g, Var logits_x, Var logits_x_adv, Var logits_xhat, Var logits_xhat_adv,
                 std::span<const int> labels, double beta, double omega);

// Value-level helpers for evaluation and tests.
Tensor softmax(const Tensor& logits);
// Floors at 1e-12 and renormalizes each row.
Tensor floor_renormalize(const Tensor& probs);
double cross_entropy(const Tensor& logits, std::span<const int> labels);
double kl_divergence(const Tensor& p, const Tensor& q);
double js_divergence(const Tensor& p, const Tensor& q);
// Per-sample cross-entropy.
std::vector<double> cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels);

}  // namespace datk::losses

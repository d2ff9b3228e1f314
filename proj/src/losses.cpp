#include "datk/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "datk/error.hpp"

namespace datk::losses {

namespace {

void check_logits(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ConfigError("logits must be [N,c], got " + shape_str(logits.shape()));
  if (labels.size() != logits.dim(0)) throw ContractError("label count does not match batch size");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= logits.dim(1)) {
      throw ContractError("label " + std::to_string(y) + " out of range");
    }
  }
}

void row_softmax(const double* z, std::size_t c, double* out) {
  const double mx = *std::max_element(z, z + c);
  double s = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    out[i] = std::exp(z[i] - mx);
    s += out[i];
  }
  for (std::size_t i = 0; i < c; ++i) out[i] /= s;
}

}  // namespace

Var softmax_probs(Graph& g, Var logits) {
  const Tensor& z = g.value(logits);
  if (z.rank() != 2) throw ConfigError("softmax expects [N,c]");
  const std::size_t n = z.dim(0), c = z.dim(1);
  Tensor s(z.shape());
  Tensor p(z.shape());
  std::vector<double> fsum(n);
  for (std::size_t r = 0; r < n; ++r) {
    row_softmax(z.data() + r * c, c, s.data() + r * c);
    double t = 0.0;
    for (std::size_t i = 0; i < c; ++i) t += std::max(s[r * c + i], kProbFloor);
    fsum[r] = t;
    for (std::size_t i = 0; i < c; ++i) p[r * c + i] = std::max(s[r * c + i], kProbFloor) / t;
  }
  const Var in[] = {logits};
  return g.record(std::move(p), in, [logits, s = std::move(s), fsum, n, c](Graph& g, Var o) {
    auto go = g.grad_span(o);
    const Tensor& p = g.value(o);
    auto& gz = g.grad_buffer(logits);
    std::vector<double> ds(c);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t off = r * c;
      double gp = 0.0;
      for (std::size_t i = 0; i < c; ++i) gp += go[off + i] * p[off + i];
      for (std::size_t i = 0; i < c; ++i) {
        const double df = (go[off + i] - gp) / fsum[r];
        ds[i] = s[off + i] > kProbFloor ? df : 0.0;
      }
      double dss = 0.0;
      for (std::size_t i = 0; i < c; ++i) dss += ds[i] * s[off + i];
      for (std::size_t i = 0; i < c; ++i) gz[off + i] += s[off + i] * (ds[i] - dss);
    }
  });
}

Var cross_entropy(Graph& g, Var logits, std::span<const int> labels) {
  const Tensor& z = g.value(logits);
  check_logits(z, labels);
  const std::size_t n = z.dim(0), c = z.dim(1);
  Tensor sm(z.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* zr = z.data() + r * c;
    const double mx = *std::max_element(zr, zr + c);
    double s = 0.0;
    for (std::size_t i = 0; i < c; ++i) s += std::exp(zr[i] - mx);
    total += -(zr[labels[r]] - mx - std::log(s));
    row_softmax(zr, c, sm.data() + r * c);
  }
  std::vector<int> y(labels.begin(), labels.end());
  const Var in[] = {logits};
  return g.record(Tensor({1}, std::vector<double>{total / static_cast<double>(n)}), in,
                  [logits, sm = std::move(sm), y, n, c](Graph& g, Var o) {
                    const double go = g.grad_span(o)[0] / static_cast<double>(n);
                    auto& gz = g.grad_buffer(logits);
                    for (std::size_t r = 0; r < n; ++r) {
                      for (std::size_t i = 0; i < c; ++i) {
                        const double t = static_cast<int>(i) == y[r] ? 1.0 : 0.0;
                        gz[r * c + i] += go * (sm[r * c + i] - t);
                      }
                    }
                  });
}

Var kl_divergence(Graph& g, Var p, Var q) {
  const Tensor& vp = g.value(p);
  const Tensor& vq = g.value(q);
  if (vp.shape() != vq.shape() || vp.rank() != 2) throw ConfigError("kl_divergence: shape mismatch");
  const std::size_t n = vp.dim(0);
  double total = 0.0;
  for (std::size_t i = 0; i < vp.numel(); ++i) total += vp[i] * (std::log(vp[i]) - std::log(vq[i]));
  const Var in[] = {p, q};
  return g.record(Tensor({1}, std::vector<double>{total / static_cast<double>(n)}), in,
                  [p, q, n](Graph& g, Var o) {
                    const double go = g.grad_span(o)[0] / static_cast<double>(n);
                    const Tensor& vp = g.value(p);
                    const Tensor& vq = g.value(q);
                    if (g.requires_grad(p)) {
                      auto& gp = g.grad_buffer(p);
                      for (std::size_t i = 0; i < vp.numel(); ++i) {
                        gp[i] += go * (std::log(vp[i]) - std::log(vq[i]) + 1.0);
                      }
                    }
                    if (g.requires_grad(q)) {
                      auto& gq = g.grad_buffer(q);
                      for (std::size_t i = 0; i < vp.numel(); ++i) gq[i] += -go * vp[i] / vq[i];
                    }
                  });
}

Var js_divergence(Graph& g, Var p, Var q) {
  const Var m = ops::scale(g, ops::add(g, p, q), 0.5);
  return ops::scale(g, ops::add(g, kl_divergence(g, p, m), kl_divergence(g, q, m)), 0.5);
}

Var loss_ae(Graph& g, Var logits_x, Var logits_adv, std::span<const int> labels, double beta) {
  if (beta < 0.0) throw ContractError("beta must be non-negative");
  const Var ce = cross_entropy(g, logits_adv, labels);
  const Var kl = kl_divergence(g, softmax_probs(g, logits_adv), softmax_probs(g, logits_x));
  return ops::add(g, ce, ops::scale(g, kl, beta));
}

Var loss_at(Graph& g, Var logits_x, Var logits_adv, std::span<const int> labels, double beta) {
  if (beta < 0.0) throw ContractError("beta must be non-negative");
  const Var ce = cross_entropy(g, logits_x, labels);
  const Var kl = kl_divergence(g, softmax_probs(g, logits_adv), softmax_probs(g, logits_x));
  return ops::add(g, ce, ops::scale(g, kl, beta));
}

Var loss_trades(Graph& g, Var logits_x, Var logits_adv, std::span<const int> labels, double beta) {
  return loss_at(g, logits_x, logits_adv, labels, beta);
}

DatLoss loss_dat(Graph& g, Var logits_x, Var logits_x_adv, Var logits_xhat, Var logits_xhat_adv,
                 std::span<const int> labels, double beta, double omega) {
  if (omega < 0.0) throw ContractError("omega must be non-negative");
  DatLoss out;
  out.at_benign = loss_at(g, logits_x, logits_x_adv, labels, beta);
  out.at_recombined = loss_at(g, logits_xhat, logits_xhat_adv, labels, beta);
  out.js = js_divergence(g, softmax_probs(g, logits_x), softmax_probs(g, logits_xhat));
  const Var half_at = ops::scale(g, ops::add(g, out.at_benign, out.at_recombined), 0.5);
  out.total = ops::add(g, half_at, ops::scale(g, out.js, omega));
  return out;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw ConfigError("softmax expects [N,c]");
  Tensor out(logits.shape());
  const std::size_t c = logits.dim(1);
  for (std::size_t r = 0; r < logits.dim(0); ++r) row_softmax(logits.data() + r * c, c, out.data() + r * c);
  return out;
}

Tensor floor_renormalize(const Tensor& probs) {
  if (probs.rank() != 2) throw ConfigError("probability batch must be [N,c]");
  Tensor out(probs.shape());
  const std::size_t c = probs.dim(1);
  for (std::size_t r = 0; r < probs.dim(0); ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < c; ++i) s += std::max(probs[r * c + i], kProbFloor);
    for (std::size_t i = 0; i < c; ++i) out[r * c + i] = std::max(probs[r * c + i], kProbFloor) / s;
  }
  return out;
}

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  Graph g(false);
  return g.value(cross_entropy(g, g.constant(logits), labels))[0];
}

std::vector<double> cross_entropy_per_sample(const Tensor& logits, std::span<const int> labels) {
  check_logits(logits, labels);
  const std::size_t c = logits.dim(1);
  std::vector<double> out(logits.dim(0));
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* zr = logits.data() + r * c;
    const double mx = *std::max_element(zr, zr + c);
    double s = 0.0;
    for (std::size_t i = 0; i < c; ++i) s += std::exp(zr[i] - mx);
    out[r] = -(zr[labels[r]] - mx - std::log(s));
  }
  return out;
}

double kl_divergence(const Tensor& p, const Tensor& q) {
  Graph g(false);
  return g.value(kl_divergence(g, g.constant(floor_renormalize(p)), g.constant(floor_renormalize(q))))[0];
}

double js_divergence(const Tensor& p, const Tensor& q) {
  Graph g(false);
  return g.value(js_divergence(g, g.constant(floor_renormalize(p)), g.constant(floor_renormalize(q))))[0];
}

}  // namespace datk::losses

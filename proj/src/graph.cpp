#include "datk/graph.hpp"

#include <algorithm>
#include <memory>
#include <cmath>

#include "datk/error.hpp"
#include "datk/kernels.hpp"

namespace datk {

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::input(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Graph::param(const ParameterSet& params, const std::string& name) {
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Var{it->second};
  const auto& e = params.entry(name);
  Node n;
  n.external = &e.value;
  n.requires_grad = track_params_ && e.trainable;
  n.param_name = name;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(name, nodes_.size() - 1);
  return Var{nodes_.size() - 1};
}

const Tensor& Graph::value(Var v) const { return node_value(nodes_.at(v.id)); }

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  const Tensor& val = node_value(n);
  if (n.grad.empty()) return Tensor::zeros_like(val);
  return Tensor(val.shape(), n.grad);
}

std::vector<double>& Graph::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.grad.empty()) n.grad.assign(node_value(n).numel(), 0.0);
  return n.grad;
}

std::span<const double> Graph::grad_span(Var v) const { return nodes_.at(v.id).grad; }

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) throw NumericalError("non-finite value in forward pass");
  Node n;
  n.value = std::move(value);
  for (Var in : inputs) n.requires_grad = n.requires_grad || nodes_.at(in.id).requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

GradientRecord Graph::backward(Var loss, Var wrt) {
  if (value(loss).numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_str(value(loss).shape()));
  }
  for (Node& n : nodes_) n.grad.clear();
  GradientRecord rec;
  if (nodes_[loss.id].requires_grad) {
    grad_buffer(loss)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, Var{i});
    }
  }
  for (const auto& [name, id] : param_nodes_) {
    const Node& n = nodes_[id];
    if (!n.requires_grad) continue;
    Tensor gt = grad(Var{id});
    if (!gt.all_finite()) throw NumericalError("non-finite gradient for parameter '" + name + "'");
    rec.grads.emplace(name, std::move(gt));
  }
  if (wrt.valid()) {
    Tensor gi = grad(wrt);
    if (!gi.all_finite()) throw NumericalError("non-finite input gradient");
    rec.input_grad = std::move(gi);
  }
  return rec;
}

namespace ops {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  }
}

// Adds `scale * src` into the gradient of v when v needs one.
void accumulate(Graph& g, Var v, std::span<const double> src, double scale = 1.0) {
  if (!g.requires_grad(v)) return;
  auto& dst = g.grad_buffer(v);
  kernels::axpy(scale, src.data(), dst.data(), src.size());
}

}  // namespace

Var add(Graph& g, Var a, Var b) {
  const Tensor& va = g.value(a);
  const Tensor& vb = g.value(b);
  require_same_shape(va, vb, "add");
  Tensor out = va;
  kernels::axpy(1.0, vb.data(), out.data(), out.numel());
  const Var in[] = {a, b};
  return g.record(std::move(out), in, [a, b](Graph& g, Var o) {
    accumulate(g, a, g.grad_span(o));
    accumulate(g, b, g.grad_span(o));
  });
}

Var sub(Graph& g, Var a, Var b) {
  const Tensor& va = g.value(a);
  const Tensor& vb = g.value(b);
  require_same_shape(va, vb, "sub");
  Tensor out = va;
  kernels::axpy(-1.0, vb.data(), out.data(), out.numel());
  const Var in[] = {a, b};
  return g.record(std::move(out), in, [a, b](Graph& g, Var o) {
    accumulate(g, a, g.grad_span(o));
    accumulate(g, b, g.grad_span(o), -1.0);
  });
}

Var scale(Graph& g, Var a, double s) {
  Tensor out = g.value(a);
  for (double& v : out.vec()) v *= s;
  const Var in[] = {a};
  return g.record(std::move(out), in,
                  [a, s](Graph& g, Var o) { accumulate(g, a, g.grad_span(o), s); });
}

Var mul_const(Graph& g, Var a, const Tensor& c) {
  const Tensor& va = g.value(a);
  require_same_shape(va, c, "mul_const");
  Tensor out = va;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= c[i];
  const Var in[] = {a};
  return g.record(std::move(out), in, [a, c](Graph& g, Var o) {
    auto go = g.grad_span(o);
    auto& ga = g.grad_buffer(a);
    kernels::mul_acc(go.data(), c.data(), ga.data(), go.size());
  });
}

Var sum(Graph& g, Var a) {
  double s = 0.0;
  for (double v : g.value(a).vec()) s += v;
  const Var in[] = {a};
  return g.record(Tensor({1}, std::vector<double>{s}), in, [a](Graph& g, Var o) {
    const double go = g.grad_span(o)[0];
    for (double& v : g.grad_buffer(a)) v += go;
  });
}

Var mean(Graph& g, Var a) {
  const double n = static_cast<double>(g.value(a).numel());
  return scale(g, sum(g, a), 1.0 / n);
}

Var reshape(Graph& g, Var a, Shape shape) {
  Tensor out = g.value(a).reshaped(std::move(shape));
  const Var in[] = {a};
  return g.record(std::move(out), in,
                  [a](Graph& g, Var o) { accumulate(g, a, g.grad_span(o)); });
}

Var relu(Graph& g, Var a) {
  Tensor out = g.value(a);
  for (double& v : out.vec()) v = v > 0.0 ? v : 0.0;
  const Var in[] = {a};
  return g.record(std::move(out), in, [a](Graph& g, Var o) {
    const Tensor& x = g.value(a);
    auto go = g.grad_span(o);
    auto& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (x[i] > 0.0) ga[i] += go[i];
    }
  });
}

Var sigmoid(Graph& g, Var a) {
  Tensor out = g.value(a);
  for (double& v : out.vec()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const Var in[] = {a};
  return g.record(std::move(out), in, [a](Graph& g, Var o) {
    const Tensor& y = g.value(o);
    auto go = g.grad_span(o);
    auto& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i] * (1.0 - y[i]);
  });
}

Var clamp(Graph& g, Var a, double lo, double hi) {
  Tensor out = g.value(a);
  for (double& v : out.vec()) v = std::clamp(v, lo, hi);
  const Var in[] = {a};
  return g.record(std::move(out), in, [a, lo, hi](Graph& g, Var o) {
    const Tensor& x = g.value(a);
    auto go = g.grad_span(o);
    auto& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (x[i] > lo && x[i] < hi) ga[i] += go[i];
    }
  });
}

Var detach(Graph& g, Var a) { return g.constant(g.value(a)); }

namespace {

// col[(ci*9 + ky*3 + kx), oy*wo + ox] = x[ci, oy*s + ky - 1, ox*s + kx - 1]
void im2col(const double* x, std::size_t ci, std::size_t h, std::size_t w, std::size_t stride,
            std::size_t ho, std::size_t wo, double* col) {
  for (std::size_t c = 0; c < ci; ++c) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = col + ((c * 3 + ky) * 3 + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - 1;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - 1;
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                                ix < static_cast<std::ptrdiff_t>(w);
            row[oy * wo + ox] = inside ? x[(c * h + iy) * w + ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, std::size_t ci, std::size_t h, std::size_t w, std::size_t stride,
            std::size_t ho, std::size_t wo, double* dx) {
  for (std::size_t c = 0; c < ci; ++c) {
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = col + ((c * 3 + ky) * 3 + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - 1;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - 1;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            dx[(c * h + iy) * w + ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv3x3(Graph& g, Var x, Var w, Var b, std::size_t stride) {
  const Tensor& vx = g.value(x);
  const Tensor& vw = g.value(w);
  const Tensor& vb = g.value(b);
  if (vx.rank() != 4 || vw.rank() != 4 || vw.dim(2) != 3 || vw.dim(3) != 3 ||
      vw.dim(1) != vx.dim(1) || vb.rank() != 1 || vb.dim(0) != vw.dim(0) || stride == 0) {
    throw ConfigError("conv3x3: incompatible shapes x" + shape_str(vx.shape()) + " w" +
                      shape_str(vw.shape()) + " b" + shape_str(vb.shape()));
  }
  const std::size_t n = vx.dim(0), ci = vx.dim(1), h = vx.dim(2), wd = vx.dim(3);
  const std::size_t co = vw.dim(0);
  const std::size_t ho = (h + stride - 1) / stride, wo = (wd + stride - 1) / stride;
  const std::size_t k = ci * 9, hw = ho * wo;

  Tensor out({n, co, ho, wo});
  auto cols = std::make_shared<std::vector<double>>(n * k * hw);
  for (std::size_t s = 0; s < n; ++s) {
    double* col = cols->data() + s * k * hw;
    im2col(vx.data() + s * ci * h * wd, ci, h, wd, stride, ho, wo, col);
    double* o = out.data() + s * co * hw;
    for (std::size_t c = 0; c < co; ++c) std::fill(o + c * hw, o + (c + 1) * hw, vb[c]);
    kernels::gemm_nn(co, hw, k, vw.data(), col, o);
  }
  const Var in[] = {x, w, b};
  return g.record(std::move(out), in,
                  [=](Graph& g, Var o) {
                    auto go = g.grad_span(o);
                    const Tensor& vw = g.value(w);
                    if (g.requires_grad(w)) {
                      auto& gw = g.grad_buffer(w);
                      for (std::size_t s = 0; s < n; ++s) {
                        kernels::gemm_nt(co, k, hw, go.data() + s * co * hw,
                                         cols->data() + s * k * hw, gw.data());
                      }
                    }
                    if (g.requires_grad(b)) {
                      auto& gb = g.grad_buffer(b);
                      for (std::size_t s = 0; s < n; ++s) {
                        for (std::size_t c = 0; c < co; ++c) {
                          const double* r = go.data() + (s * co + c) * hw;
                          double acc = 0.0;
                          for (std::size_t i = 0; i < hw; ++i) acc += r[i];
                          gb[c] += acc;
                        }
                      }
                    }
                    if (g.requires_grad(x)) {
                      auto& gx = g.grad_buffer(x);
                      std::vector<double> dcol(k * hw);
                      for (std::size_t s = 0; s < n; ++s) {
                        std::fill(dcol.begin(), dcol.end(), 0.0);
                        kernels::gemm_tn(k, hw, co, vw.data(), go.data() + s * co * hw,
                                         dcol.data());
                        col2im(dcol.data(), ci, h, wd, stride, ho, wo,
                               gx.data() + s * ci * h * wd);
                      }
                    }
                  });
}

Var linear(Graph& g, Var x, Var w, Var b) {
  const Tensor& vx = g.value(x);
  const Tensor& vw = g.value(w);
  const Tensor& vb = g.value(b);
  if (vx.rank() != 2 || vw.rank() != 2 || vw.dim(1) != vx.dim(1) || vb.rank() != 1 ||
      vb.dim(0) != vw.dim(0)) {
    throw ConfigError("linear: incompatible shapes x" + shape_str(vx.shape()) + " w" +
                      shape_str(vw.shape()) + " b" + shape_str(vb.shape()));
  }
  const std::size_t n = vx.dim(0), in_w = vx.dim(1), out_w = vw.dim(0);
  Tensor out({n, out_w});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy(vb.data(), vb.data() + out_w, out.data() + s * out_w);
  }
  kernels::gemm_nt(n, out_w, in_w, vx.data(), vw.data(), out.data());
  const Var in[] = {x, w, b};
  return g.record(std::move(out), in, [=](Graph& g, Var o) {
    auto go = g.grad_span(o);
    if (g.requires_grad(w)) {
      kernels::gemm_tn(out_w, in_w, n, go.data(), g.value(x).data(), g.grad_buffer(w).data());
    }
    if (g.requires_grad(b)) {
      auto& gb = g.grad_buffer(b);
      for (std::size_t s = 0; s < n; ++s) kernels::axpy(1.0, go.data() + s * out_w, gb.data(), out_w);
    }
    if (g.requires_grad(x)) {
      kernels::gemm_nn(n, in_w, out_w, go.data(), g.value(w).data(), g.grad_buffer(x).data());
    }
  });
}

Var global_avg_pool(Graph& g, Var x) {
  const Tensor& vx = g.value(x);
  if (vx.rank() != 4) throw ConfigError("global_avg_pool expects [N,C,H,W], got " + shape_str(vx.shape()));
  const std::size_t n = vx.dim(0), c = vx.dim(1), hw = vx.dim(2) * vx.dim(3);
  Tensor out({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += vx[i * hw + j];
    out[i] = s / static_cast<double>(hw);
  }
  const Var in[] = {x};
  return g.record(std::move(out), in, [x, n, c, hw](Graph& g, Var o) {
    auto go = g.grad_span(o);
    auto& gx = g.grad_buffer(x);
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t i = 0; i < n * c; ++i) {
      for (std::size_t j = 0; j < hw; ++j) gx[i * hw + j] += go[i] * inv;
    }
  });
}

Var batch_norm(Graph& g, Var x, Var gamma, Var beta, const BatchNormState& state, Mode mode) {
  const Tensor& vx = g.value(x);
  const Tensor& vg = g.value(gamma);
  const Tensor& vbeta = g.value(beta);
  if (vx.rank() < 2) throw ConfigError("batch_norm expects [N,C,...], got " + shape_str(vx.shape()));
  const std::size_t n = vx.dim(0), c = vx.dim(1), inner = vx.numel() / (n * c);
  if (vg.numel() != c || vbeta.numel() != c || !state.running_mean || !state.running_var ||
      state.running_mean->numel() != c || state.running_var->numel() != c) {
    throw ConfigError("batch_norm: parameter width does not match channels " + std::to_string(c));
  }
  const std::size_t m = n * inner;
  std::vector<double> mu(c), inv_std(c);
  if (mode == Mode::Train) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t s_ = 0; s_ < n; ++s_) {
        const double* p = vx.data() + (s_ * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += p[i];
      }
      const double mean = s / static_cast<double>(m);
      double v = 0.0;
      for (std::size_t s_ = 0; s_ < n; ++s_) {
        const double* p = vx.data() + (s_ * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) v += (p[i] - mean) * (p[i] - mean);
      }
      const double var = v / static_cast<double>(m);
      mu[ch] = mean;
      inv_std[ch] = 1.0 / std::sqrt(var + state.eps);
      const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
      (*state.running_mean)[ch] = (1.0 - state.momentum) * (*state.running_mean)[ch] + state.momentum * mean;
      (*state.running_var)[ch] = (1.0 - state.momentum) * (*state.running_var)[ch] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mu[ch] = (*state.running_mean)[ch];
      inv_std[ch] = 1.0 / std::sqrt((*state.running_var)[ch] + state.eps);
    }
  }
  Tensor xhat(vx.shape());
  Tensor out(vx.shape());
  for (std::size_t s_ = 0; s_ < n; ++s_) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (s_ * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double h = (vx[off + i] - mu[ch]) * inv_std[ch];
        xhat[off + i] = h;
        out[off + i] = vg[ch] * h + vbeta[ch];
      }
    }
  }
  const bool train = mode == Mode::Train;
  const Var in[] = {x, gamma, beta};
  return g.record(std::move(out), in,
                  [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, Var o) {
    auto go = g.grad_span(o);
    const Tensor& vg = g.value(gamma);
    std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
    for (std::size_t s_ = 0; s_ < n; ++s_) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t off = (s_ * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          sum_dy[ch] += go[off + i];
          sum_dy_xhat[ch] += go[off + i] * xhat[off + i];
        }
      }
    }
    if (g.requires_grad(gamma)) {
      auto& gg = g.grad_buffer(gamma);
      for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += sum_dy_xhat[ch];
    }
    if (g.requires_grad(beta)) {
      auto& gb = g.grad_buffer(beta);
      for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += sum_dy[ch];
    }
    if (!g.requires_grad(x)) return;
    auto& gx = g.grad_buffer(x);
    const double md = static_cast<double>(m);
    for (std::size_t s_ = 0; s_ < n; ++s_) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t off = (s_ * c + ch) * inner;
        const double k = vg[ch] * inv_std[ch];
        for (std::size_t i = 0; i < inner; ++i) {
          if (train) {
            gx[off + i] += k * (go[off + i] - sum_dy[ch] / md - xhat[off + i] * sum_dy_xhat[ch] / md);
          } else {
            gx[off + i] += k * go[off + i];
          }
        }
      }
    }
  });
}

}  // namespace ops

}  // namespace datk

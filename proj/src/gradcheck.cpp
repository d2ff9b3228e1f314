#include "datk/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "datk/layers.hpp"
#include "datk/losses.hpp"
#include "datk/models.hpp"
#include "datk/optim.hpp"
#include "datk/spectral.hpp"

namespace datk::gradcheck {

namespace {

std::vector<std::size_t> sample_coords(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n <= kCoordsPerTensor) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(kCoordsPerTensor);
  std::sort(idx.begin(), idx.end());
  return idx;
}

CheckResult finish(const std::string& name, const std::vector<double>& analytic,
                   const std::vector<double>& numeric) {
  const Tensor a({analytic.size()}, analytic);
  const Tensor n({numeric.size()}, numeric);
  CheckResult r;
  r.name = name;
  r.rel_error = gradient_relative_error(a, n);
  r.passed = std::isfinite(r.rel_error) && r.rel_error <= kTolerance;
  return r;
}

Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(std::move(s));
  for (auto& v : t.vec()) v = d(rng);
  return t;
}

// Sum of out * weights, a scalar with a generic upstream gradient.
Var weighted_sum(Graph& g, Var out, const Tensor& weights) {
  return ops::sum(g, ops::mul_const(g, out, weights));
}

std::vector<int> random_labels(std::size_t n, std::size_t c, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, static_cast<int>(c) - 1);
  std::vector<int> y(n);
  for (auto& v : y) v = d(rng);
  return y;
}

}  // namespace

CheckResult check_inputs(const std::string& name, const LeafBuilder& build,
                         const std::vector<Tensor>& leaves, std::mt19937_64& rng) {
  std::vector<double> analytic, numeric;
  std::vector<Tensor> grads;
  {
    Graph g;
    std::vector<Var> vars;
    for (const auto& t : leaves) vars.push_back(g.input(t));
    const Var loss = build(g, vars);
    g.backward(loss);
    for (const auto& v : vars) grads.push_back(g.grad(v));
  }
  auto eval = [&](const std::vector<Tensor>& values) {
    Graph g(false);
    std::vector<Var> vars;
    for (const auto& t : values) vars.push_back(g.input(t, false));
    return g.value(build(g, vars))[0];
  };
  std::vector<Tensor> work = leaves;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    for (std::size_t i : sample_coords(leaves[k].numel(), rng)) {
      const double orig = work[k][i];
      work[k][i] = orig + kStep;
      const double up = eval(work);
      work[k][i] = orig - kStep;
      const double down = eval(work);
      work[k][i] = orig;
      analytic.push_back(grads[k][i]);
      numeric.push_back((up - down) / (2.0 * kStep));
    }
  }
  return finish(name, analytic, numeric);
}

CheckResult check_params(const std::string& name, const ParamBuilder& build, ParameterSet& params,
                         const std::vector<std::string>& names, std::mt19937_64& rng) {
  GradientRecord rec;
  {
    Graph g;
    rec = g.backward(build(g));
  }
  auto eval = [&] {
    Graph g(false);
    return g.value(build(g))[0];
  };
  std::vector<double> analytic, numeric;
  for (const auto& n : names) {
    Tensor& value = params.at(n);
    const Tensor grad = rec.has(n) ? rec.grads.at(n) : Tensor::zeros_like(value);
    for (std::size_t i : sample_coords(value.numel(), rng)) {
      const double orig = value[i];
      value[i] = orig + kStep;
      const double up = eval();
      value[i] = orig - kStep;
      const double down = eval();
      value[i] = orig;
      analytic.push_back(grad[i]);
      numeric.push_back((up - down) / (2.0 * kStep));
    }
  }
  return finish(name, analytic, numeric);
}

std::vector<CheckResult> run_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;
  const std::string suffix = " [seed " + std::to_string(seed) + "]";
  auto add = [&](CheckResult r) {
    r.name += suffix;
    out.push_back(std::move(r));
  };

  // Layer kinds.
  for (std::size_t stride : {1u, 2u}) {
    const Tensor x = random_tensor({2, 2, 5, 5}, rng), w = random_tensor({3, 2, 3, 3}, rng),
                 b = random_tensor({3}, rng);
    const std::size_t ho = (5 + 2 - 3) / stride + 1;
    const Tensor r = random_tensor({2, 3, ho, ho}, rng);
    add(check_inputs("conv3x3 stride " + std::to_string(stride),
                     [&](Graph& g, const std::vector<Var>& v) {
                       return weighted_sum(g, ops::conv3x3(g, v[0], v[1], v[2], stride), r);
                     },
                     {x, w, b}, rng));
  }
  {
    const Tensor x = random_tensor({3, 4}, rng), w = random_tensor({5, 4}, rng), b = random_tensor({5}, rng),
                 r = random_tensor({3, 5}, rng);
    add(check_inputs("linear",
                     [&](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, ops::linear(g, v[0], v[1], v[2]), r); },
                     {x, w, b}, rng));
  }
  {
    const Tensor x = random_tensor({4, 6}, rng), r = random_tensor({4, 6}, rng);
    add(check_inputs("relu", [&](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, ops::relu(g, v[0]), r); },
                     {x}, rng));
    add(check_inputs("sigmoid",
                     [&](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, ops::sigmoid(g, v[0]), r); }, {x}, rng));
    const Tensor xc = random_tensor({4, 6}, rng, -0.5, 1.5);
    add(check_inputs("clamp",
                     [&](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, ops::clamp(g, v[0], 0.0, 1.0), r); },
                     {xc}, rng));
  }
  {
    const Tensor x = random_tensor({2, 3, 4, 4}, rng), r = random_tensor({2, 3}, rng);
    add(check_inputs("global_avg_pool",
                     [&](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, ops::global_avg_pool(g, v[0]), r); },
                     {x}, rng));
  }
  for (Mode mode : {Mode::Train, Mode::Eval}) {
    const Tensor x = random_tensor({3, 2, 3, 3}, rng), gamma = random_tensor({2}, rng, 0.5, 1.5),
                 beta = random_tensor({2}, rng), r = random_tensor({3, 2, 3, 3}, rng);
    Tensor mean = random_tensor({2}, rng), var = random_tensor({2}, rng, 0.5, 2.0);
    add(check_inputs(mode == Mode::Train ? "batch_norm train" : "batch_norm eval",
                     [&](Graph& g, const std::vector<Var>& v) {
                       Tensor m = mean, s = var;
                       const ops::BatchNormState st{&m, &s};
                       return weighted_sum(g, ops::batch_norm(g, v[0], v[1], v[2], st, mode), r);
                     },
                     {x, gamma, beta}, rng));
  }

  // Spectral ops.
  {
    const Tensor half = random_tensor({2, 2, 4, 3}, rng, 0.1, 1.0), r = random_tensor({2, 2, 4, 4}, rng);
    add(check_inputs("expand_half",
                     [&](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, spectral::ops::expand_half(g, v[0], 4), r); },
                     {half}, rng));
    const Tensor gen = random_tensor({2, 2, 4, 4}, rng, 0.1, 1.0), natural = random_tensor({2, 2, 4, 4}, rng, 0.1, 1.0);
    const std::vector<double> lambdas = {0.3, 0.8};
    add(check_inputs("mix",
                     [&](Graph& g, const std::vector<Var>& v) { return weighted_sum(g, spectral::ops::mix(g, v[0], natural, lambdas), r); },
                     {gen}, rng));
    const Tensor img = random_tensor({2, 2, 4, 4}, rng, 0.0, 1.0);
    const auto sp = models::decompose_batch(img);
    add(check_inputs("idft_with_phase",
                     [&](Graph& g, const std::vector<Var>& v) {
                       return weighted_sum(g, spectral::ops::idft_with_phase(g, v[0], sp.phase), r);
                     },
                     {sp.amplitude}, rng));
  }

  // Losses over logits.
  {
    const std::size_t n = 4, c = 5;
    const auto y = random_labels(n, c, rng);
    const Tensor a = random_tensor({n, c}, rng, -2, 2), b = random_tensor({n, c}, rng, -2, 2),
                 d = random_tensor({n, c}, rng, -2, 2), e = random_tensor({n, c}, rng, -2, 2);
    const double beta = 15.0, omega = 2.0;
    add(check_inputs("cross_entropy",
                     [&](Graph& g, const std::vector<Var>& v) { return losses::cross_entropy(g, v[0], y); }, {a}, rng));
    add(check_inputs("kl_divergence",
                     [&](Graph& g, const std::vector<Var>& v) {
                       return losses::kl_divergence(g, losses::softmax_probs(g, v[0]), losses::softmax_probs(g, v[1]));
                     },
                     {a, b}, rng));
    add(check_inputs("js_divergence",
                     [&](Graph& g, const std::vector<Var>& v) {
                       return losses::js_divergence(g, losses::softmax_probs(g, v[0]), losses::softmax_probs(g, v[1]));
                     },
                     {a, b}, rng));
    add(check_inputs("loss_ae",
                     [&](Graph& g, const std::vector<Var>& v) { return losses::loss_ae(g, v[0], v[1], y, beta); }, {a, b}, rng));
    add(check_inputs("loss_at",
                     [&](Graph& g, const std::vector<Var>& v) { return losses::loss_at(g, v[0], v[1], y, beta); }, {a, b}, rng));
    add(check_inputs("loss_trades",
                     [&](Graph& g, const std::vector<Var>& v) { return losses::loss_trades(g, v[0], v[1], y, beta); }, {a, b},
                     rng));
    add(check_inputs("loss_dat",
                     [&](Graph& g, const std::vector<Var>& v) {
                       return losses::loss_dat(g, v[0], v[1], v[2], v[3], y, beta, omega).total;
                     },
                     {a, b, d, e}, rng));
  }

  // Input gradient of L_AE through the classifier, and classifier weights.
  const models::ImageShape img{3, 8, 8};
  models::SmallConvNet net(img, 3, seed + 11);
  {
    const Tensor x = random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0);
    const auto y = random_labels(2, 3, rng);
    const Tensor fx = net.logits(x, Mode::Eval, Bank::A);
    const Tensor x_adv = random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0);
    add(check_inputs("input gradient of loss_ae",
                     [&](Graph& g, const std::vector<Var>& v) {
                       return losses::loss_ae(g, g.constant(fx), net.forward(g, v[0], Mode::Eval, Bank::A), y, 15.0);
                     },
                     {x_adv}, rng));
    for (Bank bank : {Bank::A, Bank::B}) {
      const std::string label = std::string("classifier parameters bank ") + std::string(bank_name(bank));
      add(check_params(label,
                       [&](Graph& g) { return losses::cross_entropy(g, net.forward(g, g.constant(x), Mode::Train, bank), y); },
                       net.params(), net.trainable_names(true), rng));
    }
  }

  // Generator path: aag -> scale -> expand -> mix -> IDFT -> classifier -> loss.
  {
    models::AagNet gen(img, 3, models::AagInput::NoiseLogits, 100, seed + 13);
    models::AmplitudeScale scale(img);
    const Tensor x = random_tensor({2, 3, 8, 8}, rng, 0.2, 0.8);
    const auto sp = models::decompose_batch(x);
    scale.update(models::half_amplitudes(sp.amplitude));
    const auto y = random_labels(2, 3, rng);
    const Tensor z = models::draw_noise(2, 100, rng);
    const std::vector<double> lambdas = {0.4, 0.9};
    // Train-mode forwards move the running statistics that the logits
    // conditioning reads, so every evaluation starts from the same state.
    const ParameterSet frozen = net.params();
    add(check_params("generator path",
                     [&](Graph& g) {
                       net.params() = frozen;
                       const Var xhat = models::recombine(g, x, sp, net, gen, scale, lambdas, y, z);
                       const Var lh = net.forward(g, xhat, Mode::Train, Bank::B);
                       const Var lx = net.forward(g, g.constant(x), Mode::Train, Bank::A);
                       return ops::add(g, losses::cross_entropy(g, lh, y),
                                       losses::js_divergence(g, losses::softmax_probs(g, lx), losses::softmax_probs(g, lh)));
                     },
                     gen.params(), gen.trainable_names(), rng));
  }
  return out;
}

}  // namespace datk::gradcheck

#include "datk/models.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "datk/error.hpp"
#include "datk/spectral.hpp"

namespace datk::models {

namespace {

constexpr std::string_view kBnFields[] = {"gamma", "beta", "running_mean", "running_var"};

void check_image_batch(const Tensor& x, ImageShape s) {
  if (x.rank() != 4 || x.dim(1) != s.channels || x.dim(2) != s.height || x.dim(3) != s.width) {
    throw ConfigError("expected image batch [N," + std::to_string(s.channels) + "," +
                      std::to_string(s.height) + "," + std::to_string(s.width) + "], got " +
                      shape_str(x.shape()));
  }
}

}  // namespace

SmallConvNet::SmallConvNet(ImageShape input, std::size_t classes, std::uint64_t seed)
    : input_(input), classes_(classes) {
  if (classes < 2) throw ConfigError("classifier needs at least 2 classes");
  if (input.height < 4 || input.width < 4) throw ConfigError("images must be at least 4x4");
  std::mt19937_64 rng(seed);
  const std::size_t widths[] = {input.channels, 16, 32, 64};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string conv = "conv" + std::to_string(i + 1);
    const std::string bn = "bn" + std::to_string(i + 1);
    add_conv3x3_params(params_, conv, widths[i], widths[i + 1], rng);
    add_batch_norm_params(params_, bn, widths[i + 1]);
    layers_.push_back({LayerKind::Conv3x3, conv, i == 0 ? 1u : 2u});
    layers_.push_back({LayerKind::BatchNorm, bn});
    layers_.push_back({LayerKind::Relu, ""});
  }
  layers_.push_back({LayerKind::GlobalAvgPool, ""});
  add_linear_params(params_, "fc", 64, classes, rng);
  layers_.push_back({LayerKind::Linear, "fc"});
}

Var SmallConvNet::forward(Graph& g, Var x, Mode mode, Bank bank) {
  check_image_batch(g.value(x), input_);
  Var h = x;
  for (const auto& layer : layers_) h = apply_layer(g, layer, h, params_, mode, bank);
  return h;
}

Tensor SmallConvNet::logits(const Tensor& x, Mode mode, Bank bank) {
  Graph g(false);
  return g.value(forward(g, g.constant(x), mode, bank));
}

std::vector<std::string> SmallConvNet::bn_layer_names() const {
  std::vector<std::string> out;
  for (const auto& l : layers_) {
    if (l.kind == LayerKind::BatchNorm) out.push_back(l.name);
  }
  return out;
}

std::vector<std::string> SmallConvNet::trainable_names(bool include_bank_b) const {
  std::vector<std::string> out;
  for (const auto& name : params_.trainable_names()) {
    if (!include_bank_b && name.find(".B.") != std::string::npos) continue;
    out.push_back(name);
  }
  return out;
}

void SmallConvNet::mirror_bank_b() {
  for (const auto& layer : bn_layer_names()) {
    for (auto field : kBnFields) {
      const auto& src = params_.entry(bn_name(layer, Bank::A, field));
      auto& dst = params_.entry(bn_name(layer, Bank::B, field));
      dst.value = src.value;
      dst.velocity = src.velocity;
    }
  }
}

std::string_view aag_input_name(AagInput mode) {
  switch (mode) {
    case AagInput::NoiseOnly:
      return "noise";
    case AagInput::NoiseOneHot:
      return "noise+onehot";
    case AagInput::NoiseLogits:
      return "noise+logits";
  }
  return "?";
}

AagInput parse_aag_input(std::string_view name) {
  if (name == "noise") return AagInput::NoiseOnly;
  if (name == "noise+onehot") return AagInput::NoiseOneHot;
  if (name == "noise+logits") return AagInput::NoiseLogits;
  throw ConfigError("unknown generator input mode '" + std::string(name) +
                    "' (noise, noise+onehot, noise+logits)");
}

AagNet::AagNet(ImageShape image, std::size_t classes, AagInput mode, std::size_t tau,
               std::uint64_t seed)
    : image_(image), classes_(classes), mode_(mode), tau_(tau) {
  if (tau == 0) throw ConfigError("tau must be positive");
  std::mt19937_64 rng(seed);
  const std::size_t widths[] = {tau + cond_width(), 256, 512, 1024, output_width()};
  for (std::size_t i = 0; i < 4; ++i) {
    add_linear_params(params_, "aag.fc" + std::to_string(i + 1), widths[i], widths[i + 1], rng);
  }
}

std::size_t AagNet::cond_width() const { return mode_ == AagInput::NoiseOnly ? 0 : classes_; }

Tensor AagNet::make_input(const Tensor& z, const Tensor* conditioning) const {
  if (z.rank() != 2 || z.dim(1) != tau_) {
    throw ConfigError("noise must be [N," + std::to_string(tau_) + "], got " + shape_str(z.shape()));
  }
  const std::size_t n = z.dim(0), cw = cond_width();
  if (cw == 0) return z;
  if (!conditioning || conditioning->rank() != 2 || conditioning->dim(0) != n ||
      conditioning->dim(1) != cw) {
    throw ConfigError("conditioning must be [N," + std::to_string(cw) + "]");
  }
  Tensor in({n, tau_ + cw});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < tau_; ++i) in[r * (tau_ + cw) + i] = z[r * tau_ + i];
    for (std::size_t i = 0; i < cw; ++i) in[r * (tau_ + cw) + tau_ + i] = (*conditioning)[r * cw + i];
  }
  return in;
}

Var AagNet::forward(Graph& g, Var input) {
  const Tensor& v = g.value(input);
  if (v.rank() != 2 || v.dim(1) != tau_ + cond_width()) {
    throw ConfigError("generator input width mismatch: " + shape_str(v.shape()));
  }
  Var h = input;
  for (std::size_t i = 1; i <= 4; ++i) {
    const std::string name = "aag.fc" + std::to_string(i);
    h = ops::linear(g, h, g.param(params_, name + ".weight"), g.param(params_, name + ".bias"));
    h = i < 4 ? ops::relu(g, h) : ops::sigmoid(g, h);
  }
  return h;
}

Tensor AagNet::forward(const Tensor& z, const Tensor* conditioning) {
  Graph g(false);
  return g.value(forward(g, g.constant(make_input(z, conditioning))));
}

AmplitudeScale::AmplitudeScale(ImageShape image) : image_(image) {}

void AmplitudeScale::update(const Tensor& half_amplitudes) {
  const std::size_t wh = image_.width / 2 + 1;
  const auto& s = half_amplitudes.shape();
  if (s.size() != 4 || s[1] != image_.channels || s[2] != image_.height || s[3] != wh) {
    throw ConfigError("amplitude batch shape mismatch: " + shape_str(s));
  }
  const std::size_t n = s[0], per = image_.half_numel();
  Tensor batch_mean({image_.channels, image_.height, wh});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < per; ++i) batch_mean[i] += half_amplitudes[r * per + i];
  }
  for (auto& v : batch_mean.vec()) v /= static_cast<double>(n);
  if (!initialized_) {
    mean_ = std::move(batch_mean);
    initialized_ = true;
    return;
  }
  for (std::size_t i = 0; i < per; ++i) mean_[i] = (1.0 - kMomentum) * mean_[i] + kMomentum * batch_mean[i];
}

const Tensor& AmplitudeScale::mean() const {
  if (!initialized_) throw ConfigError("amplitude scale used before any update");
  return mean_;
}

void AmplitudeScale::set_mean(Tensor mean) {
  if (mean.shape() != Shape{image_.channels, image_.height, image_.width / 2 + 1}) {
    throw ConfigError("amplitude mean shape mismatch: " + shape_str(mean.shape()));
  }
  mean_ = std::move(mean);
  initialized_ = true;
}

Tensor AmplitudeScale::apply(const Tensor& raw) const {
  Graph g(false);
  return g.value(apply(g, g.constant(raw)));
}

Var AmplitudeScale::apply(Graph& g, Var raw) const {
  const Tensor& m = mean();
  const Tensor& v = g.value(raw);
  const std::size_t per = image_.half_numel();
  if (v.numel() % per != 0 || v.dim(0) * per != v.numel()) {
    throw ConfigError("raw amplitude shape mismatch: " + shape_str(v.shape()));
  }
  const std::size_t n = v.dim(0);
  Tensor factor({n, image_.channels, image_.height, image_.width / 2 + 1});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < per; ++i) factor[r * per + i] = 2.0 * m[i];
  }
  return ops::mul_const(g, ops::reshape(g, raw, factor.shape()), factor);
}

BatchSpectrum decompose_batch(const Tensor& x) {
  if (x.rank() != 4) throw ConfigError("expected [N,C,H,W], got " + shape_str(x.shape()));
  const auto& s = x.shape();
  auto sp = spectral::dft_decompose(x.reshaped({s[0] * s[1], s[2], s[3]}));
  return {sp.amplitude.reshaped(s), sp.phase.reshaped(s)};
}

Tensor half_amplitudes(const Tensor& full_amplitude) {
  const auto& s = full_amplitude.shape();
  if (s.size() != 4) throw ConfigError("expected [N,C,H,W], got " + shape_str(s));
  const std::size_t wh = spectral::half_width(s[3]);
  Tensor out({s[0], s[1], s[2], wh});
  const std::size_t rows = s[0] * s[1] * s[2];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t v = 0; v < wh; ++v) out[r * wh + v] = full_amplitude[r * s[3] + v];
  }
  return out;
}

Tensor conditioning_for(const AagNet& gen, SmallConvNet& net, const Tensor& x,
                        std::span<const int> labels) {
  const std::size_t n = x.dim(0), c = net.classes();
  switch (gen.input_mode()) {
    case AagInput::NoiseOnly:
      return {};
    case AagInput::NoiseOneHot: {
      if (labels.size() != n) throw ContractError("label count does not match batch size");
      Tensor t({n, c});
      for (std::size_t r = 0; r < n; ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= c) {
          throw ContractError("label out of range");
        }
        t[r * c + static_cast<std::size_t>(labels[r])] = 1.0;
      }
      return t;
    }
    case AagInput::NoiseLogits:
      return net.logits(x, Mode::Eval, Bank::A);
  }
  return {};
}

Tensor draw_noise(std::size_t n, std::size_t tau, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor z({n, tau});
  for (auto& v : z.vec()) v = normal(rng);
  return z;
}

Var recombine(Graph& g, const Tensor& x, const BatchSpectrum& spectrum, SmallConvNet& net,
              AagNet& gen, const AmplitudeScale& scale, std::span<const double> lambdas,
              std::span<const int> labels, const Tensor& z) {
  check_image_batch(x, gen.image_shape());
  for (double l : lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw ContractError("lambda must lie in [0,1]");
  }
  const Tensor cond = conditioning_for(gen, net, x, labels);
  const Var input = g.constant(gen.make_input(z, cond.empty() ? nullptr : &cond));
  const Var raw = gen.forward(g, input);
  const Var half = scale.apply(g, raw);
  const Var full = spectral::ops::expand_half(g, half, x.dim(3));
  const Var mixed = spectral::ops::mix(g, full, spectrum.amplitude, lambdas);
  const Var image = spectral::ops::idft_with_phase(g, mixed, spectrum.phase);
  return ops::clamp(g, image, 0.0, 1.0);
}

Tensor build_recombined(const Tensor& x, SmallConvNet& net, AagNet& gen, const AmplitudeScale& scale,
                        std::span<const double> lambdas, std::span<const int> labels,
                        std::mt19937_64& rng) {
  const Tensor z = draw_noise(x.dim(0), gen.tau(), rng);
  Graph g(false);
  return g.value(recombine(g, x, decompose_batch(x), net, gen, scale, lambdas, labels, z));
}

namespace {

double cosine(const Tensor& a, const Tensor& b, bool& degenerate) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) {
    degenerate = true;
    return aa == 0.0 && bb == 0.0 ? 1.0 : 0.0;
  }
  if (a == b) return 1.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

}  // namespace

std::vector<BnSimilarity> bn_parameter_similarity(const SmallConvNet& net) {
  std::vector<BnSimilarity> out;
  const auto& p = net.params();
  for (const auto& layer : net.bn_layer_names()) {
    BnSimilarity s;
    s.layer = layer;
    double* slots[] = {&s.gamma, &s.beta, &s.running_mean, &s.running_var};
    for (std::size_t f = 0; f < 4; ++f) {
      *slots[f] = cosine(p.at(bn_name(layer, Bank::A, kBnFields[f])),
                         p.at(bn_name(layer, Bank::B, kBnFields[f])), s.degenerate);
    }
    out.push_back(s);
  }
  if (out.empty()) throw ContractError("network has no batch-norm layers");
  return out;
}

}  // namespace datk::models

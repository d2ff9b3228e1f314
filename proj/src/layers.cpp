#include "datk/layers.hpp"

#include <cmath>

#include "datk/error.hpp"

namespace datk {

std::string_view bank_name(Bank b) { return b == Bank::A ? "A" : "B"; }

Bank parse_bank(std::string_view name) {
  if (name == "A" || name == "a") return Bank::A;
  if (name == "B" || name == "b") return Bank::B;
  throw ConfigError("unknown batch-norm bank '" + std::string(name) + "'");
}

std::string bn_name(const std::string& layer, Bank bank, std::string_view field) {
  return layer + "." + std::string(bank_name(bank)) + "." + std::string(field);
}

namespace {
Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.vec()) v = dist(rng);
  return t;
}
}  // namespace

void add_conv3x3_params(ParameterSet& params, const std::string& name, std::size_t in_channels,
                        std::size_t out_channels, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * 9));
  params.add(name + ".weight", uniform_tensor({out_channels, in_channels, 3, 3}, bound, rng));
  params.add(name + ".bias", uniform_tensor({out_channels}, bound, rng));
}

void add_linear_params(ParameterSet& params, const std::string& name, std::size_t in_width,
                       std::size_t out_width, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_width));
  params.add(name + ".weight", uniform_tensor({out_width, in_width}, bound, rng));
  params.add(name + ".bias", uniform_tensor({out_width}, bound, rng));
}

void add_batch_norm_params(ParameterSet& params, const std::string& name, std::size_t channels) {
  for (Bank b : {Bank::A, Bank::B}) {
    params.add(bn_name(name, b, "gamma"), Tensor({channels}, 1.0));
    params.add(bn_name(name, b, "beta"), Tensor({channels}, 0.0));
    params.add(bn_name(name, b, "running_mean"), Tensor({channels}, 0.0), false);
    params.add(bn_name(name, b, "running_var"), Tensor({channels}, 1.0), false);
  }
}

Var apply_layer(Graph& g, const LayerSpec& layer, Var input, ParameterSet& params, Mode mode,
                Bank bank) {
  switch (layer.kind) {
    case LayerKind::Conv3x3:
      return ops::conv3x3(g, input, g.param(params, layer.name + ".weight"),
                          g.param(params, layer.name + ".bias"), layer.stride);
    case LayerKind::Linear:
      return ops::linear(g, input, g.param(params, layer.name + ".weight"),
                         g.param(params, layer.name + ".bias"));
    case LayerKind::Relu:
      return ops::relu(g, input);
    case LayerKind::GlobalAvgPool:
      return ops::global_avg_pool(g, input);
    case LayerKind::BatchNorm: {
      ops::BatchNormState st{&params.at(bn_name(layer.name, bank, "running_mean")),
                             &params.at(bn_name(layer.name, bank, "running_var")), kBnMomentum,
                             kBnEps};
      return ops::batch_norm(g, input, g.param(params, bn_name(layer.name, bank, "gamma")),
                             g.param(params, bn_name(layer.name, bank, "beta")), st, mode);
    }
  }
  throw ConfigError("unknown layer kind");
}

}  // namespace datk

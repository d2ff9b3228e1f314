#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <string_view>

#include "datk/graph.hpp"
#include "datk/params.hpp"

namespace datk {

// Each batch-norm layer owns two independent banks of {gamma, beta,
// running_mean, running_var}; a forward call selects one.
enum class Bank { A, B };

std::string_view bank_name(Bank b);
Bank parse_bank(std::string_view name);

enum class LayerKind { Conv3x3, Linear, Relu, GlobalAvgPool, BatchNorm };

struct LayerSpec {
  LayerKind kind;
  std::string name;  // parameter prefix; unused for relu and pooling
  std::size_t stride = 1;
};

inline constexpr double kBnMomentum = 0.1;
inline constexpr double kBnEps = 1e-5;

// "<layer>.<bank>.<field>", field in {gamma, beta, running_mean, running_var}.
std::string bn_name(const std::string& layer, Bank bank, std::string_view field);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
void add_conv3x3_params(ParameterSet& params, const std::string& name, std::size_t in_channels,
                        std::size_t out_channels, std::mt19937_64& rng);
void add_linear_params(ParameterSet& params, const std::string& name, std::size_t in_width,
                       std::size_t out_width, std::mt19937_64& rng);
// gamma=1, beta=0, mean=0, var=1 in both banks.
void add_batch_norm_params(ParameterSet& params, const std::string& name, std::size_t channels);

// Runs one layer. Batch norm in train mode updates the running statistics of
// `bank` only (params is mutated for that reason); every other combination
// leaves params untouched.
Var apply_layer(Graph& g, const LayerSpec& layer, Var input, ParameterSet& params, Mode mode,
                Bank bank);

}  // namespace datk

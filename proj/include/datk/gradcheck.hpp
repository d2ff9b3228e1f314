#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "datk/graph.hpp"
#include "datk/params.hpp"
#include "datk/tensor.hpp"

namespace datk::gradcheck {

inline constexpr double kTolerance = 1e-3;
inline constexpr double kStep = 1e-6;
// Coordinates sampled per checked tensor.
inline constexpr std::size_t kCoordsPerTensor = 24;

struct CheckResult {
  std::string name;
  double rel_error = 0.0;
  bool passed = false;
};

// Compares backward() gradients of a scalar built from input leaves against
// central differences on a random subset of coordinates.
using LeafBuilder = std::function<Var(Graph&, const std::vector<Var>&)>;
CheckResult check_inputs(const std::string& name, const LeafBuilder& build,
                         const std::vector<Tensor>& leaves, std::mt19937_64& rng);

// Same for named entries of a parameter set referenced through g.param().
using ParamBuilder = std::function<Var(Graph&)>;
CheckResult check_params(const std::string& name, const ParamBuilder& build, ParameterSet& params,
                         const std::vector<std::string>& names, std::mt19937_64& rng);

// Every layer kind, spectral op, loss, the input gradient of L_AE through
// the classifier, and the generator path, for one seed.
std::vector<CheckResult> run_suite(std::uint64_t seed);

}  // namespace datk::gradcheck

#pragma once

#include <cstddef>
#include <optional>
#include <random>

#include "datk/attacks.hpp"
#include "datk/data.hpp"
#include "datk/layers.hpp"
#include "datk/models.hpp"

namespace datk::eval {

inline constexpr std::size_t kEvalBatch = 64;

// Fraction of argmax-correct predictions in eval mode; with an attack, the
// predictions are taken on the attack outputs. Throws ContractError on an
// empty dataset.
double evaluate_accuracy(models::SmallConvNet& net, const data::Dataset& data,
                         const std::optional<attacks::AttackConfig>& attack, Bank bank,
                         std::mt19937_64& rng);

// FGSM accuracy at radius epsilon.
double evaluate_fgsm_accuracy(models::SmallConvNet& net, const data::Dataset& data,
                              double epsilon, Bank bank);

// Index of the largest logit per row.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace datk::eval

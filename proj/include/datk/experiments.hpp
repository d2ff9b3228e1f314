#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "datk/attacks.hpp"
#include "datk/data.hpp"
#include "datk/models.hpp"
#include "datk/trainer.hpp"

namespace datk::experiments {

// Three evaluation sets derived from one benign set and its AEs:
//   d_ae  = x'
//   d_amp = IDFT(A(x'), P(x))   adversarial amplitude, benign phase
//   d_pha = IDFT(A(x), P(x'))   benign amplitude, adversarial phase
// All clamped to [0,1]; labels carried over.
struct EvalSplits {
  data::Dataset d_ae;
  data::Dataset d_amp;
  data::Dataset d_pha;
};

EvalSplits build_eval_splits(const data::Dataset& test_set, models::SmallConvNet& net,
                             const attacks::AttackConfig& attack, std::mt19937_64& rng,
                             Bank bank = Bank::A);

// IDFT(lambda * A(distractor) + (1 - lambda) * A(x), P(x)), clamped, with
// lambda ~ U(0,1) per sample and distractors drawn from `pool`.
Tensor amplitude_mix_batch(const Tensor& images, const data::Dataset& pool, std::mt19937_64& rng);

struct MotivationConfig {
  trainer::TrainConfig train;
  attacks::AttackConfig eval_attack = attacks::pgd_config(8.0 / 255.0, 2.0 / 255.0, 10);
  std::uint64_t seed = 0;
};

struct MotivationRow {
  std::string model;  // standard, robust, perturbed
  double natural = 0.0;
  double d_ae = 0.0;
  double d_amp = 0.0;
  double d_pha = 0.0;
};

// Trains a standard model, a PGD-AT model, and a PGD-AT model on
// amplitude-mixed data (distractors re-drawn every batch), then evaluates
// each on the benign test set and its three splits.
std::vector<MotivationRow> motivation_experiment(const data::Dataset& train_set,
                                                 const data::Dataset& test_set,
                                                 const MotivationConfig& cfg);

// Linear softmax over features split into a phase-like and an
// amplitude-like block. Both blocks carry the same class means; training
// samples add N(0, sigma_p2) to the phase block and N(0, sigma_a2) to the
// amplitude block, fresh every step.
struct Theorem1Task {
  std::size_t block_dim = 8;
  std::size_t classes = 3;
  std::size_t samples = 240;
  double sigma_p2 = 0.25;
  double sigma_a2 = 25.0;
  std::uint64_t seed = 0;
};

struct Theorem1Result {
  double ratio = 0.0;  // ||W_amp|| / ||W_phase||
  double final_loss = 0.0;
};

// Full-batch gradient descent on mean cross-entropy from zero weights.
// Throws ConfigError when sigma_a2 < sigma_p2 or a variance is not positive,
// NumericalError when the loss diverges.
Theorem1Result theorem1_experiment(const Theorem1Task& task, int steps, double lr);

}  // namespace datk::experiments

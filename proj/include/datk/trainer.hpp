#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "datk/attacks.hpp"
#include "datk/data.hpp"
#include "datk/models.hpp"

namespace datk::trainer {

enum class Method { Standard, PgdAt, Trades, Dat };
enum class AeMode { Dual, Single };
// Objective applied to both branches when a generator is attached.
enum class AagWith { Dat, PgdAt, Trades };

std::string_view method_name(Method m);
Method parse_method(std::string_view s);
std::string_view ae_mode_name(AeMode m);
AeMode parse_ae_mode(std::string_view s);
std::string_view aag_with_name(AagWith m);
AagWith parse_aag_with(std::string_view s);

struct LrPoint {
  int epoch = 0;
  double lr = 0.1;
  friend bool operator==(const LrPoint&, const LrPoint&) = default;
};

// 120-epoch step schedule; desk runs default to the shorter one below.
std::vector<LrPoint> long_lr_schedule();
std::vector<LrPoint> desk_lr_schedule();

// Value of the last entry whose epoch is <= `epoch`. Throws ConfigError on
// an empty schedule or one that does not start at epoch 0.
double lr_at(const std::vector<LrPoint>& schedule, int epoch);

struct TrainConfig {
  Method method = Method::Dat;
  int epochs = 30;
  std::size_t batch_size = 32;
  std::vector<LrPoint> lr_schedule = desk_lr_schedule();
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // Training-time attack radius, step and step count, shared by every
  // method. The loss and initialization follow the method: uniform-init PGD
  // for PGD-AT, gaussian-init KL ascent for TRADES, gaussian-init EAEG for DAT.
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  int attack_steps = 5;
  double beta = 15.0;
  double omega = 2.0;
  double aag_lr = 0.1;
  std::size_t tau = models::kDefaultTau;
  double lambda_max = 1.0;
  AeMode ae_mode = AeMode::Dual;
  models::AagInput aag_input = models::AagInput::NoiseLogits;
  AagWith aag_with = AagWith::Dat;
  std::uint64_t seed = 0;

  // The attack used to craft training examples for `objective`.
  attacks::AttackConfig training_attack(AagWith objective) const;
  // Throws ConfigError naming the first invalid field.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double at_benign = 0.0;
  double at_recombined = 0.0;
  double js = 0.0;
  double natural_acc = 0.0;
  std::optional<double> pgd_acc;
  double wall_seconds = 0.0;
};

// Loss of one DAT batch re-evaluated after each half of the update, with the
// batch, attacks, z and lambda held fixed.
struct MinMaxProbe {
  std::size_t batch = 0;
  double before = 0.0;
  double after_psi = 0.0;
  double after_theta = 0.0;
};

struct TrainHooks {
  // Called at "batch_start", "benign_done" and "recombined_done" inside every
  // split-bank batch.
  std::function<void(std::string_view stage, const models::SmallConvNet&)> stage;
  // When set, every split-bank batch with index < probe_batches is probed.
  std::function<void(const MinMaxProbe&)> probe;
  std::size_t probe_batches = 0;
  // Per-epoch evaluation set; pgd_acc is filled when eval_pgd_steps > 0.
  const data::Dataset* eval_set = nullptr;
  int eval_pgd_steps = 0;
  std::function<void(const EpochMetrics&)> on_epoch;
  // Single-bank methods only: replaces each batch's images before the
  // attack runs. Draws must come from the passed generator.
  std::function<Tensor(const Tensor& images, std::mt19937_64& rng)> augment;
};

struct TrainResult {
  std::vector<EpochMetrics> epochs;
};

// Generator state trained alongside the classifier.
struct AagState {
  models::AagNet gen;
  models::AmplitudeScale scale;
};
AagState make_aag(const models::ImageShape& image, std::size_t classes, const TrainConfig& cfg);

TrainResult train_standard(const data::Dataset& data, models::SmallConvNet& net,
                           const TrainConfig& cfg, const TrainHooks& hooks = {});
TrainResult train_pgd_at(const data::Dataset& data, models::SmallConvNet& net,
                         const TrainConfig& cfg, const TrainHooks& hooks = {});
TrainResult train_trades(const data::Dataset& data, models::SmallConvNet& net,
                         const TrainConfig& cfg, const TrainHooks& hooks = {});
TrainResult train_dat(const data::Dataset& data, models::SmallConvNet& net, AagState& aag,
                      const TrainConfig& cfg, const TrainHooks& hooks = {});
// Generator attached to the PGD-AT or TRADES objective (cfg.aag_with).
TrainResult train_with_aag_baseline(const data::Dataset& data, models::SmallConvNet& net,
                                    AagState& aag, const TrainConfig& cfg,
                                    const TrainHooks& hooks = {});

// Dispatch on cfg.method; `aag` is required for dat.
TrainResult train(const data::Dataset& data, models::SmallConvNet& net, AagState* aag,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace datk::trainer

#include "datk/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "datk/error.hpp"
#include "datk/eval.hpp"
#include "datk/losses.hpp"
#include "datk/optim.hpp"
#include "datk/spectral.hpp"

namespace datk::trainer {

using models::AagNet;
using models::SmallConvNet;

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Standard:
      return "standard";
    case Method::PgdAt:
      return "pgd-at";
    case Method::Trades:
      return "trades";
    case Method::Dat:
      return "dat";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  if (s == "standard") return Method::Standard;
  if (s == "pgd-at") return Method::PgdAt;
  if (s == "trades") return Method::Trades;
  if (s == "dat") return Method::Dat;
  throw ConfigError("unknown method '" + std::string(s) + "' (standard, pgd-at, trades, dat)");
}

std::string_view ae_mode_name(AeMode m) { return m == AeMode::Dual ? "dual" : "single"; }

AeMode parse_ae_mode(std::string_view s) {
  if (s == "dual") return AeMode::Dual;
  if (s == "single") return AeMode::Single;
  throw ConfigError("unknown ae mode '" + std::string(s) + "' (dual, single)");
}

std::string_view aag_with_name(AagWith m) {
  switch (m) {
    case AagWith::Dat:
      return "dat";
    case AagWith::PgdAt:
      return "pgd-at";
    case AagWith::Trades:
      return "trades";
  }
  return "?";
}

AagWith parse_aag_with(std::string_view s) {
  if (s == "dat") return AagWith::Dat;
  if (s == "pgd-at") return AagWith::PgdAt;
  if (s == "trades") return AagWith::Trades;
  throw ConfigError("unknown generator objective '" + std::string(s) + "' (dat, pgd-at, trades)");
}

std::vector<LrPoint> long_lr_schedule() { return {{0, 0.1}, {100, 0.01}, {110, 0.001}}; }
std::vector<LrPoint> desk_lr_schedule() { return {{0, 0.1}, {20, 0.01}, {25, 0.001}}; }

double lr_at(const std::vector<LrPoint>& schedule, int epoch) {
  if (schedule.empty()) throw ConfigError("learning-rate schedule is empty");
  if (schedule.front().epoch != 0) throw ConfigError("learning-rate schedule must start at epoch 0");
  double lr = schedule.front().lr;
  for (const auto& p : schedule) {
    if (p.epoch <= epoch) lr = p.lr;
  }
  return lr;
}

attacks::AttackConfig TrainConfig::training_attack(AagWith objective) const {
  attacks::AttackConfig a;
  a.epsilon = epsilon;
  a.alpha = alpha;
  a.steps = attack_steps;
  a.beta = beta;
  switch (objective) {
    case AagWith::PgdAt:
      a.loss_kind = attacks::LossKind::CeOnly;
      a.init = attacks::Init::UniformEps;
      break;
    case AagWith::Trades:
      a.loss_kind = attacks::LossKind::Kl;
      a.init = attacks::Init::Gaussian;
      break;
    case AagWith::Dat:
      a.loss_kind = attacks::LossKind::Eaeg;
      a.init = attacks::Init::Gaussian;
      break;
  }
  return a;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (lr_schedule.empty()) throw ConfigError("lr_schedule is empty");
  if (lr_schedule.front().epoch != 0) throw ConfigError("lr_schedule must start at epoch 0");
  for (std::size_t i = 0; i < lr_schedule.size(); ++i) {
    if (!(lr_schedule[i].lr > 0.0)) throw ConfigError("lr_schedule rates must be positive");
    if (i > 0 && lr_schedule[i].epoch < lr_schedule[i - 1].epoch) {
      throw ConfigError("lr_schedule epochs must be non-decreasing");
    }
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (!(omega >= 0.0)) throw ConfigError("omega must be >= 0");
  if (!(aag_lr > 0.0)) throw ConfigError("aag_lr must be positive");
  if (tau == 0) throw ConfigError("tau must be positive");
  if (!(lambda_max >= 0.0 && lambda_max <= 1.0)) throw ConfigError("lambda_max must lie in [0,1]");
  training_attack(AagWith::Dat).validate();
}

AagState make_aag(const models::ImageShape& image, std::size_t classes, const TrainConfig& cfg) {
  return {AagNet(image, classes, cfg.aag_input, cfg.tau, cfg.seed ^ 0x9e3779b97f4a7c15ULL),
          models::AmplitudeScale(image)};
}

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch_size) {
    const std::size_t e = std::min(n, b + batch_size);
    if (e - b < 2) break;
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return out;
}

SgdOptions theta_options(const TrainConfig& cfg, int epoch) {
  return {lr_at(cfg.lr_schedule, epoch), cfg.momentum, cfg.weight_decay, Direction::Descent};
}

SgdOptions psi_options(const TrainConfig& cfg) {
  return {cfg.aag_lr, cfg.momentum, cfg.weight_decay, Direction::Ascent};
}

void check_data(const data::Dataset& data, const SmallConvNet& net) {
  if (data.empty()) throw ConfigError("training set is empty");
  if (!(data.image_shape() == net.input_shape())) throw ConfigError("dataset and model image shapes differ");
}

void finish_epoch(EpochMetrics& m, SmallConvNet& net, const data::Dataset& train_set,
                  const TrainConfig& cfg, const TrainHooks& hooks, Clock::time_point start) {
  const data::Dataset& eval_set = hooks.eval_set ? *hooks.eval_set : train_set;
  std::mt19937_64 eval_rng(cfg.seed + 7919ULL * static_cast<std::uint64_t>(m.epoch + 1));
  m.natural_acc = eval::evaluate_accuracy(net, eval_set, std::nullopt, Bank::A, eval_rng);
  if (hooks.eval_set && hooks.eval_pgd_steps > 0) {
    const auto pgd = attacks::pgd_config(cfg.epsilon, cfg.alpha, hooks.eval_pgd_steps);
    m.pgd_acc = eval::evaluate_accuracy(net, eval_set, pgd, Bank::A, eval_rng);
  }
  m.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (hooks.on_epoch) hooks.on_epoch(m);
}

[[noreturn]] void abort_batch(int epoch, std::size_t batch, const std::exception& e) {
  throw NumericalError("non-finite value in epoch " + std::to_string(epoch) + " batch " +
                       std::to_string(batch) + ": " + e.what());
}

// Single-bank methods: standard, PGD-AT, TRADES.
TrainResult train_single_bank(const data::Dataset& data, SmallConvNet& net, const TrainConfig& cfg,
                              const TrainHooks& hooks, Method method) {
  cfg.validate();
  check_data(data, net);
  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  const auto names = net.trainable_names(false);
  const AagWith objective = method == Method::Trades ? AagWith::Trades : AagWith::PgdAt;
  const auto attack = cfg.training_attack(objective);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = Clock::now();
    EpochMetrics m;
    m.epoch = epoch;
    const auto batches = epoch_batches(data.size(), cfg.batch_size, rng);
    const SgdOptions opts = theta_options(cfg, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      data::Dataset batch = data.subset(batches[b]);
      if (hooks.augment) batch.images = hooks.augment(batch.images, rng);
      try {
        Tensor x_adv;
        if (method != Method::Standard) {
          x_adv = attacks::run_attack(batch.images, batch.labels, attacks::eval_logits(net, Bank::A),
                                      attack, rng);
        }
        Graph g;
        Var loss;
        if (method == Method::Standard) {
          loss = losses::cross_entropy(g, net.forward(g, g.constant(batch.images), Mode::Train, Bank::A),
                                       batch.labels);
        } else if (method == Method::PgdAt) {
          loss = losses::cross_entropy(g, net.forward(g, g.constant(x_adv), Mode::Train, Bank::A),
                                       batch.labels);
        } else {
          const Var lx = net.forward(g, g.constant(batch.images), Mode::Train, Bank::A);
          const Var la = net.forward(g, g.constant(x_adv), Mode::Train, Bank::A);
          loss = losses::loss_trades(g, lx, la, batch.labels, cfg.beta);
        }
        const double value = g.value(loss)[0];
        const GradientRecord grads = g.backward(loss);
        sgd_momentum_step(net.params(), grads, names, opts);
        m.train_loss += value;
        m.at_benign += value;
      } catch (const NumericalError& e) {
        abort_batch(epoch, b, e);
      }
    }
    if (!batches.empty()) {
      m.train_loss /= static_cast<double>(batches.size());
      m.at_benign /= static_cast<double>(batches.size());
    }
    finish_epoch(m, net, data, cfg, hooks, start);
    result.epochs.push_back(m);
  }
  net.mirror_bank_b();
  return result;
}

// Everything one split-bank batch needs besides parameters. Held fixed when a
// batch is re-evaluated for the min-max probe.
struct SplitBatch {
  Tensor x;
  std::vector<int> y;
  Tensor x_adv;
  models::BatchSpectrum spectrum;
  models::BatchSpectrum adv_spectrum;  // single-AE mode only
  Tensor z;
  std::vector<double> lambdas;
  // Dual mode: the recombined AE (DAT) or its perturbation (baselines).
  Tensor xhat_adv;
  Tensor xhat_delta;
};

struct SplitLosses {
  Var total;
  Var at_benign;
  Var at_recombined;
  Var js;
};

using StageFn = std::function<void(std::string_view, const SmallConvNet&)>;

SplitLosses split_loss(Graph& g, const SplitBatch& in, SmallConvNet& net, AagState& aag,
                       const TrainConfig& cfg, AagWith objective, const StageFn& stage) {
  const Var xhat = models::recombine(g, in.x, in.spectrum, net, aag.gen, aag.scale, in.lambdas, in.y, in.z);
  Var xhat_adv;
  if (cfg.ae_mode == AeMode::Single) {
    xhat_adv = models::recombine(g, in.x_adv, in.adv_spectrum, net, aag.gen, aag.scale, in.lambdas,
                                 in.y, in.z);
  } else if (objective == AagWith::Dat) {
    xhat_adv = g.constant(in.xhat_adv);
  } else {
    xhat_adv = ops::add(g, xhat, g.constant(in.xhat_delta));
  }

  if (stage) stage("batch_start", net);
  Var lx, la, lh, lha;
  if (objective != AagWith::PgdAt) lx = net.forward(g, g.constant(in.x), Mode::Train, Bank::A);
  la = net.forward(g, g.constant(in.x_adv), Mode::Train, Bank::A);
  if (stage) stage("benign_done", net);
  if (objective != AagWith::PgdAt) lh = net.forward(g, xhat, Mode::Train, Bank::B);
  lha = net.forward(g, xhat_adv, Mode::Train, Bank::B);
  if (stage) stage("recombined_done", net);

  SplitLosses out;
  switch (objective) {
    case AagWith::Dat: {
      const auto d = losses::loss_dat(g, lx, la, lh, lha, in.y, cfg.beta, cfg.omega);
      return {d.total, d.at_benign, d.at_recombined, d.js};
    }
    case AagWith::PgdAt:
      out.at_benign = losses::cross_entropy(g, la, in.y);
      out.at_recombined = losses::cross_entropy(g, lha, in.y);
      break;
    case AagWith::Trades:
      out.at_benign = losses::loss_trades(g, lx, la, in.y, cfg.beta);
      out.at_recombined = losses::loss_trades(g, lh, lha, in.y, cfg.beta);
      break;
  }
  out.js = g.constant(Tensor({1}));
  out.total = ops::scale(g, ops::add(g, out.at_benign, out.at_recombined), 0.5);
  return out;
}

double split_loss_value(const SplitBatch& in, SmallConvNet net, AagState aag,
                        const TrainConfig& cfg, AagWith objective) {
  Graph g(false);
  return g.value(split_loss(g, in, net, aag, cfg, objective, {}).total)[0];
}

TrainResult train_split_bank(const data::Dataset& data, SmallConvNet& net, AagState& aag,
                             const TrainConfig& cfg, const TrainHooks& hooks, AagWith objective) {
  cfg.validate();
  check_data(data, net);
  if (!(aag.gen.image_shape() == net.input_shape())) throw ConfigError("generator and model image shapes differ");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> lambda_dist(0.0, cfg.lambda_max);
  TrainResult result;
  const auto theta_names = net.trainable_names(true);
  const auto psi_names = aag.gen.trainable_names();
  const auto attack = cfg.training_attack(objective);
  std::size_t global_batch = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = Clock::now();
    EpochMetrics m;
    m.epoch = epoch;
    const auto batches = epoch_batches(data.size(), cfg.batch_size, rng);
    const SgdOptions theta_opts = theta_options(cfg, epoch);
    const SgdOptions psi_opts = psi_options(cfg);
    for (std::size_t b = 0; b < batches.size(); ++b, ++global_batch) {
      const data::Dataset batch = data.subset(batches[b]);
      try {
        SplitBatch in;
        in.x = batch.images;
        in.y = batch.labels;
        in.x_adv = attacks::run_attack(in.x, in.y, attacks::eval_logits(net, Bank::A), attack, rng);
        in.spectrum = models::decompose_batch(in.x);
        aag.scale.update(models::half_amplitudes(in.spectrum.amplitude));
        in.z = models::draw_noise(in.x.dim(0), aag.gen.tau(), rng);
        in.lambdas.resize(in.x.dim(0));
        for (auto& l : in.lambdas) l = cfg.lambda_max > 0.0 ? lambda_dist(rng) : 0.0;
        if (cfg.ae_mode == AeMode::Single) {
          in.adv_spectrum = models::decompose_batch(in.x_adv);
        } else {
          Graph pre(false);
          const Tensor xhat = pre.value(models::recombine(pre, in.x, in.spectrum, net, aag.gen, aag.scale,
                                                          in.lambdas, in.y, in.z));
          in.xhat_adv = attacks::run_attack(xhat, in.y, attacks::eval_logits(net, Bank::B), attack, rng);
          in.xhat_delta = Tensor(xhat.shape());
          for (std::size_t i = 0; i < xhat.numel(); ++i) in.xhat_delta[i] = in.xhat_adv[i] - xhat[i];
        }

        const bool probing = hooks.probe && global_batch < hooks.probe_batches;
        std::optional<SmallConvNet> net_before;
        std::optional<AagState> aag_before;
        if (probing) {
          net_before.emplace(net);
          aag_before.emplace(aag);
        }

        Graph g;
        const SplitLosses l = split_loss(g, in, net, aag, cfg, objective, hooks.stage);
        const double total = g.value(l.total)[0];
        m.train_loss += total;
        m.at_benign += g.value(l.at_benign)[0];
        m.at_recombined += g.value(l.at_recombined)[0];
        m.js += g.value(l.js)[0];
        const GradientRecord grads = g.backward(l.total);
        sgd_momentum_step(net.params(), grads, theta_names, theta_opts);
        sgd_momentum_step(aag.gen.params(), grads, psi_names, psi_opts);

        if (probing) {
          MinMaxProbe p;
          p.batch = global_batch;
          p.before = total;
          p.after_psi = split_loss_value(in, *net_before, aag, cfg, objective);
          p.after_theta = split_loss_value(in, net, *aag_before, cfg, objective);
          hooks.probe(p);
        }
      } catch (const NumericalError& e) {
        abort_batch(epoch, b, e);
      }
    }
    if (!batches.empty()) {
      const double n = static_cast<double>(batches.size());
      m.train_loss /= n;
      m.at_benign /= n;
      m.at_recombined /= n;
      m.js /= n;
    }
    finish_epoch(m, net, data, cfg, hooks, start);
    result.epochs.push_back(m);
  }
  return result;
}

}  // namespace

TrainResult train_standard(const data::Dataset& data, SmallConvNet& net, const TrainConfig& cfg,
                           const TrainHooks& hooks) {
  return train_single_bank(data, net, cfg, hooks, Method::Standard);
}

TrainResult train_pgd_at(const data::Dataset& data, SmallConvNet& net, const TrainConfig& cfg,
                         const TrainHooks& hooks) {
  return train_single_bank(data, net, cfg, hooks, Method::PgdAt);
}

TrainResult train_trades(const data::Dataset& data, SmallConvNet& net, const TrainConfig& cfg,
                         const TrainHooks& hooks) {
  return train_single_bank(data, net, cfg, hooks, Method::Trades);
}

TrainResult train_dat(const data::Dataset& data, SmallConvNet& net, AagState& aag,
                      const TrainConfig& cfg, const TrainHooks& hooks) {
  return train_split_bank(data, net, aag, cfg, hooks, AagWith::Dat);
}

TrainResult train_with_aag_baseline(const data::Dataset& data, SmallConvNet& net, AagState& aag,
                                    const TrainConfig& cfg, const TrainHooks& hooks) {
  if (cfg.aag_with == AagWith::Dat) throw ConfigError("aag baseline needs aag_with pgd-at or trades");
  return train_split_bank(data, net, aag, cfg, hooks, cfg.aag_with);
}

TrainResult train(const data::Dataset& data, SmallConvNet& net, AagState* aag,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
  switch (cfg.method) {
    case Method::Standard:
      return train_standard(data, net, cfg, hooks);
    case Method::PgdAt:
      return train_pgd_at(data, net, cfg, hooks);
    case Method::Trades:
      return train_trades(data, net, cfg, hooks);
    case Method::Dat:
      if (!aag) throw ConfigError("dat training needs a generator");
      return cfg.aag_with == AagWith::Dat ? train_dat(data, net, *aag, cfg, hooks)
                                          : train_with_aag_baseline(data, net, *aag, cfg, hooks);
  }
  throw ConfigError("unknown method");
}

}  // namespace datk::trainer

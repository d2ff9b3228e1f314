#include "datk/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "datk/error.hpp"
#include "datk/eval.hpp"
#include "datk/spectral.hpp"

namespace datk::experiments {

namespace {

// Recombines per-sample amplitude and phase batches [N,C,H,W] into clamped images.
Tensor recombine_batch(const Tensor& amplitude, const Tensor& phase) {
  const auto& s = amplitude.shape();
  const Shape planes{s[0] * s[1], s[2], s[3]};
  return spectral::idft_recombine(amplitude.reshaped(planes), phase.reshaped(planes),
                                  {.clamp_to_unit = true})
      .reshaped(s);
}

data::Dataset with_images(const data::Dataset& like, Tensor images) {
  data::Dataset out;
  out.images = std::move(images);
  out.labels = like.labels;
  out.classes = like.classes;
  return out;
}

}  // namespace

EvalSplits build_eval_splits(const data::Dataset& test_set, models::SmallConvNet& net,
                             const attacks::AttackConfig& attack, std::mt19937_64& rng, Bank bank) {
  if (test_set.empty()) throw ContractError("cannot build splits from an empty set");
  attack.validate();
  const auto model = attacks::eval_logits(net, bank);
  Tensor adv(test_set.images.shape());
  const std::size_t per = test_set.images.numel() / test_set.size();
  for (std::size_t begin = 0; begin < test_set.size(); begin += eval::kEvalBatch) {
    const std::size_t count = std::min(eval::kEvalBatch, test_set.size() - begin);
    const data::Dataset batch = test_set.slice(begin, count);
    const Tensor out = attacks::run_attack(batch.images, batch.labels, model, attack, rng);
    std::copy(out.vec().begin(), out.vec().end(), adv.data() + begin * per);
  }
  const auto benign = models::decompose_batch(test_set.images);
  const auto perturbed = models::decompose_batch(adv);
  EvalSplits s;
  s.d_amp = with_images(test_set, recombine_batch(perturbed.amplitude, benign.phase));
  s.d_pha = with_images(test_set, recombine_batch(benign.amplitude, perturbed.phase));
  s.d_ae = with_images(test_set, std::move(adv));
  return s;
}

Tensor amplitude_mix_batch(const Tensor& images, const data::Dataset& pool, std::mt19937_64& rng) {
  if (pool.empty()) throw ContractError("distractor pool is empty");
  const std::size_t n = images.dim(0);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_real_distribution<double> lambda(0.0, 1.0);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = pick(rng);
  const data::Dataset distractors = pool.subset(idx);
  const auto own = models::decompose_batch(images);
  const auto other = models::decompose_batch(distractors.images);
  Tensor mixed(own.amplitude.shape());
  const std::size_t per = mixed.numel() / n;
  for (std::size_t r = 0; r < n; ++r) {
    const double l = lambda(rng);
    for (std::size_t i = r * per; i < (r + 1) * per; ++i) {
      mixed[i] = l * other.amplitude[i] + (1.0 - l) * own.amplitude[i];
    }
  }
  return recombine_batch(mixed, own.phase);
}

std::vector<MotivationRow> motivation_experiment(const data::Dataset& train_set,
                                                 const data::Dataset& test_set,
                                                 const MotivationConfig& cfg) {
  if (train_set.empty() || test_set.empty()) throw ContractError("motivation needs train and test data");
  std::vector<MotivationRow> rows;
  const char* names[] = {"standard", "robust", "perturbed"};
  for (int which = 0; which < 3; ++which) {
    trainer::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.method = which == 0 ? trainer::Method::Standard : trainer::Method::PgdAt;
    models::SmallConvNet net(train_set.image_shape(), train_set.classes, cfg.seed);
    trainer::TrainHooks hooks;
    if (which == 2) {
      hooks.augment = [&train_set](const Tensor& images, std::mt19937_64& rng) {
        return amplitude_mix_batch(images, train_set, rng);
      };
    }
    trainer::train(train_set, net, nullptr, tc, hooks);

    std::mt19937_64 rng(cfg.seed + 104729ULL);
    MotivationRow row;
    row.model = names[which];
    row.natural = eval::evaluate_accuracy(net, test_set, std::nullopt, Bank::A, rng);
    const EvalSplits splits = build_eval_splits(test_set, net, cfg.eval_attack, rng);
    row.d_ae = eval::evaluate_accuracy(net, splits.d_ae, std::nullopt, Bank::A, rng);
    row.d_amp = eval::evaluate_accuracy(net, splits.d_amp, std::nullopt, Bank::A, rng);
    row.d_pha = eval::evaluate_accuracy(net, splits.d_pha, std::nullopt, Bank::A, rng);
    rows.push_back(row);
  }
  return rows;
}

Theorem1Result theorem1_experiment(const Theorem1Task& task, int steps, double lr) {
  if (!(task.sigma_p2 > 0.0) || !(task.sigma_a2 > 0.0)) throw ConfigError("variances must be positive");
  if (task.sigma_a2 < task.sigma_p2) throw ConfigError("amplitude variance must be >= phase variance");
  if (task.block_dim == 0 || task.classes < 2 || task.samples < task.classes) {
    throw ConfigError("degenerate theorem-1 task");
  }
  if (steps < 0 || !(lr > 0.0)) throw ConfigError("steps must be >= 0 and lr positive");
  const std::size_t d = task.block_dim, m = 2 * d, c = task.classes, n = task.samples;
  std::mt19937_64 rng(task.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> means(c * d);
  for (auto& v : means) v = normal(rng);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % c);

  const double sp = std::sqrt(task.sigma_p2), sa = std::sqrt(task.sigma_a2);
  std::vector<double> w(m * c, 0.0), b(c, 0.0), feats(n * m), gw(m * c), gb(c), p(c);
  Theorem1Result result;
  for (int step = 0; step < steps; ++step) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* mu = means.data() + static_cast<std::size_t>(labels[i]) * d;
      for (std::size_t j = 0; j < d; ++j) feats[i * m + j] = mu[j] + sp * normal(rng);
      for (std::size_t j = 0; j < d; ++j) feats[i * m + d + j] = mu[j] + sa * normal(rng);
    }
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* f = feats.data() + i * m;
      for (std::size_t k = 0; k < c; ++k) {
        p[k] = b[k];
        for (std::size_t j = 0; j < m; ++j) p[k] += f[j] * w[j * c + k];
      }
      const double mx = *std::max_element(p.begin(), p.end());
      double s = 0.0;
      for (auto& v : p) s += (v = std::exp(v - mx));
      for (auto& v : p) v /= s;
      loss -= std::log(std::max(p[static_cast<std::size_t>(labels[i])], 1e-300));
      for (std::size_t k = 0; k < c; ++k) {
        const double e = p[k] - (static_cast<int>(k) == labels[i] ? 1.0 : 0.0);
        gb[k] += e;
        for (std::size_t j = 0; j < m; ++j) gw[j * c + k] += f[j] * e;
      }
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss) || loss > 1e6) {
      throw NumericalError("theorem-1 training diverged at step " + std::to_string(step) +
                           "; lower the learning rate");
    }
    result.final_loss = loss;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i] / static_cast<double>(n);
    for (std::size_t k = 0; k < c; ++k) b[k] -= lr * gb[k] / static_cast<double>(n);
  }
  double np = 0.0, na = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < c; ++k) {
      np += w[j * c + k] * w[j * c + k];
      na += w[(d + j) * c + k] * w[(d + j) * c + k];
    }
  }
  result.ratio = np > 0.0 ? std::sqrt(na / np) : 1.0;
  return result;
}

}  // namespace datk::experiments

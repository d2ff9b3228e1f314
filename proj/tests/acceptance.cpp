// Acceptance suite. Prints one PASS/FAIL line per criterion; arguments
// restrict the run to the listed criterion numbers.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "datk/attacks.hpp"
#include "datk/cli.hpp"
#include "datk/data.hpp"
#include "datk/eval.hpp"
#include "datk/experiments.hpp"
#include "datk/gradcheck.hpp"
#include "datk/io.hpp"
#include "datk/losses.hpp"
#include "datk/models.hpp"
#include "datk/spectral.hpp"
#include "datk/trainer.hpp"
#include "oracle.hpp"

using namespace datk;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Tensor image_of(const Tensor& batch, std::size_t i) {
  const auto& s = batch.shape();
  return batch.rows(i, 1).reshaped({s[1], s[2], s[3]});
}

// Synthetic task shared by the training criteria: the label lives in the
// phase template, with a weaker class tilt in the amplitude.
data::SyntheticSpec task_spec() {
  data::SyntheticSpec spec;
  spec.phase_noise = 1.0;
  spec.amplitude_cue = 0.5;
  return spec;
}

constexpr std::uint64_t kTestSalt = 0x5851f42d4c957f2dULL;

Outcome spectral_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  double round_trip = 0.0, parseval = 0.0, paths = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Tensor x = oracle::uniform({3, 32, 32}, rng);
    const auto sp = spectral::dft_decompose(x);
    round_trip = std::max(round_trip, max_abs_diff(spectral::idft_recombine(sp.amplitude, sp.phase), x));
    double e_x = 0.0, e_f = 0.0;
    for (double v : x.vec()) e_x += v * v;
    for (double a : sp.amplitude.vec()) e_f += a * a;
    parseval = std::max(parseval, std::abs(e_f / 1024.0 - e_x) / e_x);
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<spectral::Complex> direct(1024), fast(1024);
      for (std::size_t j = 0; j < 1024; ++j) direct[j] = fast[j] = x[c * 1024 + j];
      spectral::transform_plane(direct, 32, 32, false, spectral::DftPath::Direct);
      spectral::transform_plane(fast, 32, 32, false, spectral::DftPath::Fast);
      for (std::size_t j = 0; j < 1024; ++j) paths = std::max(paths, std::abs(direct[j] - fast[j]));
    }
  }
  const double secs = seconds_since(t0);
  return {round_trip < 1e-4 && parseval < 1e-6 && paths < 1e-8 && secs < 10.0,
          fmt("round trip %.2e, Parseval %.2e, direct vs fast %.2e, %.1fs", round_trip, parseval, paths, secs)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (std::size_t side : {4, 8}) {
    for (int i = 0; i < 50; ++i) {
      const Tensor x = oracle::uniform({3, side, side}, rng);
      const auto sp = spectral::dft_decompose(x);
      const auto ref = oracle::dft(x);
      for (std::size_t j = 0; j < ref.size(); ++j) {
        worst = std::max(worst, std::abs(sp.amplitude[j] - std::abs(ref[j])));
        worst = std::max(worst, std::abs(std::polar(sp.amplitude[j], sp.phase[j]) - ref[j]));
      }
    }
  }
  return {worst < 1e-8, fmt("max deviation %.2e", worst)};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  std::size_t total = 0, failed = 0;
  double worst = 0.0;
  std::string first_failure;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& r : gradcheck::run_suite(seed)) {
      ++total;
      worst = std::max(worst, r.rel_error);
      if (!r.passed && failed++ == 0) first_failure = r.name;
    }
  }
  const double secs = seconds_since(t0);
  std::string detail = fmt("%zu/%zu checks, worst %.2e, %.1fs", total - failed, total, worst, secs);
  if (failed) detail += ", first failure: " + first_failure;
  return {failed == 0 && worst <= 1e-3 && secs < 60.0, detail};
}

Outcome divergence_oracles() {
  auto row = [](std::vector<double> v) { return Tensor({1, v.size()}, v); };
  const double ln2 = std::numbers::ln2;
  double err = 0.0;
  err = std::max(err, std::abs(losses::kl_divergence(row({1, 0}), row({0.5, 0.5})) - ln2));
  err = std::max(err, std::abs(losses::kl_divergence(row({0.5, 0.5}), row({0.25, 0.75})) - 0.143841));
  err = std::max(err, std::abs(losses::js_divergence(row({1, 0}), row({0, 1})) - ln2));
  bool symmetric = true;
  double zero = 0.0;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Tensor p = losses::softmax(oracle::uniform({4, 6}, rng, -4, 4));
    const Tensor q = losses::softmax(oracle::uniform({4, 6}, rng, -4, 4));
    symmetric = symmetric && losses::js_divergence(p, q) == losses::js_divergence(q, p);
    zero = std::max({zero, std::abs(losses::kl_divergence(p, p)), std::abs(losses::js_divergence(p, p))});
  }
  return {err < 1e-6 && symmetric && zero < 1e-9,
          fmt("hand-value error %.2e, JS symmetric %s, equal-input max %.2e", err, symmetric ? "yes" : "no", zero)};
}

Outcome attack_feasibility() {
  const models::ImageShape shape{3, 8, 8};
  models::SmallConvNet net(shape, 4, 5);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> steps(0, 5), label(0, 3);
  std::size_t violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const Tensor x = oracle::uniform({2, 3, 8, 8}, rng);
    const std::vector<int> y = {label(rng), label(rng)};
    attacks::AttackConfig cfg;
    cfg.epsilon = 16.0 / 255.0 * u(rng);
    cfg.alpha = 4.0 / 255.0 * u(rng) + 1e-4;
    cfg.steps = steps(rng);
    cfg.beta = 20.0 * u(rng);
    cfg.loss_kind = static_cast<attacks::LossKind>(i % 3);
    cfg.init = static_cast<attacks::Init>((i / 3) % 2);
    const Tensor adv = attacks::run_attack(x, y, attacks::eval_logits(net, Bank::A), cfg, rng);
    bool ok = max_abs_diff(adv, x) <= cfg.epsilon + 1e-6;
    for (double v : adv.vec()) ok = ok && v >= 0.0 && v <= 1.0;
    violations += !ok;
  }
  std::size_t mismatches = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor x = oracle::uniform({4, 3, 8, 8}, rng);
    const std::vector<int> y = {0, 1, 2, 3};
    auto e = attacks::eaeg_config(8.0 / 255.0, 2.0 / 255.0, 0.0, 5);
    auto p = attacks::pgd_config(8.0 / 255.0, 2.0 / 255.0, 5);
    p.init = attacks::Init::Gaussian;
    std::mt19937_64 r1(s), r2(s);
    mismatches += attacks::eaeg(x, y, attacks::eval_logits(net, Bank::A), e, r1) !=
                  attacks::pgd(x, y, attacks::eval_logits(net, Bank::A), p, r2);
  }
  return {violations == 0 && mismatches == 0,
          fmt("%zu/1000 infeasible, %zu/10 eaeg(beta=0) != pgd trajectories", violations, mismatches)};
}

Outcome phase_preservation() {
  const models::ImageShape shape{3, 16, 16};
  data::SyntheticSpec spec = task_spec();
  const auto ds = data::make_synthetic_dataset(spec, 5, 6);  // 20 images
  models::SmallConvNet net(shape, 4, 6);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto sp = models::decompose_batch(ds.images);
  models::AmplitudeScale scale(shape);
  scale.update(models::half_amplitudes(sp.amplitude));
  double worst = 0.0;
  std::size_t samples = 0, clamp_mismatch = 0;
  for (int round = 0; round < 5; ++round) {
    models::AagNet gen(shape, 4, models::AagInput::NoiseLogits, 16, 100 + round);
    for (auto& e : gen.params().entries()) {
      for (auto& v : e.value.vec()) v += 0.5 * normal(rng);
    }
    std::vector<double> lam(ds.size());
    for (auto& l : lam) l = u(rng);
    const Tensor z = models::draw_noise(ds.size(), 16, rng);
    Graph g(false);
    const Tensor cond = models::conditioning_for(gen, net, ds.images, ds.labels);
    const Var raw = gen.forward(g, g.constant(gen.make_input(z, &cond)));
    const Var full = spectral::ops::expand_half(g, scale.apply(g, raw), 16);
    const Var mixed = spectral::ops::mix(g, full, sp.amplitude, lam);
    const Tensor pre = g.value(spectral::ops::idft_with_phase(g, mixed, sp.phase));
    Graph g2(false);
    const Tensor post = g2.value(models::recombine(g2, ds.images, sp, net, gen, scale, lam, ds.labels, z));
    for (std::size_t i = 0; i < pre.numel(); ++i) clamp_mismatch += post[i] != std::clamp(pre[i], 0.0, 1.0);
    const std::size_t per = 3 * 256;
    for (std::size_t n = 0; n < ds.size(); ++n, ++samples) {
      const auto re = spectral::dft_decompose(image_of(pre, n));
      for (std::size_t i = 0; i < per; ++i) {
        if (re.amplitude[i] > 1e-6) worst = std::max(worst, spectral::angle_distance(re.phase[i], sp.phase[n * per + i]));
      }
    }
  }
  return {samples == 100 && worst <= 1e-3 && clamp_mismatch == 0,
          fmt("%zu samples, max phase deviation %.2e rad, output = clamp(pre-clamp image): %s", samples, worst,
              clamp_mismatch == 0 ? "yes" : "no")};
}

std::vector<Tensor> bank_state(const models::SmallConvNet& net, Bank bank) {
  std::vector<Tensor> out;
  for (const auto& layer : net.bn_layer_names()) {
    for (const char* f : {"gamma", "beta", "running_mean", "running_var"}) out.push_back(net.params().at(bn_name(layer, bank, f)));
  }
  return out;
}

Outcome split_bn_isolation() {
  const auto ds = data::make_synthetic_dataset(task_spec(), 32, 7);
  models::SmallConvNet net({3, 16, 16}, 4, 7);
  trainer::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 7;
  auto aag = trainer::make_aag({3, 16, 16}, 4, cfg);
  const auto a_start = bank_state(net, Bank::A), b_start = bank_state(net, Bank::B);
  std::vector<Tensor> a0, b0;
  std::size_t batches = 0, a_touched = 0, b_touched = 0;
  trainer::TrainHooks hooks;
  hooks.stage = [&](std::string_view s, const models::SmallConvNet& n) {
    if (s == "batch_start") {
      ++batches;
      b0 = bank_state(n, Bank::B);
    } else if (s == "benign_done") {
      b_touched += bank_state(n, Bank::B) != b0;
      a0 = bank_state(n, Bank::A);
    } else if (s == "recombined_done") {
      a_touched += bank_state(n, Bank::A) != a0;
    }
  };
  trainer::train(ds, net, &aag, cfg, hooks);
  const bool moved = bank_state(net, Bank::A) != a_start && bank_state(net, Bank::B) != b_start;
  return {batches == 4 && a_touched == 0 && b_touched == 0 && moved,
          fmt("%zu batches; bank A changed by recombined passes in %zu, bank B by benign passes in %zu", batches,
              a_touched, b_touched)};
}

Outcome minmax_directions() {
  const auto ds = data::make_synthetic_dataset(task_spec(), 200, 8);
  models::SmallConvNet net({3, 16, 16}, 4, 8);
  trainer::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 16;
  cfg.seed = 8;
  auto aag = trainer::make_aag({3, 16, 16}, 4, cfg);
  std::size_t probes = 0, psi_ok = 0, theta_ok = 0;
  trainer::TrainHooks hooks;
  hooks.probe_batches = 50;
  hooks.probe = [&](const trainer::MinMaxProbe& p) {
    ++probes;
    psi_ok += p.after_psi >= p.before;
    theta_ok += p.after_theta <= p.before;
  };
  trainer::train(ds, net, &aag, cfg, hooks);
  return {probes == 50 && psi_ok >= 45 && theta_ok >= 45,
          fmt("over %zu batches: psi step did not decrease L_DAT on %zu, theta step did not increase it on %zu", probes,
              psi_ok, theta_ok)};
}

Outcome motivation_orderings() {
  const auto t0 = Clock::now();
  int standard = 0, robust = 0, perturbed = 0;
  std::string rows;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto spec = task_spec();
    const auto train = data::make_synthetic_dataset(spec, 128, seed);
    const auto test = data::make_synthetic_dataset(spec, 32, seed ^ kTestSalt);
    experiments::MotivationConfig mc;
    mc.train.epochs = 4;
    mc.train.seed = seed;
    mc.train.lr_schedule = {{0, 0.1}, {2, 0.01}};
    mc.seed = seed;
    const auto r = experiments::motivation_experiment(train, test, mc);
    standard += r[0].d_amp > r[0].d_pha;
    robust += r[1].d_pha > r[1].d_amp;
    perturbed += r[2].d_ae >= r[1].d_ae;
    rows += fmt(" [seed %llu: std amp %.3f pha %.3f; rob amp %.3f pha %.3f ae %.3f; pert ae %.3f]",
                static_cast<unsigned long long>(seed), r[0].d_amp, r[0].d_pha, r[1].d_amp, r[1].d_pha, r[1].d_ae,
                r[2].d_ae);
  }
  const double secs = seconds_since(t0);
  return {standard >= 2 && robust >= 2 && perturbed >= 2 && secs < 900.0,
          fmt("seeds holding: standard %d/3, robust %d/3, perturbed %d/3, %.0fs;", standard, robust, perturbed, secs) +
              rows};
}

// Gradient descent on the same task through the autodiff graph.
double theorem1_oracle(const experiments::Theorem1Task& t, int steps, double lr) {
  const std::size_t d = t.block_dim, m = 2 * d, c = t.classes, n = t.samples;
  std::mt19937_64 rng(t.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> means(c * d);
  for (auto& v : means) v = normal(rng);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % c);
  Tensor w({c, m}, 0.0), b({c}, 0.0), x({n, m});
  for (int s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) x[i * m + j] = means[labels[i] * d + j] + std::sqrt(t.sigma_p2) * normal(rng);
      for (std::size_t j = 0; j < d; ++j) x[i * m + d + j] = means[labels[i] * d + j] + std::sqrt(t.sigma_a2) * normal(rng);
    }
    Graph g;
    const Var wv = g.input(w), bv = g.input(b);
    g.backward(losses::cross_entropy(g, ops::linear(g, g.input(x, false), wv, bv), labels));
    const Tensor gw = g.grad(wv), gb = g.grad(bv);
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] -= lr * gw[i];
    for (std::size_t i = 0; i < c; ++i) b[i] -= lr * gb[i];
  }
  double np = 0.0, na = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t j = 0; j < d; ++j) {
      np += w[k * m + j] * w[k * m + j];
      na += w[k * m + d + j] * w[k * m + d + j];
    }
  }
  return std::sqrt(na / np);
}

Outcome theorem1_check() {
  const auto t0 = Clock::now();
  experiments::Theorem1Task t;
  std::vector<double> ratios;
  double oracle_gap = 0.0;
  for (double vr : {1.0, 10.0, 100.0}) {
    t.sigma_a2 = t.sigma_p2 * vr;
    const double r = experiments::theorem1_experiment(t, 2000, 0.1).ratio;
    oracle_gap = std::max(oracle_gap, std::abs(r - theorem1_oracle(t, 2000, 0.1)) / r);
    ratios.push_back(r);
  }
  const double secs = seconds_since(t0);
  const bool pass = ratios[2] < 0.2 && std::abs(ratios[0] - 1.0) <= 0.3 && ratios[1] <= ratios[0] &&
                    ratios[2] <= ratios[1] && oracle_gap < 1e-6 && secs < 120.0;
  return {pass, fmt("ratios %.4f / %.4f / %.4f at variance ratio 1 / 10 / 100, oracle gap %.1e, %.1fs", ratios[0],
                    ratios[1], ratios[2], oracle_gap, secs)};
}

Outcome dat_benefit() {
  double dat = 0.0, pgd_at = 0.0;
  std::string rows;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto spec = task_spec();
    const auto train = data::make_synthetic_dataset(spec, 128, seed);
    const auto test = data::make_synthetic_dataset(spec, 32, seed ^ kTestSalt);
    double acc[2];
    for (int k = 0; k < 2; ++k) {
      trainer::TrainConfig cfg;
      cfg.method = k == 0 ? trainer::Method::Dat : trainer::Method::PgdAt;
      cfg.epochs = 10;
      cfg.lr_schedule = {{0, 0.1}, {7, 0.01}};
      cfg.seed = seed;
      models::SmallConvNet net(train.image_shape(), train.classes, seed);
      auto aag = trainer::make_aag(train.image_shape(), train.classes, cfg);
      trainer::train(train, net, &aag, cfg);
      std::mt19937_64 rng(seed);
      acc[k] = eval::evaluate_accuracy(net, test, attacks::pgd_config(8.0 / 255.0, 2.0 / 255.0, 10), Bank::A, rng);
    }
    dat += acc[0] / 3.0;
    pgd_at += acc[1] / 3.0;
    rows += fmt(" [seed %llu: %.3f vs %.3f]", static_cast<unsigned long long>(seed), acc[0], acc[1]);
  }
  return {dat >= pgd_at, fmt("mean PGD-10 accuracy DAT %.4f, PGD-AT %.4f;", dat, pgd_at) + rows};
}

Outcome eaeg_efficiency() {
  const auto spec = task_spec();
  const auto train = data::make_synthetic_dataset(spec, 64, 0);
  const auto test = data::make_synthetic_dataset(spec, 32, kTestSalt);
  models::SmallConvNet net(train.image_shape(), train.classes, 0);
  trainer::TrainConfig cfg;
  cfg.method = trainer::Method::Standard;
  cfg.epochs = 3;
  trainer::train(train, net, nullptr, cfg);
  const auto model = attacks::eval_logits(net, Bank::A);
  std::mt19937_64 r1(0), r2(0);
  const double beta = cfg.beta;
  const Tensor x_eaeg = attacks::eaeg(test.images, test.labels, model,
                                      attacks::eaeg_config(8.0 / 255.0, 2.0 / 255.0, beta, 5), r1);
  const Tensor x_pgd = attacks::pgd(test.images, test.labels, model, attacks::pgd_config(8.0 / 255.0, 2.0 / 255.0, 5), r2);
  const Tensor clean = net.logits(test.images, Mode::Eval, Bank::A);
  Graph g(false);
  const double l_ae = g.value(losses::loss_ae(g, g.constant(clean),
                                              g.constant(net.logits(x_eaeg, Mode::Eval, Bank::A)), test.labels, beta))[0];
  const double ce = losses::cross_entropy(net.logits(x_pgd, Mode::Eval, Bank::A), test.labels);
  return {l_ae >= ce, fmt("mean L_AE after EAEG-5 %.4f, mean CE after PGD-5 %.4f", l_ae, ce)};
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("datk_accept_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Outcome persistence() {
  // Checkpoint: both banks, generator and velocities, values on the f32 grid.
  models::SmallConvNet net({3, 16, 16}, 4, 9);
  trainer::TrainConfig tc;
  auto aag = trainer::make_aag({3, 16, 16}, 4, tc);
  ParameterSet all = net.params();
  for (const auto& e : aag.gen.params().entries()) all.add(e.name, e.value, e.trainable);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& e : all.entries()) {
    for (auto& v : e.value.vec()) v = static_cast<float>(v + normal(rng));
    if (e.trainable) {
      Tensor vel(e.value.shape());
      for (auto& v : vel.vec()) v = static_cast<float>(normal(rng));
      e.velocity = vel;
    }
  }
  TempDir dir;
  io::save_checkpoint(all, dir.path / "ck.datk");
  const bool ck_ok = io::load_checkpoint(dir.path / "ck.datk") == all;

  // CIFAR-binary fixture: two records written byte by byte.
  std::vector<std::uint8_t> bytes(2 * 3073);
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>((i * 37 + 11) % 256);
  bytes[0] = 3;
  bytes[3073] = 9;
  {
    std::ofstream out(dir.path / "fixture.bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  const auto ds = io::load_cifar_binary(dir.path / "fixture.bin");
  bool fixture_ok = ds.labels == std::vector<int>{3, 9};
  for (std::size_t r = 0; r < 2 && fixture_ok; ++r) {
    for (std::size_t j = 0; j < 3072; ++j) fixture_ok = fixture_ok && ds.images[r * 3072 + j] == bytes[r * 3073 + 1 + j] / 255.0;
  }

  // Config round trip.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t cfg_fail = 0;
  for (int i = 0; i < 100; ++i) {
    io::RunConfig c;
    c.train.method = static_cast<trainer::Method>(i % 4);
    c.train.seed = rng();
    c.train.beta = 30.0 * u(rng);
    c.train.omega = u(rng) * 4.0;
    c.train.lambda_max = u(rng);
    c.train.lr_schedule = {{0, u(rng)}, {1 + i, u(rng) * 0.1}};
    c.synthetic.phase_noise = u(rng);
    c.synthetic.amplitude_cue = u(rng);
    c.eval_epsilon = u(rng) * 0.1;
    c.out = "run " + std::to_string(i);
    cfg_fail += io::parse_config(io::serialize_config(c)) != c;
  }
  return {ck_ok && fixture_ok && cfg_fail == 0,
          fmt("checkpoint bit-exact %s (%zu records), fixture byte-exact %s, config round trips failing %zu/100",
              ck_ok ? "yes" : "no", all.size(), fixture_ok ? "yes" : "no", cfg_fail)};
}

Outcome determinism() {
  TempDir dir;
  const fs::path cfg = dir.path / "run.cfg";
  std::ofstream(cfg) << "classes=3\nimage=3x16x16\ntrain_per_class=16\ntest_per_class=8\nepochs=2\nbatch_size=16\n";
  std::size_t same = 0, total = 0;
  for (const char* method : {"standard", "pgd-at", "trades", "dat"}) {
    std::vector<std::vector<char>> ck;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = dir.path / (std::string(method) + std::to_string(rep));
      std::ostringstream sink;
      if (cli::run({"train", "--config", cfg.string(), "--seed", "13", "--method", method, "--out", out.string()}, sink,
                   sink) != 0) {
        return {false, std::string("train failed for ") + method + ": " + sink.str()};
      }
      std::ifstream in(out / "checkpoint.datk", std::ios::binary);
      ck.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    ++total;
    same += ck[0] == ck[1] && !ck[0].empty();
  }
  return {same == total, fmt("%zu/%zu methods reproduce the checkpoint bit for bit", same, total)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "spectral correctness", spectral_correctness},
      {2, "brute-force DFT oracle", oracle_equivalence},
      {3, "gradient suite", gradient_suite},
      {4, "divergence oracles", divergence_oracles},
      {5, "attack feasibility", attack_feasibility},
      {6, "phase preservation of recombination", phase_preservation},
      {7, "split batch-norm isolation", split_bn_isolation},
      {8, "min-max directions", minmax_directions},
      {9, "motivation orderings", motivation_orderings},
      {10, "theorem-1 norm ratio", theorem1_check},
      {11, "directional DAT benefit", dat_benefit},
      {12, "EAEG-5 vs PGD-5 objective", eaeg_efficiency},
      {13, "persistence", persistence},
      {14, "determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d %-38s %s  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

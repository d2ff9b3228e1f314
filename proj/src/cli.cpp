#include "datk/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "datk/error.hpp"
#include "datk/eval.hpp"
#include "datk/experiments.hpp"
#include "datk/gradcheck.hpp"
#include "datk/models.hpp"
#include "datk/trainer.hpp"

namespace datk::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTestSeedSalt = 0x5851f42d4c957f2dULL;
constexpr const char* kDefaultOut = "datk_out";

// Flag values as given on the command line; applied through the config
// parser so they get the same validation as file entries.
struct Flags {
  std::string config;
  std::map<std::string, std::string> values;
  std::uint64_t count = 1;
};

void add_flag(CLI::App* app, Flags& flags, const std::string& flag, const std::string& help) {
  app->add_option_function<std::string>(
      "--" + flag, [&flags, flag](const std::string& v) { flags.values[flag] = v; }, help);
}

void add_common_flags(CLI::App* app, Flags& flags) {
  app->add_option("--config", flags.config, "key=value config file");
  add_flag(app, flags, "seed", "random seed (falls back to DATK_SEED)");
  add_flag(app, flags, "method", "standard | pgd-at | trades | dat");
  add_flag(app, flags, "epochs", "training epochs");
  add_flag(app, flags, "epsilon", "L-inf radius");
  add_flag(app, flags, "alpha", "attack step size");
  add_flag(app, flags, "steps", "attack steps");
  add_flag(app, flags, "beta", "KL weight");
  add_flag(app, flags, "omega", "JS weight");
  add_flag(app, flags, "lambda-max", "upper bound of the mixing weight");
  add_flag(app, flags, "ae-mode", "dual | single");
  add_flag(app, flags, "aag-input", "noise | noise+onehot | noise+logits");
  add_flag(app, flags, "aag-with", "dat | pgd-at | trades");
  add_flag(app, flags, "out", "output directory");
  add_flag(app, flags, "checkpoint", "checkpoint path");
}

std::uint64_t env_seed() {
  const char* s = std::getenv("DATK_SEED");
  if (!s || !*s) return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw ConfigError(std::string("DATK_SEED is not an unsigned integer: ") + s);
  return v;
}

io::RunConfig resolve(const Flags& flags, const std::string& command) {
  io::RunConfig cfg;
  cfg.train.seed = env_seed();
  if (!flags.config.empty()) cfg = io::load_config(flags.config, cfg);
  // evaluate reads the attack flags as the evaluation attack.
  const bool eval_attack = command == "evaluate";
  for (const auto& [flag, value] : flags.values) {
    std::string key = flag;
    if (flag == "lambda-max") key = "lambda_max";
    else if (flag == "ae-mode") key = "ae_mode";
    else if (flag == "aag-input") key = "aag_input";
    else if (flag == "aag-with") key = "aag_with";
    else if (eval_attack && (flag == "epsilon" || flag == "alpha" || flag == "steps")) key = "eval_" + flag;
    io::set_config_value(cfg, key, value);
  }
  if (cfg.out.empty()) cfg.out = kDefaultOut;
  cfg.train.validate();
  return cfg;
}

fs::path prepare_out(const io::RunConfig& cfg) {
  const fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void emit_provenance(const io::RunConfig& cfg, const std::string& command, std::ostream& out) {
  const std::string line = "provenance command=" + command + " " + provenance_line(cfg);
  out << line << '\n' << std::flush;
  const fs::path dir = prepare_out(cfg);
  std::ofstream f(dir / "provenance.txt", std::ios::trunc);
  f << line << '\n';
  if (!f) throw IoError("cannot write " + (dir / "provenance.txt").string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

std::string run_id(const io::RunConfig& cfg, const std::string& command) {
  return command + "-" + std::string(trainer::method_name(cfg.train.method)) + "-" +
         std::to_string(cfg.train.seed);
}

fs::path checkpoint_path(const io::RunConfig& cfg) {
  return cfg.checkpoint.empty() ? fs::path(cfg.out) / "checkpoint.datk" : fs::path(cfg.checkpoint);
}

attacks::AttackConfig eval_attack(const io::RunConfig& cfg) {
  auto a = attacks::pgd_config(cfg.eval_epsilon, cfg.eval_alpha, cfg.eval_steps);
  a.validate();
  return a;
}

int cmd_train(const io::RunConfig& cfg, std::ostream& out) {
  emit_provenance(cfg, "train", out);
  const fs::path dir = prepare_out(cfg);
  write_text(dir / "config.txt", io::serialize_config(cfg));
  const Splits splits = load_splits(cfg);
  const auto shape = splits.train.image_shape();
  models::SmallConvNet net(shape, splits.train.classes, cfg.train.seed);
  std::optional<trainer::AagState> aag;
  if (cfg.train.method == trainer::Method::Dat) aag = trainer::make_aag(shape, splits.train.classes, cfg.train);

  const fs::path metrics = dir / "metrics.csv";
  io::write_metrics({}, metrics, io::WriteMode::Truncate);
  const std::string id = run_id(cfg, "train");
  trainer::TrainHooks hooks;
  hooks.eval_set = &splits.test;
  hooks.on_epoch = [&](const trainer::EpochMetrics& m) {
    std::vector<io::MetricsRow> rows;
    auto row = [&](const char* split, const char* name, double v) {
      rows.push_back({id, m.epoch, split, name, v, cfg.train.seed, m.wall_seconds});
    };
    row("train", "loss", m.train_loss);
    row("train", "at_benign", m.at_benign);
    row("train", "at_recombined", m.at_recombined);
    row("train", "js", m.js);
    row("test", "natural_acc", m.natural_acc);
    if (m.pgd_acc) row("test", "pgd_acc", *m.pgd_acc);
    io::write_metrics(rows, metrics, io::WriteMode::Append);
    out << "epoch " << m.epoch << " loss " << m.train_loss << " natural " << m.natural_acc << " ("
        << std::fixed << std::setprecision(1) << m.wall_seconds << "s)" << std::defaultfloat
        << std::setprecision(6) << '\n';
  };
  trainer::train(splits.train, net, aag ? &*aag : nullptr, cfg.train, hooks);

  ParameterSet all = net.params();
  if (aag) {
    for (const auto& e : aag->gen.params().entries()) {
      all.add(e.name, e.value, e.trainable);
      all.entry(e.name).velocity = e.velocity;
    }
    if (aag->scale.initialized()) all.add("aag.amplitude_mean", aag->scale.mean(), false);
  }
  const fs::path ckpt = checkpoint_path(cfg);
  io::save_checkpoint(all, ckpt);
  out << "checkpoint " << ckpt.string() << '\n';
  return kExitOk;
}

int cmd_evaluate(const io::RunConfig& cfg, std::ostream& out) {
  emit_provenance(cfg, "evaluate", out);
  const Splits splits = load_splits(cfg);
  models::SmallConvNet net(splits.test.image_shape(), splits.test.classes, cfg.train.seed);
  io::restore_params(net.params(), io::load_checkpoint(checkpoint_path(cfg)));
  std::mt19937_64 rng(cfg.train.seed);
  const double natural = eval::evaluate_accuracy(net, splits.test, std::nullopt, Bank::A, rng);
  const double fgsm = eval::evaluate_fgsm_accuracy(net, splits.test, cfg.eval_epsilon, Bank::A);
  const double pgd = eval::evaluate_accuracy(net, splits.test, eval_attack(cfg), Bank::A, rng);
  out << "natural " << io::format_double(natural) << '\n'
      << "fgsm " << io::format_double(fgsm) << '\n'
      << "pgd" << cfg.eval_steps << ' ' << io::format_double(pgd) << '\n';
  const std::string id = run_id(cfg, "evaluate");
  io::write_metrics({{id, 0, "test", "natural_acc", natural, cfg.train.seed, 0.0},
                     {id, 0, "test", "fgsm_acc", fgsm, cfg.train.seed, 0.0},
                     {id, 0, "test", "pgd_acc", pgd, cfg.train.seed, 0.0}},
                    prepare_out(cfg) / "metrics.csv", io::WriteMode::Append);
  return kExitOk;
}

int cmd_motivation(const io::RunConfig& cfg, std::ostream& out) {
  emit_provenance(cfg, "motivation", out);
  const Splits splits = load_splits(cfg);
  experiments::MotivationConfig mc;
  mc.train = cfg.train;
  mc.eval_attack = eval_attack(cfg);
  mc.seed = cfg.train.seed;
  const auto rows = experiments::motivation_experiment(splits.train, splits.test, mc);
  out << std::left << std::setw(10) << "model" << std::setw(10) << "natural" << std::setw(10) << "d_ae"
      << std::setw(10) << "d_amp" << "d_pha\n";
  std::vector<io::MetricsRow> metrics;
  const std::string id = run_id(cfg, "motivation");
  for (const auto& r : rows) {
    out << std::setw(10) << r.model << std::fixed << std::setprecision(4) << std::setw(10) << r.natural
        << std::setw(10) << r.d_ae << std::setw(10) << r.d_amp << r.d_pha << std::defaultfloat << '\n';
    for (auto [name, v] : {std::pair{"natural", r.natural}, {"d_ae", r.d_ae}, {"d_amp", r.d_amp},
                           {"d_pha", r.d_pha}}) {
      metrics.push_back({id, cfg.train.epochs, r.model, name, v, cfg.train.seed, 0.0});
    }
  }
  io::write_metrics(metrics, prepare_out(cfg) / "metrics.csv", io::WriteMode::Append);
  return kExitOk;
}

int cmd_theorem1(const io::RunConfig& cfg, std::ostream& out) {
  emit_provenance(cfg, "theorem1", out);
  std::vector<io::MetricsRow> metrics;
  const std::string id = run_id(cfg, "theorem1");
  out << "variance_ratio norm_ratio final_loss\n";
  for (double vr : {1.0, 10.0, 100.0}) {
    experiments::Theorem1Task task;
    task.seed = cfg.train.seed;
    task.sigma_a2 = task.sigma_p2 * vr;
    const auto r = experiments::theorem1_experiment(task, 2000, 0.1);
    out << vr << ' ' << io::format_double(r.ratio) << ' ' << io::format_double(r.final_loss) << '\n';
    const std::string split = "variance_ratio_" + io::format_double(vr);
    metrics.push_back({id, 0, split, "norm_ratio", r.ratio, cfg.train.seed, 0.0});
    metrics.push_back({id, 0, split, "final_loss", r.final_loss, cfg.train.seed, 0.0});
  }
  io::write_metrics(metrics, prepare_out(cfg) / "metrics.csv", io::WriteMode::Append);
  return kExitOk;
}

int cmd_gradcheck(const io::RunConfig& cfg, std::uint64_t count, std::ostream& out) {
  emit_provenance(cfg, "gradcheck", out);
  std::size_t failed = 0, total = 0;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < count; ++s) {
    for (const auto& r : gradcheck::run_suite(cfg.train.seed + s)) {
      ++total;
      worst = std::max(worst, r.rel_error);
      if (!r.passed) {
        ++failed;
        out << "FAIL " << r.name << " rel_error " << r.rel_error << '\n';
      }
    }
  }
  out << total - failed << "/" << total << " gradient checks passed, worst rel_error " << worst << '\n';
  return failed == 0 ? kExitOk : kExitInvalid;
}

int cmd_synth_data(const io::RunConfig& cfg, std::ostream& out) {
  emit_provenance(cfg, "synth-data", out);
  io::RunConfig synth = cfg;
  synth.source = io::DataSource::Synthetic;
  const Splits splits = load_splits(synth);
  const fs::path dir = prepare_out(cfg);
  io::save_image_binary(splits.train, dir / "train.bin");
  io::save_image_binary(splits.test, dir / "test.bin");
  // A config that trains on the written files.
  io::RunConfig binary = cfg;
  binary.source = io::DataSource::Binary;
  binary.train_path = (dir / "train.bin").string();
  binary.test_path = (dir / "test.bin").string();
  write_text(dir / "config.txt", io::serialize_config(binary));
  out << "wrote " << splits.train.size() << " train and " << splits.test.size() << " test images to "
      << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

Splits load_splits(const io::RunConfig& cfg) {
  Splits s;
  if (cfg.source == io::DataSource::Synthetic) {
    s.train = data::make_synthetic_dataset(cfg.synthetic, cfg.train_per_class, cfg.train.seed);
    s.test = data::make_synthetic_dataset(cfg.synthetic, cfg.test_per_class, cfg.train.seed ^ kTestSeedSalt);
  } else {
    if (cfg.train_path.empty() || cfg.test_path.empty()) {
      throw ConfigError("dataset=binary needs train_path and test_path");
    }
    s.train = io::load_image_binary(cfg.train_path, cfg.synthetic.image, cfg.synthetic.classes);
    s.test = io::load_image_binary(cfg.test_path, cfg.synthetic.image, cfg.synthetic.classes);
  }
  if (s.train.empty()) throw ConfigError("training set is empty");
  if (s.test.empty()) throw ConfigError("test set is empty");
  return s;
}

std::string provenance_line(const io::RunConfig& cfg) {
  std::string line = "seed=" + std::to_string(cfg.train.seed);
  std::istringstream lines(io::serialize_config(cfg));
  for (std::string l; std::getline(lines, l);) {
    if (l.rfind("seed=", 0) == 0) continue;
    line += ' ' + l;
  }
  return line;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Dual adversarial training toolkit", "datk");
  app.require_subcommand(1);
  Flags flags;
  std::map<CLI::App*, std::string> names;
  for (const char* name : {"train", "evaluate", "motivation", "theorem1", "gradcheck", "synth-data"}) {
    static const std::map<std::string, std::string> help = {
        {"train", "train a classifier and write checkpoint and metrics"},
        {"evaluate", "natural, FGSM and PGD accuracy of a checkpoint"},
        {"motivation", "amplitude/phase split accuracies of three models"},
        {"theorem1", "weight norm ratio of a linear model under amplitude noise"},
        {"gradcheck", "finite-difference gradient suite"},
        {"synth-data", "write the synthetic dataset as binary files"}};
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    add_common_flags(sub, flags);
    if (std::string(name) == "gradcheck") sub->add_option("--count", flags.count, "number of consecutive seeds");
    names[sub] = name;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitInvalid;
  }

  const std::string command = names.at(app.get_subcommands().front());
  try {
    const io::RunConfig cfg = resolve(flags, command);
    if (command == "train") return cmd_train(cfg, out);
    if (command == "evaluate") return cmd_evaluate(cfg, out);
    if (command == "motivation") return cmd_motivation(cfg, out);
    if (command == "theorem1") return cmd_theorem1(cfg, out);
    if (command == "gradcheck") return cmd_gradcheck(cfg, flags.count, out);
    return cmd_synth_data(cfg, out);
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}

}  // namespace datk::cli

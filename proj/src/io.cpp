#include "datk/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "datk/error.hpp"

namespace datk::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw ConfigError("cannot format number");
  return std::string(buf.data(), end);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("key '" + std::string(key) + "': not a number: '" + std::string(v) + "'");
  }
  return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw ConfigError("key '" + std::string(key) + "': not an integer: '" + std::string(v) + "'");
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<trainer::LrPoint> parse_schedule(std::string_view v) {
  std::vector<trainer::LrPoint> out;
  for (auto item : split(v, ',')) {
    const auto parts = split(trim(item), ':');
    if (parts.size() != 2) throw ConfigError("lr_schedule entries must be epoch:lr, got '" + std::string(item) + "'");
    out.push_back({parse_int<int>("lr_schedule", trim(parts[0])), parse_double("lr_schedule", trim(parts[1]))});
  }
  return out;
}

std::string format_schedule(const std::vector<trainer::LrPoint>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s[i].epoch) + ":" + format_double(s[i].lr);
  }
  return out;
}

models::ImageShape parse_image(std::string_view v) {
  const auto parts = split(v, 'x');
  if (parts.size() != 3) throw ConfigError("image must be CxHxW, got '" + std::string(v) + "'");
  return {parse_int<std::size_t>("image", parts[0]), parse_int<std::size_t>("image", parts[1]),
          parse_int<std::size_t>("image", parts[2])};
}

struct Key {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<std::pair<std::string, Key>>& key_table() {
  using K = std::string_view;
  static const std::vector<std::pair<std::string, Key>> table = {
      {"method", {[](RunConfig& c, K v) { c.train.method = trainer::parse_method(v); },
                  [](const RunConfig& c) { return std::string(trainer::method_name(c.train.method)); }}},
      {"epochs", {[](RunConfig& c, K v) { c.train.epochs = parse_int<int>("epochs", v); },
                  [](const RunConfig& c) { return std::to_string(c.train.epochs); }}},
      {"batch_size", {[](RunConfig& c, K v) { c.train.batch_size = parse_int<std::size_t>("batch_size", v); },
                      [](const RunConfig& c) { return std::to_string(c.train.batch_size); }}},
      {"lr_schedule", {[](RunConfig& c, K v) { c.train.lr_schedule = parse_schedule(v); },
                       [](const RunConfig& c) { return format_schedule(c.train.lr_schedule); }}},
      {"momentum", {[](RunConfig& c, K v) { c.train.momentum = parse_double("momentum", v); },
                    [](const RunConfig& c) { return format_double(c.train.momentum); }}},
      {"weight_decay", {[](RunConfig& c, K v) { c.train.weight_decay = parse_double("weight_decay", v); },
                        [](const RunConfig& c) { return format_double(c.train.weight_decay); }}},
      {"epsilon", {[](RunConfig& c, K v) { c.train.epsilon = parse_double("epsilon", v); },
                   [](const RunConfig& c) { return format_double(c.train.epsilon); }}},
      {"alpha", {[](RunConfig& c, K v) { c.train.alpha = parse_double("alpha", v); },
                 [](const RunConfig& c) { return format_double(c.train.alpha); }}},
      {"steps", {[](RunConfig& c, K v) { c.train.attack_steps = parse_int<int>("steps", v); },
                 [](const RunConfig& c) { return std::to_string(c.train.attack_steps); }}},
      {"beta", {[](RunConfig& c, K v) { c.train.beta = parse_double("beta", v); },
                [](const RunConfig& c) { return format_double(c.train.beta); }}},
      {"omega", {[](RunConfig& c, K v) { c.train.omega = parse_double("omega", v); },
                 [](const RunConfig& c) { return format_double(c.train.omega); }}},
      {"aag_lr", {[](RunConfig& c, K v) { c.train.aag_lr = parse_double("aag_lr", v); },
                  [](const RunConfig& c) { return format_double(c.train.aag_lr); }}},
      {"tau", {[](RunConfig& c, K v) { c.train.tau = parse_int<std::size_t>("tau", v); },
               [](const RunConfig& c) { return std::to_string(c.train.tau); }}},
      {"lambda_max", {[](RunConfig& c, K v) { c.train.lambda_max = parse_double("lambda_max", v); },
                      [](const RunConfig& c) { return format_double(c.train.lambda_max); }}},
      {"ae_mode", {[](RunConfig& c, K v) { c.train.ae_mode = trainer::parse_ae_mode(v); },
                   [](const RunConfig& c) { return std::string(trainer::ae_mode_name(c.train.ae_mode)); }}},
      {"aag_input", {[](RunConfig& c, K v) { c.train.aag_input = models::parse_aag_input(v); },
                     [](const RunConfig& c) { return std::string(models::aag_input_name(c.train.aag_input)); }}},
      {"aag_with", {[](RunConfig& c, K v) { c.train.aag_with = trainer::parse_aag_with(v); },
                    [](const RunConfig& c) { return std::string(trainer::aag_with_name(c.train.aag_with)); }}},
      {"seed", {[](RunConfig& c, K v) { c.train.seed = parse_int<std::uint64_t>("seed", v); },
                [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"dataset", {[](RunConfig& c, K v) {
                     if (v == "synthetic") c.source = DataSource::Synthetic;
                     else if (v == "binary") c.source = DataSource::Binary;
                     else throw ConfigError("dataset must be synthetic or binary, got '" + std::string(v) + "'");
                   },
                   [](const RunConfig& c) { return std::string(c.source == DataSource::Synthetic ? "synthetic" : "binary"); }}},
      {"classes", {[](RunConfig& c, K v) { c.synthetic.classes = parse_int<std::size_t>("classes", v); },
                   [](const RunConfig& c) { return std::to_string(c.synthetic.classes); }}},
      {"image", {[](RunConfig& c, K v) { c.synthetic.image = parse_image(v); },
                 [](const RunConfig& c) {
                   const auto& s = c.synthetic.image;
                   return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
                 }}},
      {"amplitude_cue", {[](RunConfig& c, K v) { c.synthetic.amplitude_cue = parse_double("amplitude_cue", v); },
                         [](const RunConfig& c) { return format_double(c.synthetic.amplitude_cue); }}},
      {"phase_noise", {[](RunConfig& c, K v) { c.synthetic.phase_noise = parse_double("phase_noise", v); },
                       [](const RunConfig& c) { return format_double(c.synthetic.phase_noise); }}},
      {"template_seed", {[](RunConfig& c, K v) { c.synthetic.template_seed = parse_int<std::uint64_t>("template_seed", v); },
                         [](const RunConfig& c) { return std::to_string(c.synthetic.template_seed); }}},
      {"train_per_class", {[](RunConfig& c, K v) { c.train_per_class = parse_int<std::size_t>("train_per_class", v); },
                           [](const RunConfig& c) { return std::to_string(c.train_per_class); }}},
      {"test_per_class", {[](RunConfig& c, K v) { c.test_per_class = parse_int<std::size_t>("test_per_class", v); },
                          [](const RunConfig& c) { return std::to_string(c.test_per_class); }}},
      {"train_path", {[](RunConfig& c, K v) { c.train_path = std::string(v); },
                      [](const RunConfig& c) { return c.train_path; }}},
      {"test_path", {[](RunConfig& c, K v) { c.test_path = std::string(v); },
                     [](const RunConfig& c) { return c.test_path; }}},
      {"eval_epsilon", {[](RunConfig& c, K v) { c.eval_epsilon = parse_double("eval_epsilon", v); },
                        [](const RunConfig& c) { return format_double(c.eval_epsilon); }}},
      {"eval_alpha", {[](RunConfig& c, K v) { c.eval_alpha = parse_double("eval_alpha", v); },
                      [](const RunConfig& c) { return format_double(c.eval_alpha); }}},
      {"eval_steps", {[](RunConfig& c, K v) { c.eval_steps = parse_int<int>("eval_steps", v); },
                      [](const RunConfig& c) { return std::to_string(c.eval_steps); }}},
      {"checkpoint", {[](RunConfig& c, K v) { c.checkpoint = std::string(v); },
                      [](const RunConfig& c) { return c.checkpoint; }}},
      {"out", {[](RunConfig& c, K v) { c.out = std::string(v); }, [](const RunConfig& c) { return c.out; }}},
  };
  return table;
}

const Key* find_key(std::string_view name) {
  for (const auto& [k, v] : key_table()) {
    if (k == name) return &v;
  }
  return nullptr;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, v] : key_table()) out.push_back(k);
  return out;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const Key* k = find_key(key);
  if (!k) throw ConfigError("unknown config key '" + std::string(key) + "'");
  k->set(cfg, trim(value));
}

RunConfig parse_config(std::string_view text, const RunConfig& base) {
  RunConfig cfg = base;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
    }
    try {
      set_config_value(cfg, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const fs::path& path, const RunConfig& base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : key_table()) {
    const std::string value = v.get(cfg);
    if (value.find('\n') != std::string::npos || value != trim(value)) {
      throw ConfigError("value of '" + k + "' cannot be written as a config line");
    }
    out += k + "=" + value + "\n";
  }
  return out;
}

// Checkpoints.

namespace {

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_record(std::vector<std::uint8_t>& b, const std::string& name, const Tensor& t) {
  put_u32(b, static_cast<std::uint32_t>(name.size()));
  b.insert(b.end(), name.begin(), name.end());
  put_u32(b, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u32(b, static_cast<std::uint32_t>(d));
  for (double v : t.vec()) put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}
  bool done() const { return p_ == end_; }
  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[i]) << (8 * i);
    p_ += 4;
    return v;
  }
  std::string bytes(std::size_t n, const char* field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }

 private:
  void need(std::size_t n, const char* field) {
    if (static_cast<std::size_t>(end_ - p_) < n) throw FormatError(std::string("checkpoint truncated in ") + field);
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

constexpr std::string_view kVelocitySuffix = "@velocity";

bool non_trainable_name(std::string_view name) {
  return name.ends_with(".running_mean") || name.ends_with(".running_var") ||
         name == "aag.amplitude_mean";
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& params) {
  std::vector<std::uint8_t> b = {'D', 'A', 'T', 'K'};
  put_u16(b, kCheckpointVersion);
  for (const auto& e : params.entries()) {
    put_record(b, e.name, e.value);
    if (e.velocity) put_record(b, e.name + std::string(kVelocitySuffix), *e.velocity);
  }
  put_u32(b, crc_of(b.data(), b.size()));
  return b;
}

ParameterSet decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 10) throw FormatError("checkpoint too short");
  if (std::memcmp(bytes.data(), "DATK", 4) != 0) throw FormatError("checkpoint magic mismatch");
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " unsupported");
  }
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.u32("checksum") != crc_of(bytes.data(), body)) throw FormatError("checkpoint checksum mismatch");

  ParameterSet out;
  Reader r(bytes.data() + 6, body - 6);
  while (!r.done()) {
    const std::uint32_t len = r.u32("name length");
    const std::string name = r.bytes(len, "name");
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 8) throw FormatError("checkpoint rank " + std::to_string(rank) + " invalid");
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.u32("dims");
      if (d == 0) throw FormatError("checkpoint dimension 0 in " + name);
    }
    Tensor t(shape);
    for (auto& v : t.vec()) v = static_cast<double>(std::bit_cast<float>(r.u32("payload")));
    if (name.ends_with(kVelocitySuffix)) {
      const std::string owner = name.substr(0, name.size() - kVelocitySuffix.size());
      if (!out.contains(owner)) throw FormatError("velocity record before its parameter: " + name);
      auto& e = out.entry(owner);
      if (e.value.shape() != t.shape()) throw FormatError("velocity shape mismatch: " + name);
      e.velocity = std::move(t);
    } else {
      if (out.contains(name)) throw FormatError("duplicate checkpoint record " + name);
      out.add(name, std::move(t), !non_trainable_name(name));
    }
  }
  return out;
}

void save_checkpoint(const ParameterSet& params, const fs::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

ParameterSet load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void restore_params(ParameterSet& into, const ParameterSet& from) {
  for (auto& e : into.entries()) {
    if (!from.contains(e.name)) throw FormatError("checkpoint lacks parameter " + e.name);
    const auto& src = from.entry(e.name);
    if (src.value.shape() != e.value.shape()) {
      throw FormatError("checkpoint shape mismatch for " + e.name + ": " + shape_str(src.value.shape()));
    }
    e.value = src.value;
    e.velocity = src.velocity;
  }
}

// Metrics.

void write_metrics(const std::vector<MetricsRow>& rows, const fs::path& path, WriteMode mode) {
  bool need_header = mode == WriteMode::Truncate;
  if (mode == WriteMode::Append) {
    std::error_code ec;
    need_header = !fs::exists(path, ec) || fs::file_size(path, ec) == 0;
  }
  std::ofstream out(path, std::ios::binary | (mode == WriteMode::Truncate ? std::ios::trunc : std::ios::app));
  if (!out) throw IoError("cannot write metrics " + path.string());
  if (need_header) out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    for (const auto* s : {&r.run_id, &r.split, &r.metric_name}) {
      if (s->find_first_of(",\"\n") != std::string::npos) throw ConfigError("metrics field contains a separator: " + *s);
    }
    out << r.run_id << ',' << r.epoch << ',' << r.split << ',' << r.metric_name << ','
        << format_double(r.value) << ',' << r.seed << ',' << format_double(r.wall_seconds) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

// Binary image records.

data::Dataset load_image_binary(const fs::path& path, const models::ImageShape& shape,
                                std::size_t classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t per = shape.numel(), rec = per + 1;
  if (bytes.size() % rec != 0) {
    throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of the record size " + std::to_string(rec));
  }
  data::Dataset out;
  out.classes = classes;
  const std::size_t n = bytes.size() / rec;
  if (n == 0) return out;
  out.images = Tensor({n, shape.channels, shape.height, shape.width});
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t label = bytes[i * rec];
    if (label >= classes) {
      throw FormatError(path.string() + ": record " + std::to_string(i) + " has label " +
                        std::to_string(label) + " >= " + std::to_string(classes));
    }
    out.labels[i] = label;
    for (std::size_t j = 0; j < per; ++j) out.images[i * per + j] = bytes[i * rec + 1 + j] / 255.0;
  }
  return out;
}

data::Dataset load_cifar_binary(const fs::path& path) {
  return load_image_binary(path, {3, 32, 32}, 10);
}

void save_image_binary(const data::Dataset& dataset, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  if (!dataset.empty()) {
    const std::size_t per = dataset.images.numel() / dataset.size();
    std::vector<char> rec(per + 1);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.labels[i] < 0 || dataset.labels[i] > 255) throw ConfigError("label does not fit a byte");
      rec[0] = static_cast<char>(dataset.labels[i]);
      for (std::size_t j = 0; j < per; ++j) {
        const double v = std::clamp(dataset.images[i * per + j], 0.0, 1.0);
        rec[1 + j] = static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0)));
      }
      out.write(rec.data(), static_cast<std::streamsize>(rec.size()));
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace datk::io

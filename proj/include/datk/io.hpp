#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "datk/attacks.hpp"
#include "datk/data.hpp"
#include "datk/params.hpp"
#include "datk/trainer.hpp"

namespace datk::io {

enum class DataSource { Synthetic, Binary };

// Everything a CLI run needs. Serialized as flat key=value lines.
struct RunConfig {
  trainer::TrainConfig train;
  DataSource source = DataSource::Synthetic;
  data::SyntheticSpec synthetic;
  std::size_t train_per_class = 128;
  std::size_t test_per_class = 32;
  // Binary image files (label byte + C*H*W pixel bytes per record).
  std::string train_path;
  std::string test_path;
  // Evaluation attack.
  double eval_epsilon = 8.0 / 255.0;
  double eval_alpha = 2.0 / 255.0;
  int eval_steps = 10;
  std::string checkpoint;
  std::string out;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Parses key=value lines; '#' starts a comment, blank lines are ignored.
// Unknown keys, duplicate keys and malformed values throw ConfigError that
// names the line.
RunConfig parse_config(std::string_view text, const RunConfig& base = {});
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});
std::string serialize_config(const RunConfig& cfg);
// Applies one key=value assignment.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::vector<std::string> config_keys();

// Shortest representation that parses back to the same double.
std::string format_double(double v);

// Checkpoint layout, all integers little-endian:
//   "DATK" | u16 version | records... | u32 CRC-32 of every preceding byte
// record: u32 name length | name | u32 rank | u32 dims[rank] | f32 values
// Optimizer velocity is stored as a record named "<param>@velocity".
inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
// Entries ending in ".running_mean" or ".running_var", or named
// "aag.amplitude_mean", are restored as non-trainable.
ParameterSet load_checkpoint(const std::filesystem::path& path);
// Encoded bytes of save_checkpoint.
std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& params);
ParameterSet decode_checkpoint(const std::vector<std::uint8_t>& bytes);
// Copies values and velocities of every entry of `into` from `from`.
// Missing names or shape mismatches throw FormatError.
void restore_params(ParameterSet& into, const ParameterSet& from);

struct MetricsRow {
  std::string run_id;
  int epoch = 0;
  std::string split;
  std::string metric_name;
  double value = 0.0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

enum class WriteMode { Append, Truncate };

inline constexpr std::string_view kMetricsHeader =
    "run_id,epoch,split,metric_name,value,seed,wall_seconds";

// Header is written only when the file starts empty. Flushed on return.
void write_metrics(const std::vector<MetricsRow>& rows, const std::filesystem::path& path,
                   WriteMode mode);

// CIFAR-10 binary: records of 1 label byte (0-9) and 3072 pixel bytes.
data::Dataset load_cifar_binary(const std::filesystem::path& path);
// Same record layout for any image shape and label bound.
data::Dataset load_image_binary(const std::filesystem::path& path, const models::ImageShape& shape,
                                std::size_t classes);
// Quantizes to bytes (round to nearest) in the same record layout.
void save_image_binary(const data::Dataset& dataset, const std::filesystem::path& path);

}  // namespace datk::io

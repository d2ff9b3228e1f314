#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "datk/data.hpp"
#include "datk/io.hpp"

namespace datk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitIo = 2;

// args excludes the program name. Never throws; errors map to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct Splits {
  data::Dataset train;
  data::Dataset test;
};
// Synthetic draws use the run seed; binary files are read from the paths.
Splits load_splits(const io::RunConfig& cfg);

// "seed=<s> key=value ..." over every config key, on one line.
std::string provenance_line(const io::RunConfig& cfg);

}  // namespace datk::cli

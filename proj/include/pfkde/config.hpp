#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pfkde/model.hpp"

namespace pfkde {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model configuration: a UTF-8 key=value file with keys A, B (row-major,
/// comma-separated), T, seed and optionally schema_version, Q, R. Blank lines
/// and lines starting with '#' are ignored; any other key is an error.
struct ModelConfig {
  static constexpr int kSchemaVersion = 1;

  Matrix a;
  Matrix b;
  Matrix q;  // empty means identity
  Matrix r;  // empty means identity
  std::size_t horizon = 50;
  std::uint64_t seed = 2;
  int schema_version = kSchemaVersion;
  std::string source = "<default>";

  /// The 2-D benchmark with T = 50. Data seed 2 is the first whose
  /// posterior at T puts (-2, -2) within 2.5 standard deviations of the mode.
  static ModelConfig benchmark();

  LinearGaussianModel model() const;

  /// (key, value) pairs for CSV header echoes.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

ModelConfig parse_model_config(const std::string& text, const std::string& origin = "<string>");

/// Throws ConfigError naming the path if it cannot be read.
ModelConfig load_model_config(const std::filesystem::path& path);

std::vector<double> parse_real_list(const std::string& text);
std::vector<unsigned> parse_unsigned_list(const std::string& text);

}  // namespace pfkde

namespace pfkde {

/// Invalid command-line or recipe parameters.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace pfkde

#pragma once

// Experiment configuration files: flat "key = value" lines grouped under
// [section] headers, '#' or ';' starting a comment. Lists are comma-separated;
// "a:step:b" expands to an inclusive arithmetic range.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tadc/bounds.hpp"
#include "tadc/errors.hpp"
#include "tadc/harness.hpp"

namespace tadc {

class ConfigError : public Error {
 public:
  ConfigError(const std::string& source, int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

struct ConfigEntry {
  std::string value;
  int line = 0;
};

struct ConfigFile {
  std::string source = "<config>";
  // section -> key -> entry, plus insertion order of keys within a section
  std::map<std::string, std::map<std::string, ConfigEntry>> sections;
  std::map<std::string, std::vector<std::string>> key_order;
  std::map<std::string, int> section_line;  // first header occurrence
};

ConfigFile parse_config(std::istream& in, const std::string& source = "<config>");
ConfigFile parse_config_string(const std::string& text, const std::string& source = "<config>");
ConfigFile parse_config_file(const std::string& path);

std::vector<std::string> split_list(const std::string& value);
/// Comma list of numbers and "a:step:b" ranges.
std::vector<double> parse_number_list(const std::string& value);

struct BoundSettings {
  bool compute = true;
  long hybrid_draws = 2000;
  NpaMode npa_mode = NpaMode::monte_carlo;
  long npa_draws = 100000;
  bool data_equals_pilot = true;  // jpd-ratio: X_d = X_p (needs T_d = T_p)
};

struct SisoSettings {
  std::vector<double> thresholds;  // tau2 values; tau1 = -tau2
  std::vector<double> gbar_values;  // first component of gbar; the second is 0
  int T_p = 100;
};

struct CliConfig {
  SweepPlan plan;
  BoundSettings bounds;
  SisoSettings siso;
  std::string output_path;

  /// Every effective setting as sorted "section.key=value" lines; thread
  /// counts and output paths are excluded so they never change the hash.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// Unknown sections or keys, malformed values and invalid combinations raise
/// ConfigError carrying the offending line.
CliConfig load_config(const ConfigFile& file);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace tadc

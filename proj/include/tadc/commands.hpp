#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tadc/config.hpp"

namespace tadc {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInvalidPoints = 3;

struct CommandOptions {
  int threads = 1;
  bool strict = false;
};

/// A CSV-shaped result. Cells are preformatted so serialization is exact.
struct Table {
  std::vector<std::string> meta;  // written as "# ..." lines
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct CommandResult {
  Table table;
  nlohmann::ordered_json json;
  int exit_code = kExitOk;
  std::vector<std::string> diagnostics;
};

std::string format_number(double v);
std::string format_db(double linear);

void write_csv(std::ostream& out, const Table& table);
/// "out.csv" -> "out.json"; other names just gain ".json".
std::string json_twin_path(const std::string& csv_path);

CommandResult cmd_crlb(const CliConfig& cfg, const CommandOptions& opts);
CommandResult cmd_siso_crlb(const CliConfig& cfg, const CommandOptions& opts);
CommandResult cmd_estimate(const CliConfig& cfg, const CommandOptions& opts);
CommandResult cmd_jpd_ratio(const CliConfig& cfg, const CommandOptions& opts);

struct SelftestReport {
  std::vector<std::pair<std::string, bool>> checks;
  bool passed() const;
};

/// Fast invariant checks over every module; output is one PASS/FAIL line each.
SelftestReport run_selftest(std::ostream& log, int threads);

}  // namespace tadc

#pragma once

/// Command-line front end: `vcam <command> [--key value ...]`.
///
/// Every setting is a flat dotted key (`T`, `estimation.K_grid`,
/// `penalty.a`, ...). Values come from defaults, then an optional
/// `--config FILE` of `key = value` lines, then flags; later sources win.

#include "vcam/simulation.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vcam::cli {

enum class Command { simulate, fit, identify, mc, grids };

const char* to_string(Command command);

struct CommandConfig {
  Command command = Command::mc;
  ScenarioSpec scenario;
  std::string input;     ///< dataset CSV (fit, identify)
  std::string output;    ///< output file, or directory for grids
  std::string fit_path;  ///< fit artifact (identify, grids)
  std::string grids_dir; ///< fit: also write function grids here
  int threads = 1;
  int grid_points = 201;
};

/// Invalid configuration; key() names the offending setting.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// All recognized keys, in documentation order.
std::vector<std::string> known_keys();

/// Parses `args` (everything after the program name). `env_threads` stands in
/// for the VCAM_THREADS environment variable. Throws ConfigError.
CommandConfig parse_config(const std::vector<std::string>& args,
                           const std::optional<std::string>& env_threads = std::nullopt);

/// Executes a parsed command. Returns the process exit status; diagnostics go
/// to `err`, summaries to `out`.
int run(const CommandConfig& config, std::ostream& out, std::ostream& err);

/// Full entry point: parse, run, map errors to exit codes (2 for
/// configuration errors, 1 for runtime failures).
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

std::string usage();

}  // namespace vcam::cli

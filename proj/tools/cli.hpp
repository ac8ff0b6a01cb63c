#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semamba/data/synth.hpp"
#include "semamba/train/config.hpp"

namespace semamba::cli {

enum ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericalError = 4,
};

/// Everything a command can consume, in one document. Precedence, lowest
/// first: built-in defaults, the --config file, command-line flags.
struct RunConfig {
  std::string command;
  std::string data_root;
  std::string manifest;
  std::string out_dir;
  std::string checkpoint;
  std::string predictions;
  std::string subset;  // "test", "validation", "all"; empty picks per command
  std::string method;
  std::vector<std::string> metrics;
  bool svg = false;
  train::TrainConfig train;
  data::SynthOptions synth;

  [[nodiscard]] nlohmann::json to_json() const;
  /// Unknown keys throw ConfigError.
  [[nodiscard]] static RunConfig from_json(const nlohmann::json& j);
};

/// Name of the resolved-config snapshot written into every output directory.
inline constexpr const char* kResolvedConfig = "run_config_resolved.json";

/// Entry point of the `semamba` tool. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload for tests: args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace semamba::cli

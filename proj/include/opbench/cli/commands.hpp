#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "opbench/cli/config.hpp"

namespace opbench::cli {

/// Flags shared by the subcommands; unset values fall back to the config.
struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<std::filesystem::path> out;
  std::vector<std::string> filter;
  std::vector<std::string> groups;
};

/// Loads the config and applies the command-line overrides.
SuiteConfig resolve_config(const CommandOptions& opts);

/// Each command returns the process exit code and reports progress on `log`.
int cmd_generate(const CommandOptions& opts, std::ostream& log);
int cmd_train(const CommandOptions& opts, std::ostream& log);
int cmd_benchmark(const CommandOptions& opts, std::ostream& log);
int cmd_report(const CommandOptions& opts, std::ostream& log);
int cmd_validate(const CommandOptions& opts, std::ostream& log);

}  // namespace opbench::cli

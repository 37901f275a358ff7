#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "opbench/harness/harness.hpp"
#include "opbench/train/train.hpp"

namespace opbench::cli {

/// Everything a suite run depends on. Datasets without an explicit seed use
/// the master seed, so paired datasets share their inputs by default.
struct SuiteConfig {
  std::vector<harness::DatasetSpec> datasets;
  std::vector<harness::ModelEntry> models;
  train::TrainConfig train;
  std::vector<harness::TaskSpec> tasks;
  std::filesystem::path output = "opbench-out";
  std::uint64_t seed = 0;
  bool deterministic = false;

  static SuiteConfig from_json(const nlohmann::json& j);
  static SuiteConfig load(const std::filesystem::path& path);
  /// Canonical form with every default filled in.
  nlohmann::json to_json() const;
  /// FNV-1a of the canonical form without the output directory.
  std::string hash() const;
  /// Re-derives dataset seeds after the master seed changed.
  void set_seed(std::uint64_t seed);
  void validate() const;

 private:
  std::vector<bool> explicit_seed_;
};

}  // namespace opbench::cli

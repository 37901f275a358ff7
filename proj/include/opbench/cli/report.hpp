#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "opbench/harness/harness.hpp"

namespace opbench::cli {

/// Record selection from "key=value[,value...]" terms; terms on different keys
/// must all hold. Keys: model, dataset, task, parameter, seed.
struct Filter {
  std::map<std::string, std::set<std::string>> terms;

  /// Unknown keys and malformed terms raise UsageError.
  static Filter parse(const std::vector<std::string>& exprs);
  bool matches(const harness::ExperimentRecord& r) const;
  bool empty() const { return terms.empty(); }
};

/// Mean and population spread over seeds of the per-seed means.
struct Cell {
  double mean = 0.0;
  double std = 0.0;
  std::size_t seeds = 0;
  std::size_t failed = 0;
  /// 1-3 for the best three entries of the ranking group, 0 otherwise.
  int rank = 0;

  bool empty() const { return seeds == 0; }
};

/// Relative errors as x10^-2 with two decimals ("1.08±0.06"), three below 1.
std::string format_error(double mean, double std);
std::string format_cell(const Cell& cell);

struct ReportResult {
  std::vector<std::filesystem::path> files;
  std::size_t records = 0;
  std::vector<std::string> warnings;
};

/// Writes per-task tables (.txt, .csv) and plots (.svg) plus index.txt into
/// `dir`. Output depends only on the records (and the echoed config).
ReportResult render_report(const std::vector<harness::ExperimentRecord>& records, const std::filesystem::path& dir,
                           const nlohmann::json& config_echo = nullptr);

}  // namespace opbench::cli

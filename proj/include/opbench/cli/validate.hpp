#pragma once

#include <set>
#include <string>
#include <vector>

namespace opbench::cli {

enum class OracleGroup { Metric = 1, Solver = 2, Layer = 3, Gradient = 4, MeshInvariance = 5 };

std::string to_string(OracleGroup g);

/// One oracle comparison: `value` is the measured discrepancy, `pass` means
/// value <= tolerance (or an expected error was raised).
struct OracleCheck {
  OracleGroup group = OracleGroup::Metric;
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

/// Runs solver, layer and model oracles against independent reference
/// computations. An empty selection runs every group.
std::vector<OracleCheck> run_oracles(const std::set<OracleGroup>& groups = {});

}  // namespace opbench::cli

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opbench/forge/grf.hpp"
#include "opbench/forge/solver_config.hpp"
#include "opbench/grid/grid.hpp"

namespace opbench::forge {

/// Names accepted by generate_dataset.
const std::vector<std::string>& generated_datasets();

struct GenerateConfig {
  SolverConfig solver;
  /// Input distribution; its seed field is replaced per sample.
  GRFSpec grf;
  /// Burgers is solved on a grid `refine` times finer and subsampled.
  std::size_t refine = 4;
  /// Shallow water dam radius range.
  double radius_lo = 0.1;
  double radius_hi = 0.35;
  /// Darcy coefficient values below / above the GRF threshold at zero.
  double a_low = 3.0;
  double a_high = 12.0;
  /// Navier-Stokes forcing amplitude of 0.1 (sin 2pi(x+y) + cos 2pi(x+y)).
  double forcing_amplitude = 0.1;
  /// Worker threads; results do not depend on this.
  unsigned jobs = 1;
};

/// Defaults for a dataset name; throws ConfigError for unsupported names.
GenerateConfig default_generate_config(const std::string& name);

/// `count` samples with per-sample seeds derive_seed(seed, index). Splits are
/// left empty. The stress and strain datasets draw identical microstructures
/// for the same seed.
DatasetBundle generate_dataset(const std::string& name, std::size_t count,
                               const GenerateConfig& cfg, std::uint64_t seed);

/// Convenience overload with default_generate_config(name) at `resolution`.
DatasetBundle generate_dataset(const std::string& name, std::size_t count, std::size_t resolution,
                               std::uint64_t seed);

}  // namespace opbench::forge

#pragma once

#include <span>
#include <vector>

#include "opbench/forge/solver_config.hpp"

namespace opbench::forge {

struct BurgersSolution {
  std::vector<double> final;
  /// cfg.stored_steps snapshots at t_final * j / stored_steps, j = 1..stored_steps.
  std::vector<std::vector<double>> snapshots;
  std::size_t steps = 0;
  double dt = 0.0;
  /// Largest |mean(u_n) - mean(u_0)| over all steps.
  double max_mean_drift = 0.0;
};

/// Periodic viscous Burgers u_t + (u^2/2)_x = nu u_xx on [0, 1), advanced with
/// an integrating-factor RK4 pseudo-spectral scheme and 2/3-rule dealiasing.
/// `u0` holds cfg.resolution periodic samples x_j = j / n.
BurgersSolution solve_burgers_1d(std::span<const double> u0, const SolverConfig& cfg);

}  // namespace opbench::forge

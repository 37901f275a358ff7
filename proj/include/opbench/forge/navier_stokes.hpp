#pragma once

#include <span>
#include <vector>

#include "opbench/forge/solver_config.hpp"

namespace opbench::forge {

struct VorticitySolution {
  std::vector<double> final;
  std::vector<std::vector<double>> snapshots;
  std::size_t steps = 0;
  /// Largest |mean(w)| seen over all steps.
  double max_abs_mean = 0.0;
};

/// Incompressible 2D Navier-Stokes in vorticity form on the unit torus,
///   w_t + u . grad w = nu lap w + f,  u = (psi_y, -psi_x),  -lap psi = w.
/// Pseudo-spectral: Crank-Nicolson diffusion, Heun-averaged explicit advection
/// dealiased by the 2/3 rule. Fields are n x n row-major with axis 0 = x.
/// The forcing's mean mode is ignored so the mean vorticity stays fixed.
VorticitySolution solve_ns_vorticity(std::span<const double> w0, std::span<const double> forcing,
                                     const SolverConfig& cfg);

/// Velocity (u, v) recovered from a vorticity field, interleaved per point.
std::vector<double> velocity_from_vorticity(std::span<const double> w, std::size_t n);

}  // namespace opbench::forge

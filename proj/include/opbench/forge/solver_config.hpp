#pragma once

#include <cstddef>
#include <string>

namespace opbench::forge {

enum class Boundary { Periodic, Reflective };

/// Shared solver configuration. Every solver reads the fields it needs and
/// ignores the rest; the factory functions give each solver's defaults.
struct SolverConfig {
  std::size_t resolution = 64;
  /// Time step; <= 0 selects one from the stability bound.
  double dt = 0.0;
  double t_final = 1.0;
  std::size_t stored_steps = 0;
  /// Largest accepted Courant number before the solver refuses to step.
  double cfl_limit = 1.0;
  /// Courant number used when dt is chosen automatically.
  double cfl_target = 0.4;

  double nu = 0.01;
  double gravity = 1.0;
  double beta = 1.0;
  bool nonlinear = true;
  Boundary boundary = Boundary::Periodic;

  double tolerance = 1e-6;
  std::size_t max_iterations = 200;

  double modulus_soft = 1.0;
  double modulus_ratio = 10.0;
  double poisson = 0.3;
  double applied_strain = 0.05;
  bool pin_lateral = true;
  double cg_tolerance = 1e-10;
};

SolverConfig burgers_defaults();
SolverConfig darcy_defaults();
SolverConfig navier_stokes_defaults();
SolverConfig shallow_water_defaults();
SolverConfig elasticity_defaults();

}  // namespace opbench::forge

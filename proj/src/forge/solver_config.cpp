#include "opbench/forge/solver_config.hpp"

namespace opbench::forge {

SolverConfig burgers_defaults() {
  SolverConfig c;
  c.resolution = 128;
  c.nu = 0.01;
  c.t_final = 1.0;
  c.stored_steps = 10;
  c.boundary = Boundary::Periodic;
  return c;
}

SolverConfig darcy_defaults() {
  SolverConfig c;
  c.resolution = 47;
  c.beta = 1.0;
  c.dt = 1e-3;
  c.tolerance = 1e-6;
  c.max_iterations = 60;
  c.cg_tolerance = 1e-12;
  return c;
}

SolverConfig navier_stokes_defaults() {
  SolverConfig c;
  c.resolution = 64;
  c.nu = 1e-3;
  c.t_final = 1.0;
  c.dt = 1e-3;
  c.stored_steps = 5;
  return c;
}

SolverConfig shallow_water_defaults() {
  SolverConfig c;
  c.resolution = 64;
  c.gravity = 1.0;
  c.t_final = 0.2;
  c.stored_steps = 5;
  c.boundary = Boundary::Reflective;
  return c;
}

SolverConfig elasticity_defaults() {
  SolverConfig c;
  c.resolution = 32;
  return c;
}

}  // namespace opbench::forge

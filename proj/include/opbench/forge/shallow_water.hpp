#pragma once

#include <span>
#include <vector>

#include "opbench/forge/solver_config.hpp"

namespace opbench::forge {

/// Conserved variables on an n x n cell-centred grid, row-major, axis 0 = x.
struct SweState {
  std::vector<double> h, hu, hv;
};

struct SweSolution {
  SweState final;
  std::vector<SweState> snapshots;
  std::size_t steps = 0;
  /// Total mass sum(h) * dx * dy after each step, starting with the initial mass.
  std::vector<double> mass;
};

/// First-order finite-volume shallow water with local Lax-Friedrichs fluxes on
/// the unit square and the bathymetry source -g h grad b.
SweSolution solve_shallow_water(const SweState& init, std::span<const double> bathymetry,
                                const SolverConfig& cfg);

/// Circular dam: depth `inner` within `radius` of (cx, cy), `outer` elsewhere.
SweState radial_dam_break(std::size_t n, double radius, double inner = 2.0, double outer = 1.0,
                          double cx = 0.5, double cy = 0.5);

}  // namespace opbench::forge

#pragma once

#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "opbench/forge/solver_config.hpp"
#include "opbench/grid/grid.hpp"

namespace opbench::forge {

struct DarcySolution {
  /// Pressure at every node of the n x n nodal grid (boundary nodes are zero).
  std::vector<double> u;
  /// max |div(a grad u) + f| over interior nodes at the returned state.
  double residual = 0.0;
  std::size_t pseudo_steps = 0;
};

/// Five-point flux-form operator A with harmonic-mean face coefficients on the
/// interior nodes of an n x n unit-square nodal grid, so that A u = -div(a grad u)
/// under zero Dirichlet data. Rows are ordered (i - 1) * (n - 2) + (j - 1).
Eigen::SparseMatrix<double> darcy_operator(std::span<const double> a, std::size_t n);

/// Steady state of  u_t - div(a grad u) = beta  with u = 0 on the boundary,
/// reached by implicit pseudo-time marching with a growing step.
DarcySolution solve_darcy_steady(std::span<const double> a, const SolverConfig& cfg);

/// Interior residual  div(a grad u) + f  of a nodal field, row-major over all nodes
/// (boundary entries zero).
std::vector<double> darcy_residual(std::span<const double> a, std::span<const double> u,
                                   double f, std::size_t n);

}  // namespace opbench::forge

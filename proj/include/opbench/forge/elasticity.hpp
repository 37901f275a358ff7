#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/SparseCore>

#include "opbench/forge/grf.hpp"
#include "opbench/forge/solver_config.hpp"

namespace opbench::forge {

/// Binary two-phase composite on an n x n pixel grid, row-major with axis 0 = x.
struct Microstructure {
  std::size_t n = 0;
  std::vector<std::uint8_t> phase;  // 0 = soft, 1 = stiff

  double stiff_fraction() const;
  void validate() const;
};

/// Thresholds a 2D GRF at its median, so exactly floor(n^2 / 2) pixels are stiff.
Microstructure sample_microstructure(const GRFSpec& spec, std::size_t n);

struct ElasticityFields {
  std::size_t n = 0;
  /// Element-centre values, n x n.
  std::vector<double> sxx, syy, sxy;
  /// Strains; exy is the engineering shear strain du_x/dy + du_y/dx.
  std::vector<double> exx, eyy, exy;
  /// Nodal displacements, (n + 1) x (n + 1).
  std::vector<double> ux, uy;
  /// Total vertical reaction on the fixed bottom edge and on the loaded top edge.
  double reaction_bottom = 0.0;
  double reaction_top = 0.0;
  double residual = 0.0;
  std::size_t cg_iterations = 0;
};

/// 8 x 8 stiffness of a square bilinear plane-stress element with unit modulus.
/// Local node order (-1,-1), (1,-1), (1,1), (-1,1); dofs interleaved (ux, uy).
Eigen::Matrix<double, 8, 8> q4_unit_stiffness(double poisson);

/// Global stiffness over all 2 (n + 1)^2 dofs; node (i, j) has dofs 2 (i (n + 1) + j) + {0, 1}.
Eigen::SparseMatrix<double> assemble_stiffness(const Microstructure& m, const SolverConfig& cfg);

/// Constrained dofs and their prescribed values for mode-I tension: u_y = 0 on
/// the bottom edge, u_y = applied_strain on the top edge, and u_x pinned at the
/// bottom-left node when cfg.pin_lateral is set.
std::vector<std::pair<std::size_t, double>> tension_constraints(std::size_t n, const SolverConfig& cfg);

/// Linear plane-stress FEM on the pixel mesh of the unit square.
ElasticityFields solve_plane_stress_composite(const Microstructure& m, const SolverConfig& cfg);

}  // namespace opbench::forge

#include "opbench/forge/elasticity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <Eigen/IterativeLinearSolvers>

#include "opbench/errors.hpp"

namespace opbench::forge {

double Microstructure::stiff_fraction() const {
  if (phase.empty()) return 0.0;
  return double(std::count(phase.begin(), phase.end(), std::uint8_t{1})) / double(phase.size());
}

void Microstructure::validate() const {
  if (n < 1 || phase.size() != n * n) throw ShapeError("microstructure must hold n^2 phases");
  for (auto p : phase)
    if (p > 1) throw DomainError("microstructure phases must be 0 or 1");
}

Microstructure sample_microstructure(const GRFSpec& spec, std::size_t n) {
  GRFSpec s = spec;
  s.ndim = 2;
  const auto field = sample_grf(s, GridSpec::square(n, GridLayout::CellCentered));
  std::vector<std::size_t> order(field.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return field[a] > field[b]; });
  Microstructure m;
  m.n = n;
  m.phase.assign(n * n, 0);
  for (std::size_t r = 0; r < field.size() / 2; ++r) m.phase[order[r]] = 1;
  return m;
}

namespace {

constexpr double kXi[4] = {-1.0, 1.0, 1.0, -1.0};
constexpr double kEta[4] = {-1.0, -1.0, 1.0, 1.0};

Eigen::Matrix3d plane_stress_d(double E, double nu) {
  Eigen::Matrix3d D;
  D << 1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, 0.5 * (1.0 - nu);
  return D * (E / (1.0 - nu * nu));
}

/// Strain-displacement matrix at (xi, eta) for a square element of side h.
Eigen::Matrix<double, 3, 8> q4_b(double xi, double eta, double h) {
  Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
  for (int a = 0; a < 4; ++a) {
    const double dndx = 0.25 * kXi[a] * (1.0 + kEta[a] * eta) * (2.0 / h);
    const double dndy = 0.25 * kEta[a] * (1.0 + kXi[a] * xi) * (2.0 / h);
    B(0, 2 * a) = dndx;
    B(1, 2 * a + 1) = dndy;
    B(2, 2 * a) = dndy;
    B(2, 2 * a + 1) = dndx;
  }
  return B;
}

std::array<std::size_t, 8> element_dofs(std::size_t i, std::size_t j, std::size_t n) {
  const std::size_t s = n + 1;
  const std::size_t nodes[4] = {i * s + j, (i + 1) * s + j, (i + 1) * s + j + 1, i * s + j + 1};
  std::array<std::size_t, 8> d{};
  for (int a = 0; a < 4; ++a) {
    d[2 * a] = 2 * nodes[a];
    d[2 * a + 1] = 2 * nodes[a] + 1;
  }
  return d;
}

double element_modulus(const Microstructure& m, std::size_t e, const SolverConfig& cfg) {
  return m.phase[e] ? cfg.modulus_soft * cfg.modulus_ratio : cfg.modulus_soft;
}

}  // namespace

Eigen::Matrix<double, 8, 8> q4_unit_stiffness(double poisson) {
  const Eigen::Matrix3d D = plane_stress_d(1.0, poisson);
  const double g = 1.0 / std::sqrt(3.0);
  const double h = 1.0;  // the stiffness of a square element is size independent
  Eigen::Matrix<double, 8, 8> K = Eigen::Matrix<double, 8, 8>::Zero();
  for (double xi : {-g, g})
    for (double eta : {-g, g}) {
      const auto B = q4_b(xi, eta, h);
      K += B.transpose() * D * B * (h * h / 4.0);
    }
  return K;
}

Eigen::SparseMatrix<double> assemble_stiffness(const Microstructure& m, const SolverConfig& cfg) {
  m.validate();
  const std::size_t n = m.n;
  const auto Ke = q4_unit_stiffness(cfg.poisson);
  const Eigen::Index ndof = Eigen::Index(2 * (n + 1) * (n + 1));
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(64 * n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double E = element_modulus(m, i * n + j, cfg);
      const auto d = element_dofs(i, j, n);
      for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) trip.emplace_back(Eigen::Index(d[r]), Eigen::Index(d[c]), E * Ke(r, c));
    }
  Eigen::SparseMatrix<double> K(ndof, ndof);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

std::vector<std::pair<std::size_t, double>> tension_constraints(std::size_t n, const SolverConfig& cfg) {
  const std::size_t s = n + 1;
  std::vector<std::pair<std::size_t, double>> bc;
  if (cfg.pin_lateral) bc.emplace_back(0, 0.0);  // ux at node (0, 0)
  for (std::size_t i = 0; i < s; ++i) bc.emplace_back(2 * (i * s) + 1, 0.0);
  for (std::size_t i = 0; i < s; ++i) bc.emplace_back(2 * (i * s + n) + 1, cfg.applied_strain);
  std::sort(bc.begin(), bc.end());
  return bc;
}

ElasticityFields solve_plane_stress_composite(const Microstructure& m, const SolverConfig& cfg) {
  m.validate();
  if (!(cfg.modulus_soft > 0.0) || !(cfg.modulus_ratio > 0.0))
    throw ConfigError("elasticity: moduli must be positive");
  if (!(cfg.poisson > -1.0 && cfg.poisson < 0.5)) throw ConfigError("elasticity: invalid Poisson ratio");
  const auto bc = tension_constraints(m.n, cfg);
  const bool has_x = std::any_of(bc.begin(), bc.end(), [](auto& c) { return c.first % 2 == 0; });
  if (!has_x)
    throw ConfigError(
        "elasticity: insufficient constraints, no horizontal displacement is fixed so the "
        "stiffness system is singular");

  const std::size_t n = m.n;
  const auto K = assemble_stiffness(m, cfg);
  const std::size_t ndof = std::size_t(K.rows());
  std::vector<int> fixed(ndof, -1);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(Eigen::Index(ndof));
  for (std::size_t c = 0; c < bc.size(); ++c) {
    fixed[bc[c].first] = int(c);
    u[Eigen::Index(bc[c].first)] = bc[c].second;
  }
  std::vector<Eigen::Index> free_map(ndof, -1);
  Eigen::Index nfree = 0;
  for (std::size_t d = 0; d < ndof; ++d)
    if (fixed[d] < 0) free_map[d] = nfree++;

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
  for (int col = 0; col < K.outerSize(); ++col)
    for (Eigen::SparseMatrix<double>::InnerIterator it(K, col); it; ++it) {
      const auto r = std::size_t(it.row()), c = std::size_t(it.col());
      if (free_map[r] < 0) continue;
      if (free_map[c] >= 0)
        trip.emplace_back(free_map[r], free_map[c], it.value());
      else
        rhs[free_map[r]] -= it.value() * u[Eigen::Index(c)];
    }
  Eigen::SparseMatrix<double> Kff(nfree, nfree);
  Kff.setFromTriplets(trip.begin(), trip.end());

  ElasticityFields out;
  out.n = n;
  if (rhs.norm() > 0.0) {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
    cg.setTolerance(cfg.cg_tolerance);
    cg.setMaxIterations(std::max<Eigen::Index>(4 * nfree, 1000));
    cg.compute(Kff);
    if (cg.info() != Eigen::Success) throw SolverError("elasticity: preconditioner setup failed");
    const Eigen::VectorXd uf = cg.solve(rhs);
    if (cg.info() != Eigen::Success)
      throw SolverError("elasticity: conjugate gradients did not converge, residual " +
                        std::to_string(cg.error()));
    out.cg_iterations = std::size_t(cg.iterations());
    out.residual = cg.error();
    for (std::size_t d = 0; d < ndof; ++d)
      if (free_map[d] >= 0) u[Eigen::Index(d)] = uf[free_map[d]];
  }

  const Eigen::VectorXd reaction = K * u;
  const std::size_t s = n + 1;
  for (std::size_t i = 0; i < s; ++i) {
    out.reaction_bottom += reaction[Eigen::Index(2 * (i * s) + 1)];
    out.reaction_top += reaction[Eigen::Index(2 * (i * s + n) + 1)];
  }

  out.ux.resize(s * s);
  out.uy.resize(s * s);
  for (std::size_t p = 0; p < s * s; ++p) {
    out.ux[p] = u[Eigen::Index(2 * p)];
    out.uy[p] = u[Eigen::Index(2 * p + 1)];
  }
  const double h = 1.0 / double(n);
  const auto Bc = q4_b(0.0, 0.0, h);
  for (auto* f : {&out.sxx, &out.syy, &out.sxy, &out.exx, &out.eyy, &out.exy}) f->resize(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto d = element_dofs(i, j, n);
      Eigen::Matrix<double, 8, 1> ue;
      for (int k = 0; k < 8; ++k) ue[k] = u[Eigen::Index(d[k])];
      const Eigen::Vector3d eps = Bc * ue;
      const Eigen::Vector3d sig = plane_stress_d(element_modulus(m, i * n + j, cfg), cfg.poisson) * eps;
      const std::size_t e = i * n + j;
      out.exx[e] = eps[0];
      out.eyy[e] = eps[1];
      out.exy[e] = eps[2];
      out.sxx[e] = sig[0];
      out.syy[e] = sig[1];
      out.sxy[e] = sig[2];
    }
  return out;
}

}  // namespace opbench::forge

#include "opbench/forge/darcy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>

#include "opbench/errors.hpp"

namespace opbench::forge {

namespace {

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

void check_coefficient(std::span<const double> a, std::size_t n) {
  if (n < 3) throw ConfigError("darcy: resolution must be >= 3");
  if (a.size() != n * n)
    throw ShapeError("darcy: coefficient has " + std::to_string(a.size()) + " values, expected " +
                     std::to_string(n * n));
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] > 0.0) || !std::isfinite(a[i]))
      throw DomainError("darcy: coefficient must be positive, a[" + std::to_string(i) +
                        "] = " + std::to_string(a[i]));
}

}  // namespace

Eigen::SparseMatrix<double> darcy_operator(std::span<const double> a, std::size_t n) {
  check_coefficient(a, n);
  const std::size_t m = n - 2;
  const double inv_h2 = double(n - 1) * double(n - 1);
  auto node = [n](std::size_t i, std::size_t j) { return i * n + j; };
  auto row = [m](std::size_t i, std::size_t j) { return Eigen::Index((i - 1) * m + (j - 1)); };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(5 * m * m);
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) {
      const double ac = a[node(i, j)];
      const double ae = harmonic(ac, a[node(i + 1, j)]);
      const double aw = harmonic(ac, a[node(i - 1, j)]);
      const double an = harmonic(ac, a[node(i, j + 1)]);
      const double as = harmonic(ac, a[node(i, j - 1)]);
      const auto r = row(i, j);
      trip.emplace_back(r, r, (ae + aw + an + as) * inv_h2);
      if (i + 2 < n) trip.emplace_back(r, row(i + 1, j), -ae * inv_h2);
      if (i > 1) trip.emplace_back(r, row(i - 1, j), -aw * inv_h2);
      if (j + 2 < n) trip.emplace_back(r, row(i, j + 1), -an * inv_h2);
      if (j > 1) trip.emplace_back(r, row(i, j - 1), -as * inv_h2);
    }
  Eigen::SparseMatrix<double> A(Eigen::Index(m * m), Eigen::Index(m * m));
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

std::vector<double> darcy_residual(std::span<const double> a, std::span<const double> u,
                                   double f, std::size_t n) {
  check_coefficient(a, n);
  const double inv_h2 = double(n - 1) * double(n - 1);
  std::vector<double> r(n * n, 0.0);
  auto at = [n](std::span<const double> v, std::size_t i, std::size_t j) { return v[i * n + j]; };
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) {
      const double ac = at(a, i, j), uc = at(u, i, j);
      const double flux = harmonic(ac, at(a, i + 1, j)) * (at(u, i + 1, j) - uc) -
                          harmonic(ac, at(a, i - 1, j)) * (uc - at(u, i - 1, j)) +
                          harmonic(ac, at(a, i, j + 1)) * (at(u, i, j + 1) - uc) -
                          harmonic(ac, at(a, i, j - 1)) * (uc - at(u, i, j - 1));
      r[i * n + j] = flux * inv_h2 + f;
    }
  return r;
}

DarcySolution solve_darcy_steady(std::span<const double> a, const SolverConfig& cfg) {
  const std::size_t n = cfg.resolution;
  const auto A = darcy_operator(a, n);
  const std::size_t m = n - 2;
  const Eigen::Index dofs = Eigen::Index(m * m);
  Eigen::VectorXd f = Eigen::VectorXd::Constant(dofs, cfg.beta);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(dofs);

  auto residual_inf = [&](const Eigen::VectorXd& v) { return (f - A * v).lpNorm<Eigen::Infinity>(); };

  DarcySolution sol;
  double dt = cfg.dt > 0.0 ? cfg.dt : 1e-3;
  double res = residual_inf(u);
  Eigen::SparseMatrix<double> eye(dofs, dofs);
  eye.setIdentity();
  while (res >= cfg.tolerance) {
    if (sol.pseudo_steps >= cfg.max_iterations) {
      std::ostringstream msg;
      msg << "darcy: no steady state after " << sol.pseudo_steps
          << " pseudo-time steps, residual " << res;
      throw SolverError(msg.str());
    }
    // Backward Euler in pseudo time: (I/dt + A) u_new = u/dt + f.
    Eigen::SparseMatrix<double> M = A + eye * (1.0 / dt);
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
    cg.setTolerance(cfg.cg_tolerance);
    cg.setMaxIterations(std::max<Eigen::Index>(10 * dofs, 1000));
    cg.compute(M);
    if (cg.info() != Eigen::Success) throw SolverError("darcy: preconditioner setup failed");
    Eigen::VectorXd rhs = u / dt + f;
    u = cg.solveWithGuess(rhs, u);
    res = residual_inf(u);
    ++sol.pseudo_steps;
    dt *= 10.0;
  }
  sol.residual = res;
  sol.u.assign(n * n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) sol.u[i * n + j] = u[Eigen::Index((i - 1) * m + (j - 1))];
  return sol;
}

}  // namespace opbench::forge

#include "opbench/forge/burgers.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "opbench/errors.hpp"
#include "opbench/forge/fft.hpp"

namespace opbench::forge {

namespace {

using cplx = std::complex<double>;

double max_abs(std::span<const double> u) {
  double m = 0.0;
  for (double v : u) m = std::max(m, std::abs(v));
  return m;
}

class BurgersRhs {
 public:
  BurgersRhs(std::size_t n, bool nonlinear) : n_(n), nonlinear_(nonlinear), fft_({n}), u_(n), sq_(n) {
    const std::size_t m = n / 2 + 1;
    ik_.resize(m);
    keep_.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      ik_[k] = cplx(0.0, 2.0 * std::numbers::pi * double(k));
      keep_[k] = (3 * k < n) ? 1.0 : 0.0;  // 2/3 rule
    }
    spec_.resize(m);
  }

  /// N(u_hat) = -i k FFT(u^2/2), dealiased. Also returns max|u| via `umax`.
  void eval(const std::vector<cplx>& uh, std::vector<cplx>& out, double& umax) {
    fft_.inverse(uh, u_);
    umax = max_abs(u_);
    if (!nonlinear_) {
      std::fill(out.begin(), out.end(), cplx(0.0, 0.0));
      return;
    }
    for (std::size_t i = 0; i < n_; ++i) sq_[i] = 0.5 * u_[i] * u_[i];
    fft_.forward(sq_, spec_);
    for (std::size_t k = 0; k < spec_.size(); ++k) out[k] = -ik_[k] * spec_[k] * keep_[k];
  }

  std::vector<double> physical(const std::vector<cplx>& uh) {
    std::vector<double> u(n_);
    fft_.inverse(uh, u);
    return u;
  }

  RealFft& fft() { return fft_; }

 private:
  std::size_t n_;
  bool nonlinear_;
  RealFft fft_;
  std::vector<double> u_, sq_;
  std::vector<cplx> ik_, spec_;
  std::vector<double> keep_;
};

}  // namespace

BurgersSolution solve_burgers_1d(std::span<const double> u0, const SolverConfig& cfg) {
  const std::size_t n = cfg.resolution;
  if (u0.size() != n)
    throw ShapeError("burgers: initial condition has " + std::to_string(u0.size()) +
                     " points, config resolution is " + std::to_string(n));
  if (n < 4) throw ConfigError("burgers: resolution must be >= 4");
  if (!(cfg.nu > 0.0)) throw ConfigError("burgers: viscosity must be positive");
  if (!(cfg.t_final > 0.0)) throw ConfigError("burgers: t_final must be positive");

  const double dx = 1.0 / double(n);
  const double umax0 = max_abs(u0);
  const std::size_t segments = std::max<std::size_t>(cfg.stored_steps, 1);
  const double seg_len = cfg.t_final / double(segments);
  double dt_req = cfg.dt > 0.0 ? cfg.dt
                               : (umax0 > 0.0 ? cfg.cfl_target * dx / umax0 : seg_len / 8.0);
  const std::size_t per_seg = std::max<std::size_t>(1, std::size_t(std::ceil(seg_len / dt_req - 1e-9)));
  const double dt = seg_len / double(per_seg);

  BurgersRhs rhs(n, cfg.nonlinear);
  const std::size_t m = n / 2 + 1;
  std::vector<cplx> uh(m);
  rhs.fft().forward(u0, uh);
  const double mean0 = uh[0].real() / double(n);

  std::vector<double> e_full(m), e_half(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double lk = -cfg.nu * std::pow(2.0 * std::numbers::pi * double(k), 2);
    e_full[k] = std::exp(lk * dt);
    e_half[k] = std::exp(lk * dt * 0.5);
  }

  BurgersSolution sol;
  sol.dt = dt;
  std::vector<cplx> a(m), b(m), c(m), d(m), tmp(m);
  for (std::size_t seg = 0; seg < segments; ++seg) {
    for (std::size_t s = 0; s < per_seg; ++s) {
      double umax = 0.0;
      rhs.eval(uh, a, umax);
      const double courant = dt * umax / dx;
      if (cfg.nonlinear && courant > cfg.cfl_limit) {
        std::ostringstream msg;
        msg << "burgers: CFL violation (Courant " << courant << " > " << cfg.cfl_limit
            << "); use dt <= " << cfg.cfl_target * dx / umax;
        throw SolverError(msg.str());
      }
      double ignored = 0.0;
      for (std::size_t k = 0; k < m; ++k) tmp[k] = e_half[k] * (uh[k] + 0.5 * dt * a[k]);
      rhs.eval(tmp, b, ignored);
      for (std::size_t k = 0; k < m; ++k) tmp[k] = e_half[k] * uh[k] + 0.5 * dt * b[k];
      rhs.eval(tmp, c, ignored);
      for (std::size_t k = 0; k < m; ++k) tmp[k] = e_full[k] * uh[k] + dt * e_half[k] * c[k];
      rhs.eval(tmp, d, ignored);
      for (std::size_t k = 0; k < m; ++k)
        uh[k] = e_full[k] * uh[k] +
                dt / 6.0 * (e_full[k] * a[k] + 2.0 * e_half[k] * (b[k] + c[k]) + d[k]);
      ++sol.steps;
      sol.max_mean_drift = std::max(sol.max_mean_drift, std::abs(uh[0].real() / double(n) - mean0));
    }
    if (cfg.stored_steps > 0) sol.snapshots.push_back(rhs.physical(uh));
  }
  sol.final = rhs.physical(uh);
  for (double v : sol.final)
    if (!std::isfinite(v)) throw SolverError("burgers: solution became non-finite");
  return sol;
}

}  // namespace opbench::forge

#include "opbench/forge/navier_stokes.hpp"

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

class VorticityOperator {
 public:
  explicit VorticityOperator(std::size_t n)
      : n_(n), m_(n / 2 + 1), fft_({n, n}), kx_(n * m_), ky_(n * m_), k2_(n * m_), keep_(n * m_),
        uh_(n * m_), vh_(n * m_), wxh_(n * m_), wyh_(n * m_), u_(n * n), v_(n * n), wx_(n * n),
        wy_(n * n), prod_(n * n) {
    const double tp = 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m_; ++j) {
        const std::size_t q = i * m_ + j;
        const long ki = wavenumber(i, n), kj = long(j);
        kx_[q] = tp * double(ki);
        ky_[q] = tp * double(kj);
        k2_[q] = kx_[q] * kx_[q] + ky_[q] * ky_[q];
        const bool keep = 3 * std::abs(ki) < long(n) && 3 * kj < long(n);
        keep_[q] = keep ? 1.0 : 0.0;
      }
  }

  std::size_t spectral_size() const { return n_ * m_; }
  RealFft& fft() { return fft_; }
  double k2(std::size_t q) const { return k2_[q]; }

  /// Spectral velocity from spectral vorticity.
  void velocity(const std::vector<cplx>& wh, std::vector<cplx>& uh, std::vector<cplx>& vh) const {
    for (std::size_t q = 0; q < wh.size(); ++q) {
      const cplx psi = q == 0 ? cplx(0.0, 0.0) : wh[q] / k2_[q];
      uh[q] = cplx(0.0, ky_[q]) * psi;
      vh[q] = -cplx(0.0, kx_[q]) * psi;
    }
  }

  /// Dealiased spectral advection term u.grad w; max speed returned in `umax`.
  void advection(const std::vector<cplx>& wh, std::vector<cplx>& out, double& umax) {
    velocity(wh, uh_, vh_);
    for (std::size_t q = 0; q < wh.size(); ++q) {
      wxh_[q] = cplx(0.0, kx_[q]) * wh[q];
      wyh_[q] = cplx(0.0, ky_[q]) * wh[q];
    }
    fft_.inverse(uh_, u_);
    fft_.inverse(vh_, v_);
    fft_.inverse(wxh_, wx_);
    fft_.inverse(wyh_, wy_);
    umax = 0.0;
    for (std::size_t p = 0; p < prod_.size(); ++p) {
      prod_[p] = u_[p] * wx_[p] + v_[p] * wy_[p];
      umax = std::max({umax, std::abs(u_[p]), std::abs(v_[p])});
    }
    fft_.forward(prod_, out);
    for (std::size_t q = 0; q < out.size(); ++q) out[q] *= keep_[q];
    out[0] = cplx(0.0, 0.0);
  }

 private:
  std::size_t n_, m_;
  RealFft fft_;
  std::vector<double> kx_, ky_, k2_, keep_;
  std::vector<cplx> uh_, vh_, wxh_, wyh_;
  std::vector<double> u_, v_, wx_, wy_, prod_;
};

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

}  // namespace

std::vector<double> velocity_from_vorticity(std::span<const double> w, std::size_t n) {
  VorticityOperator op(n);
  std::vector<cplx> wh(op.spectral_size()), uh(wh.size()), vh(wh.size());
  op.fft().forward(w, wh);
  op.velocity(wh, uh, vh);
  std::vector<double> u(n * n), v(n * n), out(2 * n * n);
  op.fft().inverse(uh, u);
  op.fft().inverse(vh, v);
  for (std::size_t p = 0; p < n * n; ++p) {
    out[2 * p] = u[p];
    out[2 * p + 1] = v[p];
  }
  return out;
}

VorticitySolution solve_ns_vorticity(std::span<const double> w0, std::span<const double> forcing,
                                     const SolverConfig& cfg) {
  const std::size_t n = cfg.resolution;
  if (n < 4) throw ConfigError("navier-stokes: resolution must be >= 4");
  if (w0.size() != n * n || forcing.size() != n * n)
    throw ShapeError("navier-stokes: fields must have resolution^2 = " + std::to_string(n * n) +
                     " values");
  if (!(cfg.nu > 0.0)) throw ConfigError("navier-stokes: viscosity must be positive");
  double wscale = 1.0;
  for (double x : w0) wscale = std::max(wscale, std::abs(x));
  if (std::abs(mean_of(w0)) > 1e-10 * wscale)
    throw DomainError("navier-stokes: initial vorticity must be mean-zero");

  VorticityOperator op(n);
  const std::size_t ms = op.spectral_size();
  std::vector<cplx> wh(ms), fh(ms), n1(ms), n2(ms), pred(ms);
  op.fft().forward(w0, wh);
  op.fft().forward(forcing, fh);
  fh[0] = cplx(0.0, 0.0);

  const std::size_t segments = std::max<std::size_t>(cfg.stored_steps, 1);
  const double seg_len = cfg.t_final / double(segments);
  const double dt_req = cfg.dt > 0.0 ? cfg.dt : seg_len / 100.0;
  const std::size_t per_seg = std::max<std::size_t>(1, std::size_t(std::ceil(seg_len / dt_req - 1e-9)));
  const double dt = seg_len / double(per_seg);
  const double dx = 1.0 / double(n);

  std::vector<double> lhs(ms), rhs_fac(ms);
  for (std::size_t q = 0; q < ms; ++q) {
    const double a = 0.5 * dt * cfg.nu * op.k2(q);
    lhs[q] = 1.0 / (1.0 + a);
    rhs_fac[q] = 1.0 - a;
  }

  VorticitySolution sol;
  std::vector<double> w(n * n);
  auto check_cfl = [&](double umax) {
    const double courant = dt * umax / dx;
    if (courant > cfg.cfl_limit) {
      std::ostringstream msg;
      msg << "navier-stokes: CFL violation (Courant " << courant << " > " << cfg.cfl_limit
          << "); use dt <= " << cfg.cfl_target * dx / umax;
      throw SolverError(msg.str());
    }
  };
  for (std::size_t seg = 0; seg < segments; ++seg) {
    for (std::size_t s = 0; s < per_seg; ++s) {
      double umax = 0.0;
      op.advection(wh, n1, umax);
      check_cfl(umax);
      for (std::size_t q = 0; q < ms; ++q)
        pred[q] = (rhs_fac[q] * wh[q] + dt * (fh[q] - n1[q])) * lhs[q];
      op.advection(pred, n2, umax);
      for (std::size_t q = 0; q < ms; ++q)
        wh[q] = (rhs_fac[q] * wh[q] + dt * (fh[q] - 0.5 * (n1[q] + n2[q]))) * lhs[q];
      ++sol.steps;
      sol.max_abs_mean = std::max(sol.max_abs_mean, std::abs(wh[0].real()) / double(n * n));
    }
    if (cfg.stored_steps > 0) {
      op.fft().inverse(wh, w);
      sol.snapshots.push_back(w);
    }
  }
  sol.final.resize(n * n);
  op.fft().inverse(wh, sol.final);
  for (double x : sol.final)
    if (!std::isfinite(x)) throw SolverError("navier-stokes: solution became non-finite");
  return sol;
}

}  // namespace opbench::forge

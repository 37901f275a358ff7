#include "opbench/forge/shallow_water.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "opbench/errors.hpp"

namespace opbench::forge {

namespace {

using Cons = std::array<double, 3>;  // (h, normal momentum, tangential momentum)

/// Rusanov flux in the direction of the second component.
Cons llf_flux(const Cons& L, const Cons& R, double g, double& speed) {
  const double uL = L[1] / L[0], uR = R[1] / R[0];
  const double cL = std::sqrt(g * L[0]), cR = std::sqrt(g * R[0]);
  const double s = std::max(std::abs(uL) + cL, std::abs(uR) + cR);
  speed = std::max(speed, s);
  const Cons FL{L[1], L[1] * uL + 0.5 * g * L[0] * L[0], L[2] * uL};
  const Cons FR{R[1], R[1] * uR + 0.5 * g * R[0] * R[0], R[2] * uR};
  return {0.5 * (FL[0] + FR[0]) - 0.5 * s * (R[0] - L[0]),
          0.5 * (FL[1] + FR[1]) - 0.5 * s * (R[1] - L[1]),
          0.5 * (FL[2] + FR[2]) - 0.5 * s * (R[2] - L[2])};
}

double max_wave_speed(const SweState& s, double g) {
  double m = 0.0;
  for (std::size_t p = 0; p < s.h.size(); ++p) {
    const double c = std::sqrt(g * s.h[p]);
    m = std::max({m, std::abs(s.hu[p] / s.h[p]) + c, std::abs(s.hv[p] / s.h[p]) + c});
  }
  return m;
}

double total_mass(const SweState& s, double cell_area) {
  double m = 0.0;
  for (double h : s.h) m += h;
  return m * cell_area;
}

class SweStepper {
 public:
  SweStepper(std::size_t n, std::span<const double> b, const SolverConfig& cfg)
      : n_(n), cfg_(cfg), dx_(1.0 / double(n)), bx_(n * n, 0.0), by_(n * n, 0.0) {
    const bool periodic = cfg.boundary == Boundary::Periodic;
    auto bat = [&](long i, long j) {
      if (periodic) {
        i = (i + long(n)) % long(n);
        j = (j + long(n)) % long(n);
      } else {
        i = std::clamp(i, 0L, long(n) - 1);
        j = std::clamp(j, 0L, long(n) - 1);
      }
      return b[std::size_t(i) * n + std::size_t(j)];
    };
    for (long i = 0; i < long(n); ++i)
      for (long j = 0; j < long(n); ++j) {
        bx_[i * n + j] = (bat(i + 1, j) - bat(i - 1, j)) / (2.0 * dx_);
        by_[i * n + j] = (bat(i, j + 1) - bat(i, j - 1)) / (2.0 * dx_);
      }
  }

  /// Cell state seen along `axis` (0 = x or 1 = y), possibly a ghost cell.
  Cons cell(const SweState& s, long i, long j, int axis) const {
    const long n = long(n_);
    bool mirror = false;
    if (cfg_.boundary == Boundary::Periodic) {
      i = (i + n) % n;
      j = (j + n) % n;
    } else {
      if (i < 0 || i >= n || j < 0 || j >= n) mirror = true;
      i = std::clamp(i, 0L, n - 1);
      j = std::clamp(j, 0L, n - 1);
    }
    const std::size_t p = std::size_t(i) * n_ + std::size_t(j);
    Cons c = axis == 0 ? Cons{s.h[p], s.hu[p], s.hv[p]} : Cons{s.h[p], s.hv[p], s.hu[p]};
    if (mirror) c[1] = -c[1];
    return c;
  }

  void step(SweState& s, double dt) {
    const long n = long(n_);
    const double g = cfg_.gravity;
    const double lam = dt / dx_;
    double sp = 0.0;
    // Face fluxes: fx[i][j] between (i-1, j) and (i, j), i = 0..n.
    std::vector<Cons> fx((n_ + 1) * n_), fy(n_ * (n_ + 1));
    for (long i = 0; i <= n; ++i)
      for (long j = 0; j < n; ++j)
        fx[i * n + j] = llf_flux(cell(s, i - 1, j, 0), cell(s, i, j, 0), g, sp);
    for (long i = 0; i < n; ++i)
      for (long j = 0; j <= n; ++j)
        fy[i * (n + 1) + j] = llf_flux(cell(s, i, j - 1, 1), cell(s, i, j, 1), g, sp);
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) {
        const std::size_t p = std::size_t(i * n + j);
        const Cons& xl = fx[i * n + j];
        const Cons& xr = fx[(i + 1) * n + j];
        const Cons& yl = fy[i * (n + 1) + j];
        const Cons& yr = fy[i * (n + 1) + j + 1];
        const double h = s.h[p];
        s.h[p] = h - lam * (xr[0] - xl[0]) - lam * (yr[0] - yl[0]);
        s.hu[p] = s.hu[p] - lam * (xr[1] - xl[1]) - lam * (yr[2] - yl[2]) - dt * g * h * bx_[p];
        s.hv[p] = s.hv[p] - lam * (xr[2] - xl[2]) - lam * (yr[1] - yl[1]) - dt * g * h * by_[p];
      }
  }

  double dx() const { return dx_; }

 private:
  std::size_t n_;
  SolverConfig cfg_;
  double dx_;
  std::vector<double> bx_, by_;
};

void check_wet(const SweState& s, std::size_t step) {
  for (std::size_t p = 0; p < s.h.size(); ++p)
    if (!(s.h[p] > 0.0)) {
      std::ostringstream msg;
      msg << "shallow-water: drying at cell " << p << " after step " << step << " (h = " << s.h[p]
          << ")";
      throw SolverError(msg.str());
    }
}

}  // namespace

SweState radial_dam_break(std::size_t n, double radius, double inner, double outer, double cx,
                          double cy) {
  SweState s;
  s.h.assign(n * n, outer);
  s.hu.assign(n * n, 0.0);
  s.hv.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = (double(i) + 0.5) / double(n) - cx;
      const double y = (double(j) + 0.5) / double(n) - cy;
      if (x * x + y * y < radius * radius) s.h[i * n + j] = inner;
    }
  return s;
}

SweSolution solve_shallow_water(const SweState& init, std::span<const double> bathymetry,
                                const SolverConfig& cfg) {
  const std::size_t n = cfg.resolution;
  const std::size_t cells = n * n;
  if (n < 2) throw ConfigError("shallow-water: resolution must be >= 2");
  if (init.h.size() != cells || init.hu.size() != cells || init.hv.size() != cells ||
      bathymetry.size() != cells)
    throw ShapeError("shallow-water: fields must have resolution^2 = " + std::to_string(cells) +
                     " values");
  if (!(cfg.gravity > 0.0)) throw ConfigError("shallow-water: gravity must be positive");
  check_wet(init, 0);

  SweStepper stepper(n, bathymetry, cfg);
  const double area = stepper.dx() * stepper.dx();
  SweSolution sol;
  SweState s = init;
  sol.mass.push_back(total_mass(s, area));

  const std::size_t segments = std::max<std::size_t>(cfg.stored_steps, 1);
  const double seg_len = cfg.t_final / double(segments);
  double t = 0.0;
  for (std::size_t seg = 1; seg <= segments; ++seg) {
    const double t_end = seg_len * double(seg);
    while (t < t_end - 1e-14 * cfg.t_final) {
      const double speed = max_wave_speed(s, cfg.gravity);
      double dt = cfg.dt > 0.0 ? cfg.dt : cfg.cfl_target * stepper.dx() / speed;
      const double courant = dt * speed / stepper.dx();
      if (courant > cfg.cfl_limit) {
        std::ostringstream msg;
        msg << "shallow-water: CFL violation (Courant " << courant << " > " << cfg.cfl_limit
            << "); use dt <= " << cfg.cfl_target * stepper.dx() / speed;
        throw SolverError(msg.str());
      }
      dt = std::min(dt, t_end - t);
      stepper.step(s, dt);
      t += dt;
      ++sol.steps;
      check_wet(s, sol.steps);
      sol.mass.push_back(total_mass(s, area));
    }
    t = t_end;
    if (cfg.stored_steps > 0) sol.snapshots.push_back(s);
  }
  sol.final = s;
  return sol;
}

}  // namespace opbench::forge

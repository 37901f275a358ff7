#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <Eigen/Dense>
#include <hdf5.h>

#include "opbench/errors.hpp"
#include "opbench/forge/burgers.hpp"
#include "opbench/forge/darcy.hpp"
#include "opbench/forge/elasticity.hpp"
#include "opbench/forge/generate.hpp"
#include "opbench/forge/grf.hpp"
#include "opbench/forge/ingest.hpp"
#include "opbench/forge/navier_stokes.hpp"
#include "opbench/forge/shallow_water.hpp"

using namespace opbench;
using namespace opbench::forge;
namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

namespace {

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("opbench_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

// ---------------------------------------------------------------- GRF

TEST_CASE("grf: determinism and real mean-zero output") {
  GRFSpec spec{2.0, 3.0, 1.0, 42, 2, 12};
  const GridSpec g = GridSpec::square(32, GridLayout::Periodic);
  const auto a = sample_grf(spec, g);
  const auto b = sample_grf(spec, g);
  CHECK(a == b);
  double mean = 0.0;
  for (double v : a) mean += v;
  CHECK(std::abs(mean / double(a.size())) < 1e-12);
  spec.seed = 43;
  CHECK(sample_grf(spec, g) != a);
}

TEST_CASE("grf: huge alpha suppresses all energy") {
  GRFSpec spec{1000.0, 3.0, 1.0, 1, 1, 16};
  const auto f = sample_grf(spec, GridSpec::line(64, GridLayout::Periodic));
  CHECK(max_abs(f) == 0.0);
}

TEST_CASE("grf: resolution-free synthesis") {
  for (std::size_t nd : {1u, 2u}) {
    GRFSpec spec{2.0, 3.0, 1.0, 9, nd, 20};
    const GridSpec coarse = nd == 1 ? GridSpec::line(64, GridLayout::Periodic) : GridSpec::square(64, GridLayout::Periodic);
    const GridSpec fine = nd == 1 ? GridSpec::line(128, GridLayout::Periodic) : GridSpec::square(128, GridLayout::Periodic);
    const auto c = sample_grf(spec, coarse);
    const auto f = sample_grf(spec, fine);
    CHECK(max_diff(subsample_values(fine, f, 1, 2), c) < 1e-10);
  }
  GRFSpec spec{2.0, 3.0, 1.0, 9, 2, 16};
  const auto n47 = sample_grf(spec, GridSpec::square(47));
  const auto n93 = sample_grf(spec, GridSpec::square(93));
  CHECK(max_diff(subsample_values(GridSpec::square(93), n93, 1, 2), n47) < 1e-10);
}

TEST_CASE("grf: synthesis matches a direct exponential sum") {
  GRFSpec spec{1.5, 2.0, 1.0, 3, 2, 4};
  const auto coeffs = draw_grf(spec);
  const GridSpec g = GridSpec::square(6, GridLayout::Periodic);
  const auto f = synthesize(coeffs, g);
  const long K = 4;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      std::complex<double> s = 0.0;
      for (long k0 = -K; k0 <= K; ++k0)
        for (long k1 = 0; k1 <= K; ++k1) {
          if (k1 == 0 && k0 <= 0) continue;
          const auto c = coeffs.c[std::size_t((k0 + K) * (K + 1) + k1)];
          s += 2.0 * c * std::exp(std::complex<double>(0, 2 * kPi * (k0 * double(i) + k1 * double(j)) / 6.0));
        }
      CHECK(std::abs(s.real() - f[i * 6 + j]) < 1e-12);
    }
}

TEST_CASE("grf: periodogram slope") {
  const double alpha = 2.0;
  GRFSpec spec{alpha, 0.5, 1.0, 0, 1, 32};
  const std::size_t n = 128;
  const GridSpec g = GridSpec::line(n, GridLayout::Periodic);
  std::vector<double> power(17, 0.0);
  for (std::uint64_t s = 0; s < 100; ++s) {
    spec.seed = 1000 + s;
    const auto f = sample_grf(spec, g);
    for (std::size_t k = 2; k <= 16; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        acc += f[j] * std::exp(std::complex<double>(0, -2 * kPi * double(k * j) / double(n)));
      power[k] += std::norm(acc);
    }
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 2; k <= 16; ++k) {
    const double x = std::log(double(k)), y = std::log(power[k]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
  }
  const double m = 15.0;
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  MESSAGE("fitted slope " << slope);
  CHECK(std::abs(slope + 2 * alpha) < 0.1 * 2 * alpha);
}

TEST_CASE("grf: spec validation") {
  CHECK_THROWS_AS((GRFSpec{0.0, 1.0, 1.0, 0, 1, 4}.validate()), ConfigError);
  CHECK_THROWS_AS((GRFSpec{1.0, 0.0, 1.0, 0, 1, 4}.validate()), ConfigError);
  CHECK_THROWS_AS((GRFSpec{1.0, 1.0, 1.0, 0, 3, 4}.validate()), ConfigError);
}

// ---------------------------------------------------------------- Burgers

TEST_CASE("burgers: zero initial condition stays zero") {
  auto cfg = burgers_defaults();
  const auto sol = solve_burgers_1d(std::vector<double>(128, 0.0), cfg);
  CHECK(max_abs(sol.final) == 0.0);
}

TEST_CASE("burgers: linear heat decay matches analytic solution") {
  auto cfg = burgers_defaults();
  cfg.nonlinear = false;
  cfg.dt = 1e-3;
  const std::size_t n = 128;
  std::vector<double> u0(n), exact(n);
  const double decay = std::exp(-cfg.nu * 4 * kPi * kPi * cfg.t_final);
  for (std::size_t j = 0; j < n; ++j) {
    u0[j] = std::sin(2 * kPi * double(j) / double(n));
    exact[j] = decay * u0[j];
  }
  const auto sol = solve_burgers_1d(u0, cfg);
  CHECK(max_diff(sol.final, exact) < 1e-8);
  CHECK(sol.snapshots.size() == 10);
}

TEST_CASE("burgers: temporal self-convergence, mean conservation and maximum principle") {
  const std::size_t n = 128;
  GRFSpec spec{2.0, 3.0, 2.5, 77, 1, 24};
  const auto u0 = sample_grf(spec, GridSpec::line(n, GridLayout::Periodic));
  auto cfg = burgers_defaults();
  cfg.t_final = 0.5;
  cfg.stored_steps = 0;
  std::vector<std::vector<double>> u;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    cfg.dt = dt;
    const auto s = solve_burgers_1d(u0, cfg);
    CHECK(s.max_mean_drift < 1e-10);
    CHECK(max_abs(s.final) <= max_abs(u0) + 1e-6);
    u.push_back(s.final);
  }
  const double e1 = norm2([&] { auto d = u[0]; for (std::size_t i = 0; i < n; ++i) d[i] -= u[1][i]; return d; }());
  const double e2 = norm2([&] { auto d = u[1]; for (std::size_t i = 0; i < n; ++i) d[i] -= u[2][i]; return d; }());
  const double order = std::log2(e1 / e2);
  MESSAGE("observed temporal order " << order);
  CHECK(order >= 2.0);
}

TEST_CASE("burgers: CFL violation reports a usable step") {
  auto cfg = burgers_defaults();
  cfg.dt = 0.5;
  std::vector<double> u0(128);
  for (std::size_t j = 0; j < 128; ++j) u0[j] = 5.0 * std::sin(2 * kPi * double(j) / 128.0);
  try {
    solve_burgers_1d(u0, cfg);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("use dt <=") != std::string::npos);
  }
  cfg.nu = 0.0;
  CHECK_THROWS_AS(solve_burgers_1d(u0, cfg), ConfigError);
}

TEST_CASE("burgers: spatial resolutions agree") {
  GRFSpec spec{2.0, 3.0, 2.5, 5, 1, 24};
  auto cfg = burgers_defaults();
  cfg.stored_steps = 0;
  const GridSpec coarse = GridSpec::line(256, GridLayout::Periodic);
  const GridSpec fine = GridSpec::line(512, GridLayout::Periodic);
  cfg.resolution = 256;
  const auto a = solve_burgers_1d(sample_grf(spec, coarse), cfg).final;
  cfg.resolution = 512;
  const auto b = solve_burgers_1d(sample_grf(spec, fine), cfg).final;
  const auto bs = subsample_values(fine, b, 1, 2);
  auto d = a;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= bs[i];
  const double rel = norm2(d) / norm2(bs);
  MESSAGE("burgers 256 vs 512 relative difference " << rel);
  CHECK(rel < 2e-2);
}

// ---------------------------------------------------------------- Darcy

TEST_CASE("darcy: unit coefficient matches a dense direct solve") {
  const std::size_t n = 17, m = n - 2;
  auto cfg = darcy_defaults();
  cfg.resolution = n;
  const std::vector<double> a(n * n, 1.0);
  const auto sol = solve_darcy_steady(a, cfg);
  CHECK(sol.residual < 1e-6);

  const double h = 1.0 / double(n - 1);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(long(m * m), long(m * m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const long r = long(i * m + j);
      A(r, r) = 4.0 / (h * h);
      if (i > 0) A(r, r - long(m)) = -1.0 / (h * h);
      if (i + 1 < m) A(r, r + long(m)) = -1.0 / (h * h);
      if (j > 0) A(r, r - 1) = -1.0 / (h * h);
      if (j + 1 < m) A(r, r + 1) = -1.0 / (h * h);
    }
  const Eigen::VectorXd x = A.partialPivLu().solve(Eigen::VectorXd::Constant(long(m * m), cfg.beta));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double d = sol.u[(i + 1) * n + j + 1] - x(long(i * m + j));
      num += d * d;
      den += x(long(i * m + j)) * x(long(i * m + j));
    }
  CHECK(std::sqrt(num / den) < 1e-6);
  for (std::size_t k = 0; k < n; ++k) {
    CHECK(sol.u[k] == 0.0);
    CHECK(sol.u[k * n] == 0.0);
  }
}

TEST_CASE("darcy: zero forcing gives zero pressure") {
  auto cfg = darcy_defaults();
  cfg.resolution = 17;
  cfg.beta = 0.0;
  std::vector<double> a(17 * 17, 3.0);
  const auto sol = solve_darcy_steady(a, cfg);
  CHECK(max_abs(sol.u) == 0.0);
}

TEST_CASE("darcy: flux balance across a coefficient jump") {
  const std::size_t n = 33;
  auto cfg = darcy_defaults();
  cfg.resolution = n;
  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = i < n / 2 ? 3.0 : 12.0;
  const auto sol = solve_darcy_steady(a, cfg);
  const double h = 1.0 / double(n - 1);
  auto hm = [](double x, double y) { return 2.0 * x * y / (x + y); };
  auto U = [&](std::size_t i, std::size_t j) { return sol.u[i * n + j]; };
  auto A = [&](std::size_t i, std::size_t j) { return a[i * n + j]; };
  double worst = 0.0, scale = 0.0;
  for (std::size_t i : {n / 2 - 1, n / 2, n / 2 + 1})
    for (std::size_t j = 1; j + 1 < n; ++j) {
      const double fe = hm(A(i, j), A(i + 1, j)) * (U(i + 1, j) - U(i, j)) / h;
      const double fw = hm(A(i, j), A(i - 1, j)) * (U(i, j) - U(i - 1, j)) / h;
      const double fn = hm(A(i, j), A(i, j + 1)) * (U(i, j + 1) - U(i, j)) / h;
      const double fs = hm(A(i, j), A(i, j - 1)) * (U(i, j) - U(i, j - 1)) / h;
      worst = std::max(worst, std::abs((fe - fw + fn - fs) + cfg.beta * h));
      scale = std::max(scale, std::abs(fe));
    }
  MESSAGE("flux imbalance " << worst << " against flux scale " << scale);
  CHECK(worst < 1e-5 * std::max(scale, 1.0));
}

TEST_CASE("darcy: domain errors and residual bound on GRF coefficients") {
  auto cfg = darcy_defaults();
  std::vector<double> a(47 * 47, 1.0);
  a[100] = 0.0;
  CHECK_THROWS_AS(solve_darcy_steady(a, cfg), DomainError);
  a.assign(10, 1.0);
  CHECK_THROWS_AS(solve_darcy_steady(a, cfg), ShapeError);

  auto g = sample_grf(GRFSpec{2.0, 3.0, 1.0, 4, 2, 24}, GridSpec::square(47));
  for (auto& v : g) v = v < 0 ? 3.0 : 12.0;
  const auto sol = solve_darcy_steady(g, cfg);
  CHECK(sol.residual < 1e-6);
  CHECK(max_abs(darcy_residual(g, sol.u, cfg.beta, 47)) < 1e-6);
}

TEST_CASE("darcy: non-convergence is reported") {
  auto cfg = darcy_defaults();
  cfg.resolution = 17;
  cfg.max_iterations = 1;
  cfg.dt = 1e-8;
  std::vector<double> a(17 * 17, 1.0);
  try {
    solve_darcy_steady(a, cfg);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("residual") != std::string::npos);
  }
}

TEST_CASE("darcy: resolutions r and 2r-1 agree on the shared nodes") {
  const GRFSpec spec{2.0, 3.0, 1.0, 21, 2, 24};
  auto cfg = darcy_defaults();
  auto solve = [&](std::size_t n) {
    auto g = sample_grf(spec, GridSpec::square(n));
    for (auto& v : g) v = v < 0 ? 3.0 : 12.0;
    cfg.resolution = n;
    return solve_darcy_steady(g, cfg).u;
  };
  const auto coarse = solve(47);
  const auto fine = subsample_values(GridSpec::square(93), solve(93), 1, 2);
  auto d = coarse;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= fine[i];
  const double rel = norm2(d) / norm2(fine);
  MESSAGE("darcy 47 vs 93 relative difference " << rel);
  CHECK(rel < 2e-2);
}

// ---------------------------------------------------------------- Navier-Stokes

TEST_CASE("navier-stokes: zero state stays zero") {
  auto cfg = navier_stokes_defaults();
  cfg.resolution = 32;
  cfg.t_final = 0.1;
  const std::vector<double> z(32 * 32, 0.0);
  const auto sol = solve_ns_vorticity(z, z, cfg);
  CHECK(max_abs(sol.final) == 0.0);
  CHECK(sol.snapshots.size() == 5);
}

TEST_CASE("navier-stokes: Taylor-Green decay") {
  const std::size_t n = 64;
  auto cfg = navier_stokes_defaults();
  cfg.resolution = n;
  cfg.nu = 1e-2;
  std::vector<double> w0(n * n), exact(n * n);
  const double decay = std::exp(-8 * kPi * kPi * cfg.nu * cfg.t_final);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      w0[i * n + j] = std::sin(2 * kPi * double(i) / double(n)) * std::sin(2 * kPi * double(j) / double(n));
      exact[i * n + j] = decay * w0[i * n + j];
    }
  const auto sol = solve_ns_vorticity(w0, std::vector<double>(n * n, 0.0), cfg);
  MESSAGE("Taylor-Green max error " << max_diff(sol.final, exact));
  CHECK(max_diff(sol.final, exact) < 1e-6);
}

TEST_CASE("navier-stokes: mean vorticity stays zero under forcing") {
  const std::size_t n = 32;
  auto cfg = navier_stokes_defaults();
  cfg.resolution = n;
  cfg.t_final = 0.2;
  auto w0 = sample_grf(GRFSpec{2.5, 3.0, 20.0, 8, 2, 10}, GridSpec::square(n, GridLayout::Periodic));
  std::vector<double> f(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) f[i * n + j] = 0.3 + std::cos(2 * kPi * double(i + j) / double(n));
  const auto sol = solve_ns_vorticity(w0, f, cfg);
  CHECK(sol.max_abs_mean < 1e-10);
  auto shifted = w0;
  for (auto& v : shifted) v += 1.0;
  CHECK_THROWS_AS(solve_ns_vorticity(shifted, f, cfg), DomainError);
}

TEST_CASE("navier-stokes: CFL violation") {
  const std::size_t n = 32;
  auto cfg = navier_stokes_defaults();
  cfg.resolution = n;
  cfg.dt = 0.5;
  cfg.t_final = 1.0;
  cfg.stored_steps = 1;
  auto w0 = sample_grf(GRFSpec{2.0, 1.0, 400.0, 8, 2, 10}, GridSpec::square(n, GridLayout::Periodic));
  CHECK_THROWS_AS(solve_ns_vorticity(w0, std::vector<double>(n * n, 0.0), cfg), SolverError);
}

TEST_CASE("navier-stokes: velocity is divergence free") {
  const std::size_t n = 32;
  auto w = sample_grf(GRFSpec{2.0, 3.0, 1.0, 2, 2, 8}, GridSpec::square(n, GridLayout::Periodic));
  const auto uv = velocity_from_vorticity(w, n);
  // Spectral divergence via a direct DFT of both components.
  double worst = 0.0;
  for (int k0 = -4; k0 <= 4; ++k0)
    for (int k1 = -4; k1 <= 4; ++k1) {
      std::complex<double> div = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const auto e = std::exp(std::complex<double>(0, -2 * kPi * (k0 * double(i) + k1 * double(j)) / double(n)));
          div += std::complex<double>(0, 2 * kPi * k0) * uv[2 * (i * n + j)] * e +
                 std::complex<double>(0, 2 * kPi * k1) * uv[2 * (i * n + j) + 1] * e;
        }
      worst = std::max(worst, std::abs(div));
    }
  CHECK(worst < 1e-9);
}

// ---------------------------------------------------------------- shallow water

TEST_CASE("shallow water: lake at rest") {
  const std::size_t n = 32;
  for (auto bc : {Boundary::Periodic, Boundary::Reflective}) {
    auto cfg = shallow_water_defaults();
    cfg.resolution = n;
    cfg.boundary = bc;
    SweState s{std::vector<double>(n * n, 1.5), std::vector<double>(n * n, 0.0), std::vector<double>(n * n, 0.0)};
    const auto sol = solve_shallow_water(s, std::vector<double>(n * n, 0.25), cfg);
    CHECK(max_diff(sol.final.h, s.h) < 1e-12);
    CHECK(max_abs(sol.final.hu) < 1e-12);
    CHECK(max_abs(sol.final.hv) < 1e-12);
  }
}

TEST_CASE("shallow water: periodic mass conservation per step") {
  const std::size_t n = 48;
  auto cfg = shallow_water_defaults();
  cfg.resolution = n;
  cfg.boundary = Boundary::Periodic;
  auto init = radial_dam_break(n, 0.2, 2.0, 1.0, 0.4, 0.55);
  const auto sol = solve_shallow_water(init, std::vector<double>(n * n, 0.0), cfg);
  REQUIRE(sol.mass.size() == sol.steps + 1);
  double worst = 0.0;
  for (std::size_t k = 1; k < sol.mass.size(); ++k) worst = std::max(worst, std::abs(sol.mass[k] - sol.mass[k - 1]));
  CHECK(worst < 1e-10);
  CHECK(std::abs(sol.mass.back() - sol.mass.front()) < 1e-10 * double(sol.steps));
}

TEST_CASE("shallow water: radial dam break symmetry") {
  const std::size_t n = 64;
  auto cfg = shallow_water_defaults();
  cfg.resolution = n;
  const auto sol = solve_shallow_water(radial_dam_break(n, 0.25), std::vector<double>(n * n, 0.0), cfg);
  const auto& h = sol.final.h;
  double asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double v = h[i * n + j];
      asym = std::max({asym, std::abs(v - h[(n - 1 - i) * n + j]), std::abs(v - h[i * n + (n - 1 - j)]),
                       std::abs(v - h[j * n + i])});
    }
  CHECK(asym < 1e-8);
  CHECK(max_abs(sol.final.h) > 1.0);
}

TEST_CASE("shallow water: drying and bad depth are rejected") {
  const std::size_t n = 16;
  auto cfg = shallow_water_defaults();
  cfg.resolution = n;
  SweState s{std::vector<double>(n * n, 1.0), std::vector<double>(n * n, 0.0), std::vector<double>(n * n, 0.0)};
  s.h[5] = 0.0;
  CHECK_THROWS_AS(solve_shallow_water(s, std::vector<double>(n * n, 0.0), cfg), Error);
  s.h.assign(n * n, 0.01);
  for (std::size_t p = 0; p < n * n; ++p) {
    s.hu[p] = (p / n < n / 2 ? -1.0 : 1.0) * 0.1;
    s.hv[p] = (p % n < n / 2 ? -1.0 : 1.0) * 0.1;
  }
  cfg.dt = 0.9 / double(n) / (10.0 + std::sqrt(0.01));
  CHECK_THROWS_AS(solve_shallow_water(s, std::vector<double>(n * n, 0.0), cfg), SolverError);
}

// ---------------------------------------------------------------- elasticity

TEST_CASE("elasticity: microstructure has equal phase fractions") {
  for (std::size_t n : {8u, 15u, 32u}) {
    const auto m = sample_microstructure(GRFSpec{2.0, 3.0, 1.0, n, 2, 12}, n);
    CHECK(std::abs(m.stiff_fraction() - 0.5) <= 1.0 / double(n * n) + 1e-15);
  }
}

TEST_CASE("elasticity: homogeneous uniaxial tension") {
  Microstructure m{16, std::vector<std::uint8_t>(256, 0)};
  auto cfg = elasticity_defaults();
  cfg.modulus_ratio = 1.0;
  const auto sol = solve_plane_stress_composite(m, cfg);
  const double target = cfg.modulus_soft * cfg.applied_strain;
  for (std::size_t p = 0; p < 256; ++p) {
    CHECK(std::abs(sol.syy[p] - target) < 1e-8);
    CHECK(std::abs(sol.sxy[p]) < 1e-8);
    CHECK(std::abs(sol.sxx[p]) < 1e-8);
    CHECK(std::abs(sol.eyy[p] - cfg.applied_strain) < 1e-8);
    CHECK(std::abs(sol.exx[p] + cfg.poisson * cfg.applied_strain) < 1e-8);
  }
}

TEST_CASE("elasticity: reaction balance on a composite") {
  const auto m = sample_microstructure(GRFSpec{2.0, 3.0, 1.0, 12, 2, 12}, 24);
  const auto sol = solve_plane_stress_composite(m, elasticity_defaults());
  CHECK(sol.reaction_top > 0.0);
  CHECK(std::abs(sol.reaction_top + sol.reaction_bottom) < 1e-8 * std::abs(sol.reaction_top));
}

TEST_CASE("elasticity: zero load and missing constraints") {
  const auto m = sample_microstructure(GRFSpec{2.0, 3.0, 1.0, 3, 2, 8}, 8);
  auto cfg = elasticity_defaults();
  cfg.applied_strain = 0.0;
  const auto sol = solve_plane_stress_composite(m, cfg);
  CHECK(max_abs(sol.ux) == 0.0);
  CHECK(max_abs(sol.syy) == 0.0);
  CHECK(max_abs(sol.exy) == 0.0);
  cfg.pin_lateral = false;
  CHECK_THROWS_AS(solve_plane_stress_composite(m, cfg), ConfigError);
}

namespace {

// Bilinear plane-stress element stiffness by explicit 2x2 Gauss quadrature.
Eigen::Matrix<double, 8, 8> reference_element(double E, double nu, double h) {
  Eigen::Matrix3d D;
  D << 1, nu, 0, nu, 1, 0, 0, 0, (1 - nu) / 2;
  D *= E / (1 - nu * nu);
  const double xi_n[4] = {-1, 1, 1, -1}, eta_n[4] = {-1, -1, 1, 1};
  const double gp = 1.0 / std::sqrt(3.0);
  Eigen::Matrix<double, 8, 8> K = Eigen::Matrix<double, 8, 8>::Zero();
  for (double xi : {-gp, gp})
    for (double eta : {-gp, gp}) {
      Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
      for (int a = 0; a < 4; ++a) {
        const double dx = 0.25 * xi_n[a] * (1 + eta * eta_n[a]) * 2.0 / h;
        const double dy = 0.25 * eta_n[a] * (1 + xi * xi_n[a]) * 2.0 / h;
        B(0, 2 * a) = dx;
        B(1, 2 * a + 1) = dy;
        B(2, 2 * a) = dy;
        B(2, 2 * a + 1) = dx;
      }
      K += B.transpose() * D * B * (h * h / 4.0);
    }
  return K;
}

}  // namespace

TEST_CASE("elasticity: 8x8 composite matches a dense direct solve") {
  const std::size_t n = 8, nn = n + 1, ndof = 2 * nn * nn;
  const auto m = sample_microstructure(GRFSpec{2.0, 3.0, 1.0, 17, 2, 8}, n);
  auto cfg = elasticity_defaults();
  const auto sol = solve_plane_stress_composite(m, cfg);

  const double h = 1.0 / double(n);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(long(ndof), long(ndof));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double E = cfg.modulus_soft * (m.phase[i * n + j] ? cfg.modulus_ratio : 1.0);
      const auto Ke = reference_element(E, cfg.poisson, h);
      const std::size_t nodes[4] = {i * nn + j, (i + 1) * nn + j, (i + 1) * nn + j + 1, i * nn + j + 1};
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          for (int p = 0; p < 2; ++p)
            for (int q = 0; q < 2; ++q)
              K(long(2 * nodes[a] + p), long(2 * nodes[b] + q)) += Ke(2 * a + p, 2 * b + q);
    }
  std::vector<int> fixed(ndof, 0);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(long(ndof));
  fixed[0] = 1;
  for (std::size_t i = 0; i < nn; ++i) {
    fixed[2 * (i * nn) + 1] = 1;
    fixed[2 * (i * nn + n) + 1] = 1;
    u(long(2 * (i * nn + n) + 1)) = cfg.applied_strain;
  }
  std::vector<long> freeidx;
  for (std::size_t d = 0; d < ndof; ++d)
    if (!fixed[d]) freeidx.push_back(long(d));
  const long nf = long(freeidx.size());
  Eigen::MatrixXd Kff(nf, nf);
  Eigen::VectorXd rhs(nf);
  for (long a = 0; a < nf; ++a) {
    rhs(a) = -(K.row(freeidx[std::size_t(a)]) * u)(0);
    for (long b = 0; b < nf; ++b) Kff(a, b) = K(freeidx[std::size_t(a)], freeidx[std::size_t(b)]);
  }
  const Eigen::VectorXd uf = Kff.ldlt().solve(rhs);
  for (long a = 0; a < nf; ++a) u(freeidx[std::size_t(a)]) = uf(a);
  double worst = 0.0;
  for (std::size_t p = 0; p < nn * nn; ++p) {
    worst = std::max(worst, std::abs(sol.ux[p] - u(long(2 * p))));
    worst = std::max(worst, std::abs(sol.uy[p] - u(long(2 * p + 1))));
  }
  CHECK(worst < 1e-9);
}

// ---------------------------------------------------------------- generation

TEST_CASE("generate: darcy determinism") {
  const auto a = generate_dataset("darcy", 40, 47, 7);
  const auto b = generate_dataset("darcy", 40, 47, 7);
  REQUIRE(a.samples.size() == 40);
  CHECK(a.grid.shape == std::vector<std::size_t>{47, 47});
  for (std::size_t k = 0; k < 40; ++k) {
    CHECK(a.samples[k].input == b.samples[k].input);
    CHECK(a.samples[k].output == b.samples[k].output);
  }
  CHECK(a.pde_meta == b.pde_meta);
  for (double v : a.samples[0].input) CHECK((v == 3.0 || v == 12.0));
}

TEST_CASE("generate: threads do not change results") {
  auto cfg = default_generate_config("darcy");
  cfg.solver.resolution = 17;
  const auto a = generate_dataset("darcy", 6, cfg, 3);
  cfg.jobs = 3;
  const auto b = generate_dataset("darcy", 6, cfg, 3);
  for (std::size_t k = 0; k < 6; ++k) CHECK(a.samples[k].output == b.samples[k].output);
}

TEST_CASE("generate: stress and strain share microstructures") {
  const auto s = generate_dataset("stress", 4, 16, 11);
  const auto e = generate_dataset("strain", 4, 16, 11);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(s.samples[k].input == e.samples[k].input);
    CHECK(s.samples[k].output != e.samples[k].output);
  }
  CHECK(s.out_channels() == 3);
}

TEST_CASE("generate: burgers maximum principle") {
  const auto b = generate_dataset("burgers", 40, 128, 5);
  for (const auto& s : b.samples) {
    CHECK(max_abs(s.output) <= max_abs(s.input) + 1e-6);
    CHECK(s.time.has_value());
    CHECK(s.trajectory.size() == 10 * 128);
  }
}

TEST_CASE("generate: time-dependent datasets run at desk scale") {
  const auto ns = generate_dataset("navier-stokes", 2, 32, 1);
  CHECK(ns.in_channels() == 2);
  CHECK(ns.samples[0].trajectory.size() == 5 * 32 * 32);
  CHECK(max_abs(ns.samples[0].output) > 0.0);
  const auto sw = generate_dataset("shallow-water", 2, 32, 1);
  CHECK(sw.samples[0].input != sw.samples[1].input);
}

TEST_CASE("generate: unsupported names") {
  CHECK_THROWS_AS(generate_dataset("shear", 4, 32, 1), ConfigError);
  CHECK_THROWS_AS(generate_dataset("biaxial", 4, 32, 1), ConfigError);
  CHECK_THROWS_AS(default_generate_config("kdv"), ConfigError);
}

// ---------------------------------------------------------------- ingestion

namespace {

void write_h5(hid_t loc, const std::string& name, const std::vector<hsize_t>& dims, const std::vector<double>& data) {
  const hid_t space = H5Screate_simple(int(dims.size()), dims.data(), nullptr);
  const hid_t ds = H5Dcreate2(loc, name.c_str(), H5T_IEEE_F32LE, space, H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT);
  H5Dwrite(ds, H5T_NATIVE_DOUBLE, H5S_ALL, H5S_ALL, H5P_DEFAULT, data.data());
  H5Dclose(ds);
  H5Sclose(space);
}

fs::path darcy_fixture(const fs::path& dir, std::size_t N, std::size_t X, bool poison) {
  const fs::path p = dir / "darcy.h5";
  const hid_t f = H5Fcreate(p.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
  std::vector<double> nu(N * X * X), t(N * X * X), x(X);
  for (std::size_t i = 0; i < nu.size(); ++i) {
    nu[i] = double(i % 7) + 1.0;
    t[i] = 0.5 * double(i % 5);
  }
  if (poison) t[3 * X * X + 17] = NAN;
  for (std::size_t i = 0; i < X; ++i) x[i] = (double(i) + 0.5) / double(X);
  write_h5(f, "nu", {N, X, X}, nu);
  write_h5(f, "tensor", {N, 1, X, X}, t);
  write_h5(f, "x-coordinate", {X}, x);
  H5Fclose(f);
  return p;
}

}  // namespace

TEST_CASE("ingest: pdebench steady layout") {
  const auto dir = scratch_dir("ingest_darcy");
  const auto b = ingest_external(darcy_fixture(dir, 8, 47, false), Adapter::PdeBench, "darcy");
  CHECK(b.samples.size() == 8);
  CHECK(b.grid.shape == std::vector<std::size_t>{47, 47});
  CHECK(b.grid.layout == GridLayout::CellCentered);
  CHECK(b.input_channels == std::vector<std::string>{"nu"});
  CHECK(b.samples[2].input[5] == double((2 * 47 * 47 + 5) % 7) + 1.0);
}

TEST_CASE("ingest: pdebench NaN names the sample") {
  const auto dir = scratch_dir("ingest_nan");
  try {
    ingest_external(darcy_fixture(dir, 8, 16, true), Adapter::PdeBench);
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find("sample 3") != std::string::npos);
  }
}

TEST_CASE("ingest: pdebench 1D and grouped 2D time series") {
  const auto dir = scratch_dir("ingest_ts");
  {
    const fs::path p = dir / "burgers.h5";
    const hid_t f = H5Fcreate(p.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
    std::vector<double> t(8 * 3 * 16);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = double(i);
    write_h5(f, "tensor", {8, 3, 16}, t);
    std::vector<double> x(16);
    for (std::size_t i = 0; i < 16; ++i) x[i] = double(i) / 16.0;
    write_h5(f, "x-coordinate", {16}, x);
    H5Fclose(f);
    const auto b = ingest_external(p, Adapter::PdeBench);
    CHECK(b.samples.size() == 8);
    CHECK(b.grid.layout == GridLayout::Periodic);
    CHECK(b.samples[1].input[0] == 48.0);
    CHECK(b.samples[1].output[0] == 48.0 + 32.0);
  }
  {
    const fs::path p = dir / "swe.h5";
    const hid_t f = H5Fcreate(p.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
    for (int k = 0; k < 3; ++k) {
      char name[8];
      std::snprintf(name, sizeof name, "%04d", k);
      const hid_t g = H5Gcreate2(f, name, H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT);
      write_h5(g, "data", {4, 8, 8, 1}, std::vector<double>(4 * 64, 1.0 + k));
      H5Gclose(g);
    }
    H5Fclose(f);
    const auto b = ingest_external(p, Adapter::PdeBench);
    CHECK(b.samples.size() == 3);
    CHECK(b.samples[2].output[0] == 3.0);
  }
  const fs::path bad = dir / "empty.h5";
  H5Fclose(H5Fcreate(bad.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT));
  CHECK_THROWS_AS(ingest_external(bad, Adapter::PdeBench), IngestionError);
  CHECK_THROWS_AS(ingest_external(dir / "missing.h5", Adapter::PdeBench), IngestionError);
}

TEST_CASE("ingest: mechanical-mnist text layout") {
  const auto dir = scratch_dir("ingest_mm");
  auto write = [&](const std::string& name, double offset, int bad_row) {
    std::ofstream out(dir / name);
    for (int k = 0; k < 8; ++k) {
      for (int p = 0; p < 16; ++p) {
        if (p) out << (k % 2 ? "," : " ");
        if (k == bad_row && p == 4) out << "nan";
        else out << offset + k + 0.01 * p;
      }
      out << "\n";
    }
  };
  write("input.txt", 0.0, -1);
  write("ux.txt", 100.0, -1);
  write("uy.txt", 200.0, -1);
  const auto b = ingest_external(dir, Adapter::MechanicalMnist, "shear");
  CHECK(b.samples.size() == 8);
  CHECK(b.out_channels() == 2);
  CHECK(b.grid.shape == std::vector<std::size_t>{4, 4});
  CHECK(b.samples[3].output[2] == doctest::Approx(100.0 + 3 + 0.01));
  CHECK(b.samples[3].output[3] == doctest::Approx(200.0 + 3 + 0.01));

  write("uy.txt", 200.0, 5);
  try {
    ingest_external(dir, Adapter::MechanicalMnist);
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find("sample 5") != std::string::npos);
  }
  CHECK_THROWS_AS(adapter_from_string("netcdf"), ConfigError);
}

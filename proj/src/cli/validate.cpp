#include "opbench/cli/validate.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>

#include <Eigen/Dense>

#include "opbench/errors.hpp"
#include "opbench/forge/burgers.hpp"
#include "opbench/forge/darcy.hpp"
#include "opbench/forge/elasticity.hpp"
#include "opbench/forge/grf.hpp"
#include "opbench/forge/navier_stokes.hpp"
#include "opbench/forge/shallow_water.hpp"
#include "opbench/grid/grid.hpp"
#include "opbench/util/random.hpp"
#include "opbench/zoo/families.hpp"

namespace opbench::cli {

using namespace opbench::forge;
using ag::Tensor;

namespace {

constexpr double kPi = std::numbers::pi;

struct Collector {
  std::vector<OracleCheck> out;
  OracleGroup group = OracleGroup::Metric;

  void check(const std::string& name, double value, double tol, std::string detail = "") {
    out.push_back({group, name, value, tol, std::isfinite(value) && value <= tol, std::move(detail)});
  }
  template <class E, class F>
  void expect_throw(const std::string& name, F&& f) {
    bool raised = false;
    std::string detail = "no error raised";
    try {
      f();
    } catch (const E& e) {
      raised = true;
      detail = e.what();
    } catch (const std::exception& e) {
      detail = std::string("wrong error: ") + e.what();
    }
    out.push_back({group, name, raised ? 0.0 : 1.0, 0.0, raised, detail});
  }
  /// Runs one oracle body; an unexpected exception fails it.
  void guarded(const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      out.push_back({group, name, std::nan(""), 0.0, false, std::string("raised: ") + e.what()});
    }
  }
};

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Tensor random_tensor(ag::Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(ag::numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return ag::constant(std::move(shape), std::move(v));
}

// ---------------------------------------------------------------- metric

void metric_oracles(Collector& c) {
  struct Fixture {
    std::vector<double> pred, truth;
    double expected;
  };
  const std::vector<Fixture> fixtures{
      {{3, 4}, {3, 4}, 0.0},
      {{0, 0}, {3, 4}, 1.0},
      {{1, 1}, {1, 2}, 1.0 / std::sqrt(5.0)},
      {{6, 8}, {3, 4}, 1.0},
      {{3, 5}, {3, 4}, 0.2},
      {{2, 2, 2, 2}, {1, 1, 1, 1}, 1.0},
      {{1, 0, -1}, {1, 1, 1}, std::sqrt(5.0 / 3.0)},
  };
  double worst = 0.0;
  for (const auto& f : fixtures) worst = std::max(worst, std::abs(relative_l2(f.pred, f.truth) - f.expected));
  c.check("relative_l2 on " + std::to_string(fixtures.size()) + " hand fixtures", worst, 1e-12);
  c.expect_throw<DegenerateReferenceError>("relative_l2 rejects a zero reference", [] {
    relative_l2(std::vector<double>{1, 2}, std::vector<double>{0, 0});
  });
}

// ---------------------------------------------------------------- solvers

void solver_oracles(Collector& c) {
  c.guarded("burgers linearized decay", [&] {
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
    c.check("burgers linearized decay vs analytic", max_diff(solve_burgers_1d(u0, cfg).final, exact), 1e-8);
  });

  c.guarded("darcy dense solve", [&] {
    const std::size_t n = 17, m = n - 2;
    auto cfg = darcy_defaults();
    cfg.resolution = n;
    const auto sol = solve_darcy_steady(std::vector<double>(n * n, 1.0), cfg);
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
    c.check("darcy 17x17 vs dense direct solve (relative)", std::sqrt(num / den), 1e-6);
  });

  c.guarded("navier-stokes taylor-green", [&] {
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
    c.check("navier-stokes Taylor-Green decay", max_diff(sol.final, exact), 1e-6);
  });

  c.guarded("shallow water rest state", [&] {
    const std::size_t n = 32;
    double worst = 0.0;
    for (auto bc : {Boundary::Periodic, Boundary::Reflective}) {
      auto cfg = shallow_water_defaults();
      cfg.resolution = n;
      cfg.boundary = bc;
      SweState s{std::vector<double>(n * n, 1.5), std::vector<double>(n * n, 0.0), std::vector<double>(n * n, 0.0)};
      const auto sol = solve_shallow_water(s, std::vector<double>(n * n, 0.25), cfg);
      worst = std::max({worst, max_diff(sol.final.h, s.h), max_abs(sol.final.hu), max_abs(sol.final.hv)});
    }
    c.check("shallow water rest-state preservation", worst, 1e-12);
  });

  c.guarded("shallow water mass", [&] {
    const std::size_t n = 48;
    auto cfg = shallow_water_defaults();
    cfg.resolution = n;
    cfg.boundary = Boundary::Periodic;
    const auto sol = solve_shallow_water(radial_dam_break(n, 0.2, 2.0, 1.0, 0.4, 0.55),
                                         std::vector<double>(n * n, 0.0), cfg);
    double worst = 0.0;
    for (std::size_t k = 1; k < sol.mass.size(); ++k) worst = std::max(worst, std::abs(sol.mass[k] - sol.mass[k - 1]));
    c.check("shallow water mass conservation per step", worst, 1e-10,
            std::to_string(sol.steps) + " steps");
  });

  c.guarded("elasticity uniaxial", [&] {
    Microstructure m{16, std::vector<std::uint8_t>(256, 0)};
    auto cfg = elasticity_defaults();
    cfg.modulus_ratio = 1.0;
    const auto sol = solve_plane_stress_composite(m, cfg);
    const double target = cfg.modulus_soft * cfg.applied_strain;
    double worst = 0.0;
    for (std::size_t p = 0; p < 256; ++p)
      worst = std::max({worst, std::abs(sol.syy[p] - target), std::abs(sol.sxy[p]), std::abs(sol.sxx[p]),
                        std::abs(sol.eyy[p] - cfg.applied_strain),
                        std::abs(sol.exx[p] + cfg.poisson * cfg.applied_strain)});
    c.check("elasticity homogeneous uniaxial tension", worst, 1e-8);
  });

  c.guarded("elasticity reactions", [&] {
    const auto m = sample_microstructure(GRFSpec{2.0, 3.0, 1.0, 12, 2, 12}, 24);
    const auto sol = solve_plane_stress_composite(m, elasticity_defaults());
    c.check("elasticity reaction balance (relative)",
            std::abs(sol.reaction_top + sol.reaction_bottom) / std::abs(sol.reaction_top), 1e-8);
  });
}

// ---------------------------------------------------------------- layers

double naive_spectral_conv_error(std::size_t ndim) {
  using cd = std::complex<double>;
  const std::size_t n = 8, k = 3, ci = 2, co = 3;
  const auto g = ndim == 1 ? GridSpec::line(n, GridLayout::Periodic) : GridSpec::square(n, GridLayout::Periodic);
  const Tensor x = random_tensor(zoo::batch_shape(g, 1, ci), 3 + ndim);
  const std::size_t M = zoo::spectral_modes(ndim, k);
  const Tensor wr = random_tensor({M, ci, co}, 10 + ndim), wi = random_tensor({M, ci, co}, 20 + ndim);
  const auto y = zoo::spectral_conv(x, g, k, wr, wi).value();
  const std::size_t n0 = ndim == 1 ? 1 : n, rows0 = ndim == 1 ? 1 : 2 * k + 1;
  double worst = 0.0;
  for (std::size_t j0 = 0; j0 < n0; ++j0)
    for (std::size_t j1 = 0; j1 < n; ++j1)
      for (std::size_t o = 0; o < co; ++o) {
        double acc = 0.0;
        for (std::size_t i0 = 0; i0 < rows0; ++i0) {
          const long k0 = i0 <= k ? long(i0) : long(i0) - long(2 * k + 1);
          for (std::size_t k1 = 0; k1 <= k; ++k1) {
            const std::size_t q = i0 * (k + 1) + k1;
            cd Y = 0.0;
            for (std::size_t c = 0; c < ci; ++c) {
              cd X = 0.0;
              for (std::size_t s0 = 0; s0 < n0; ++s0)
                for (std::size_t s1 = 0; s1 < n; ++s1)
                  X += x.value()[(s0 * n + s1) * ci + c] *
                       std::exp(cd(0, -2 * kPi * (double(k0) * double(s0) + double(k1) * double(s1)) / double(n)));
              Y += X * cd(wr.value()[(q * ci + c) * co + o], wi.value()[(q * ci + c) * co + o]);
            }
            const double weight = (k1 == 0 || 2 * k1 == n) ? 1.0 : 2.0;
            acc += weight *
                   (Y * std::exp(cd(0, 2 * kPi * (double(k0) * double(j0) + double(k1) * double(j1)) / double(n))))
                       .real() /
                   double(n0 * n);
          }
        }
        worst = std::max(worst, std::abs(acc - y[(j0 * n + j1) * co + o]));
      }
  return worst;
}

void layer_oracles(Collector& c) {
  c.guarded("spectral_conv", [&] {
    c.check("spectral_conv 1D vs O(n^2) direct transform", naive_spectral_conv_error(1), 1e-10);
    c.check("spectral_conv 2D vs O(n^2) direct transform", naive_spectral_conv_error(2), 1e-10);
  });

  c.guarded("haar", [&] {
    double worst = 0.0;
    const Tensor x1 = random_tensor({2, 16, 3}, 31);
    worst = std::max(worst, max_diff(zoo::haar_inverse(zoo::haar_forward(x1, 1, 3), 1).value(), x1.value()));
    const Tensor x2 = random_tensor({2, 8, 8, 2}, 32);
    for (std::size_t levels = 1; levels <= 3; ++levels)
      worst = std::max(worst, max_diff(zoo::haar_inverse(zoo::haar_forward(x2, 2, levels), 2).value(), x2.value()));
    c.check("Haar perfect reconstruction (1D and 2D, 1-3 levels)", worst, 1e-10);
  });

  c.guarded("deeponet", [&] {
    const auto y = zoo::deeponet_combine(ag::constant({2, 1}, {1.0, 1.0}), ag::constant({3, 1}, {0.125, 0.5, 0.875}),
                                         ag::constant({1}, {0.25}), 1)
                       .value();
    std::vector<double> t;
    for (double q : {0.0, 0.25, 1.0}) t.insert(t.end(), {q, 1.0});
    const auto z = zoo::deeponet_combine(ag::constant({1, 2}, {2.0, -1.0}), ag::constant({3, 2}, t),
                                         ag::constant({1}, {0.0}), 2)
                       .value();
    const bool exact = y == std::vector<double>{0.375, 0.75, 1.125, 0.375, 0.75, 1.125} &&
                       z == std::vector<double>{-1.0, -0.5, 1.0};
    c.check("DeepONet branch-trunk closed-form fixture (exact)", exact ? 0.0 : 1.0, 0.0);
  });

  c.guarded("linear attention", [&] {
    const Tensor q = random_tensor({2, 5, 3}, 41), k = random_tensor({2, 5, 3}, 42), v = random_tensor({2, 5, 2}, 43);
    const auto y = zoo::linear_attention(q, k, v).value();
    auto softmax = [](const std::vector<double>& x, std::size_t row, std::size_t d) {
      std::vector<double> r(d);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (r[j] = std::exp(x[row * d + j]));
      for (auto& e : r) e /= s;
      return r;
    };
    double worst = 0.0;
    for (std::size_t g = 0; g < 2; ++g)
      for (std::size_t i = 0; i < 5; ++i) {
        const auto qi = softmax(q.value(), g * 5 + i, 3);
        double den = 0.0;
        std::vector<double> num(2, 0.0);
        for (std::size_t j = 0; j < 5; ++j) {
          const auto kj = softmax(k.value(), g * 5 + j, 3);
          double w = 0.0;
          for (std::size_t d = 0; d < 3; ++d) w += qi[d] * kj[d];
          den += w;
          for (std::size_t d = 0; d < 2; ++d) num[d] += w * v.value()[(g * 5 + j) * 2 + d];
        }
        for (std::size_t d = 0; d < 2; ++d) worst = std::max(worst, std::abs(y[(g * 5 + i) * 2 + d] - num[d] / den));
      }
    c.check("GNOT linear attention vs explicit quadratic evaluation", worst, 1e-10);
  });

  c.guarded("pod", [&] {
    const std::size_t count = 20, n = 30, p = 8;
    std::vector<std::vector<double>> data(count, std::vector<double>(n));
    Rng rng(500);
    for (auto& u : data)
      for (auto& x : u) x = rng.normal();
    std::vector<const std::vector<double>*> ptrs;
    for (const auto& u : data) ptrs.push_back(&u);
    const auto b = zoo::compute_pod_basis(ptrs, p);
    double ortho = 0.0;
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t e = 0; e < p; ++e) {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d += b.modes[a * n + i] * b.modes[e * n + i];
        ortho = std::max(ortho, std::abs(d - (a == e ? 1.0 : 0.0)));
      }
    c.check("POD mode orthonormality", ortho, 1e-10);
    auto recon = [&](std::size_t modes) {
      double total = 0.0;
      for (const auto& u : data) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) r[i] = u[i] - b.mean[i];
        for (std::size_t k = 0; k < modes; ++k) {
          double coef = 0.0;
          for (std::size_t i = 0; i < n; ++i) coef += b.modes[k * n + i] * (u[i] - b.mean[i]);
          for (std::size_t i = 0; i < n; ++i) r[i] -= coef * b.modes[k * n + i];
        }
        for (double x : r) total += x * x;
      }
      return total;
    };
    double increase = 0.0, prev = recon(0);
    for (std::size_t m = 1; m <= p; ++m) {
      const double e = recon(m);
      increase = std::max(increase, e - prev);
      prev = e;
    }
    c.check("POD reconstruction error is monotone in the mode count", increase, 1e-12);
  });
}

// ---------------------------------------------------------------- gradients

nlohmann::json tiny_options(const std::string& f) {
  if (f == "fnn" || f == "resnet") return {{"width", 4}, {"depth", 2}};
  if (f == "unet") return {{"width", 2}, {"levels", 2}};
  if (f == "cgan") return {{"width", 2}, {"levels", 1}, {"disc_width", 2}, {"lambda_adv", 0.5}};
  if (f == "deeponet")
    return {{"width", 6}, {"depth", 2}, {"trunk_width", 6}, {"trunk_depth", 2}, {"p", 3}, {"sensors", 4}};
  if (f == "pod-deeponet") return {{"width", 6}, {"depth", 2}, {"p", 4}, {"sensors", 4}, {"energy", 1.0}};
  if (f == "fno") return {{"width", 3}, {"depth", 2}, {"modes", 2}, {"proj_width", 4}};
  if (f == "wno") return {{"width", 3}, {"depth", 2}, {"levels", 2}, {"details", "all"}};
  if (f == "sno") return {{"width", 4}, {"depth", 1}, {"modes", 1}};
  if (f == "oformer") return {{"width", 4}, {"depth", 1}, {"heads", 2}, {"latents", 3}, {"rff", 2}};
  return {{"width", 4}, {"depth", 1}, {"heads", 2}, {"experts", 2}};
}

zoo::ModelContext context(GridSpec grid, std::size_t cin, std::size_t cout) {
  zoo::ModelContext c;
  c.in_channels = cin;
  c.out_channels = cout;
  c.grid = std::move(grid);
  return c;
}

struct BlockError {
  std::string worst;
  double error = 0.0;
  std::size_t blocks = 0;
};

/// Central differences on a spread of entries of every parameter block; the
/// error of a block is the relative l2 gap between the two gradient vectors.
BlockError finite_difference_check(const std::vector<zoo::Param*>& params, const std::function<Tensor()>& loss,
                                   std::size_t samples = 6, double h = 1e-5) {
  for (auto* p : params) p->value.zero_grad();
  ag::backward(loss());
  BlockError out;
  for (auto* p : params) {
    Tensor t = p->value;
    const std::size_t n = t.size(), count = std::min(samples, n);
    double num = 0.0, den_ad = 0.0, den_fd = 0.0;
    for (std::size_t s = 0; s < count; ++s) {
      const std::size_t idx = (s * n) / count + (n / count) / 2;
      const double ad = t.grad().empty() ? 0.0 : t.grad()[idx];
      const double orig = t.value()[idx];
      double fp, fm;
      {
        ag::NoGradGuard guard;
        t.mutable_value()[idx] = orig + h;
        fp = loss().item();
        t.mutable_value()[idx] = orig - h;
        fm = loss().item();
        t.mutable_value()[idx] = orig;
      }
      const double fd = (fp - fm) / (2 * h);
      num += (ad - fd) * (ad - fd);
      den_ad += ad * ad;
      den_fd += fd * fd;
    }
    const double den = std::sqrt(std::max(den_ad, den_fd));
    const double err = den < 1e-9 ? std::sqrt(num) : std::sqrt(num) / den;
    ++out.blocks;
    if (err >= out.error) {
      out.error = err;
      out.worst = p->name;
    }
  }
  return out;
}

void gradient_oracles(Collector& c) {
  struct Case {
    std::string family;
    zoo::ModelContext ctx;
  };
  std::vector<Case> cases;
  for (const auto& f : zoo::model_families()) cases.push_back({f, context(GridSpec::square(8, GridLayout::CellCentered), 1, 1)});
  cases.push_back({"fno", context(GridSpec::line(8, GridLayout::Periodic), 2, 1)});
  cases.push_back({"wno", context(GridSpec::line(8, GridLayout::Periodic), 1, 1)});
  cases.push_back({"sno", context(GridSpec::line(8, GridLayout::Periodic), 1, 2)});
  cases.push_back({"gnot", context(GridSpec::line(8, GridLayout::Periodic), 2, 2)});
  for (const auto& [family, ctx] : cases) {
    const std::string label = family + " " + std::to_string(ctx.grid.ndim()) + "D";
    c.guarded(label, [&] {
      auto m = zoo::make_model({family, tiny_options(family)}, ctx, 11);
      const Tensor x = random_tensor(zoo::batch_shape(ctx.grid, 2, ctx.in_channels), 1);
      const Tensor y = random_tensor(zoo::batch_shape(ctx.grid, 2, ctx.out_channels), 2);
      std::vector<std::vector<double>> outs;
      if (family == "pod-deeponet") {
        for (int k = 0; k < 6; ++k)
          outs.push_back(random_tensor(zoo::batch_shape(ctx.grid, 1, ctx.out_channels), 200 + k).value());
        std::vector<const std::vector<double>*> ptrs;
        for (auto& o : outs) ptrs.push_back(&o);
        m->prepare(ptrs);
      }
      std::vector<zoo::Param*> main, disc;
      for (auto& p : m->params()) (p.group == 0 ? main : disc).push_back(&p);
      std::function<Tensor()> loss = [&] { return ag::rel_l2_loss(m->forward(x, ctx.grid), y); };
      if (family == "cgan") {
        const auto& g = static_cast<const zoo::CGan&>(*m);
        loss = [&] { return zoo::cgan_losses(g, x, y, ctx.grid).generator; };
        const auto d = finite_difference_check(disc, [&] { return zoo::cgan_losses(g, x, y, ctx.grid).discriminator; });
        c.check("gradients " + label + " discriminator", d.error, 1e-4,
                std::to_string(d.blocks) + " blocks, worst " + d.worst);
      }
      const auto e = finite_difference_check(main, loss);
      c.check("gradients " + label, e.error, 1e-4, std::to_string(e.blocks) + " blocks, worst " + e.worst);
    });
  }
}

// ---------------------------------------------------------------- mesh invariance

void mesh_oracles(Collector& c) {
  const std::vector<std::pair<std::string, nlohmann::json>> models{
      {"fno", {{"width", 4}, {"depth", 2}, {"modes", 4}, {"proj_width", 8}}},
      {"gnot", {{"width", 8}, {"depth", 1}, {"heads", 2}, {"experts", 2}}},
      {"sno", {{"width", 4}, {"depth", 2}, {"modes", 4}}},
      {"deeponet", {{"width", 8}, {"depth", 2}, {"trunk_width", 8}, {"trunk_depth", 2}, {"p", 4}, {"sensors", 8}}},
      {"oformer", {{"width", 8}, {"depth", 1}, {"heads", 2}, {"latents", 4}, {"rff", 4}}},
  };
  for (const auto& [family, options] : models) {
    c.guarded("mesh " + family, [&] {
      auto a = zoo::make_model({family, options}, context(GridSpec::square(16), 1, 1), 3);
      auto b = zoo::make_model({family, options}, context(GridSpec::square(64), 1, 1), 3);
      const double gap = std::abs(double(zoo::count_params(*a)) - double(zoo::count_params(*b)));
      c.check(family + " parameter count at 16x16 and 64x64", gap, 0.0,
              std::to_string(zoo::count_params(*a)) + " parameters");
      bool ok = true;
      for (std::size_t r : {24, 32}) {
        const auto g = GridSpec::square(r);
        const Tensor y = a->forward(random_tensor(zoo::batch_shape(g, 1, 1), r), g);
        ok = ok && y.shape() == zoo::batch_shape(g, 1, 1);
        for (double v : y.value()) ok = ok && std::isfinite(v);
      }
      c.check(family + " forward at untrained resolutions 24x24 and 32x32", ok ? 0.0 : 1.0, 0.0);
    });
  }
}

}  // namespace

std::string to_string(OracleGroup g) {
  switch (g) {
    case OracleGroup::Metric: return "metric";
    case OracleGroup::Solver: return "solver";
    case OracleGroup::Layer: return "layer";
    case OracleGroup::Gradient: return "gradient";
    case OracleGroup::MeshInvariance: return "mesh-invariance";
  }
  return "unknown";
}

std::vector<OracleCheck> run_oracles(const std::set<OracleGroup>& groups) {
  Collector c;
  auto want = [&](OracleGroup g) {
    c.group = g;
    return groups.empty() || groups.count(g);
  };
  if (want(OracleGroup::Metric)) metric_oracles(c);
  if (want(OracleGroup::Solver)) solver_oracles(c);
  if (want(OracleGroup::Layer)) layer_oracles(c);
  if (want(OracleGroup::Gradient)) gradient_oracles(c);
  if (want(OracleGroup::MeshInvariance)) mesh_oracles(c);
  return c.out;
}

}  // namespace opbench::cli

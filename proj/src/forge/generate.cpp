#include "opbench/forge/generate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <thread>

#include "opbench/errors.hpp"
#include "opbench/forge/burgers.hpp"
#include "opbench/forge/darcy.hpp"
#include "opbench/forge/elasticity.hpp"
#include "opbench/forge/navier_stokes.hpp"
#include "opbench/forge/shallow_water.hpp"
#include "opbench/util/random.hpp"

namespace opbench::forge {

namespace {

constexpr std::uint64_t kInputStream = 1;
constexpr std::uint64_t kScalarStream = 2;

const char* boundary_name(Boundary b) { return b == Boundary::Periodic ? "periodic" : "reflective"; }

nlohmann::json solver_meta(const SolverConfig& c) {
  return {{"resolution", c.resolution}, {"dt", c.dt},         {"t_final", c.t_final},
          {"stored_steps", c.stored_steps}, {"nu", c.nu},     {"gravity", c.gravity},
          {"beta", c.beta},                 {"boundary", boundary_name(c.boundary)},
          {"tolerance", c.tolerance},       {"modulus_soft", c.modulus_soft},
          {"modulus_ratio", c.modulus_ratio}, {"poisson", c.poisson},
          {"applied_strain", c.applied_strain}};
}

nlohmann::json grf_meta(const GRFSpec& g) {
  return {{"alpha", g.alpha}, {"tau", g.tau}, {"scale", g.scale}, {"max_mode", g.max_mode}};
}

std::vector<double> flatten(const std::vector<std::vector<double>>& snaps) {
  std::vector<double> out;
  for (const auto& s : snaps) out.insert(out.end(), s.begin(), s.end());
  return out;
}

GRFSpec sample_spec(const GenerateConfig& cfg, std::uint64_t sample_seed, std::size_t ndim) {
  GRFSpec g = cfg.grf;
  g.ndim = ndim;
  g.seed = derive_seed(sample_seed, kInputStream);
  return g;
}

FieldSample burgers_sample(const GenerateConfig& cfg, std::uint64_t s) {
  const std::size_t n = cfg.solver.resolution;
  const std::size_t fine_n = n * cfg.refine;
  const GridSpec coarse = GridSpec::line(n, GridLayout::Periodic);
  const GridSpec fine = GridSpec::line(fine_n, GridLayout::Periodic);
  const auto u0 = sample_grf(sample_spec(cfg, s, 1), fine);
  SolverConfig sc = cfg.solver;
  sc.resolution = fine_n;
  const auto sol = solve_burgers_1d(u0, sc);
  FieldSample f;
  f.grid = coarse;
  f.input = subsample_values(fine, u0, 1, cfg.refine);
  f.output = subsample_values(fine, sol.final, 1, cfg.refine);
  for (const auto& snap : sol.snapshots) {
    const auto c = subsample_values(fine, snap, 1, cfg.refine);
    f.trajectory.insert(f.trajectory.end(), c.begin(), c.end());
  }
  f.time = TimeMeta{0.0, sc.t_final, sol.snapshots.size()};
  return f;
}

FieldSample darcy_sample(const GenerateConfig& cfg, std::uint64_t s) {
  const std::size_t n = cfg.solver.resolution;
  const GridSpec grid = GridSpec::square(n, GridLayout::Nodal);
  auto a = sample_grf(sample_spec(cfg, s, 2), grid);
  for (auto& v : a) v = v < 0.0 ? cfg.a_low : cfg.a_high;
  const auto sol = solve_darcy_steady(a, cfg.solver);
  FieldSample f;
  f.grid = grid;
  f.input = std::move(a);
  f.output = sol.u;
  return f;
}

std::vector<double> ns_forcing(std::size_t n, double amplitude) {
  std::vector<double> f(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double arg = 2.0 * std::numbers::pi * (double(i) + double(j)) / double(n);
      f[i * n + j] = amplitude * (std::sin(arg) + std::cos(arg));
    }
  return f;
}

FieldSample ns_sample(const GenerateConfig& cfg, std::uint64_t s) {
  const std::size_t n = cfg.solver.resolution;
  const GridSpec grid = GridSpec::square(n, GridLayout::Periodic);
  const auto w0 = sample_grf(sample_spec(cfg, s, 2), grid);
  const auto force = ns_forcing(n, cfg.forcing_amplitude);
  const auto sol = solve_ns_vorticity(w0, force, cfg.solver);
  FieldSample f;
  f.grid = grid;
  f.in_channels = 2;
  f.input.resize(2 * n * n);
  for (std::size_t p = 0; p < n * n; ++p) {
    f.input[2 * p] = w0[p];
    f.input[2 * p + 1] = force[p];
  }
  f.output = sol.final;
  f.trajectory = flatten(sol.snapshots);
  f.time = TimeMeta{0.0, cfg.solver.t_final, sol.snapshots.size()};
  return f;
}

FieldSample swe_sample(const GenerateConfig& cfg, std::uint64_t s) {
  const std::size_t n = cfg.solver.resolution;
  Rng rng(derive_seed(s, kScalarStream));
  const double radius = rng.uniform(cfg.radius_lo, cfg.radius_hi);
  const auto init = radial_dam_break(n, radius);
  const std::vector<double> flat(n * n, 0.0);
  const auto sol = solve_shallow_water(init, flat, cfg.solver);
  FieldSample f;
  f.grid = GridSpec::square(n, GridLayout::CellCentered);
  f.input = init.h;
  f.output = sol.final.h;
  for (const auto& snap : sol.snapshots) f.trajectory.insert(f.trajectory.end(), snap.h.begin(), snap.h.end());
  f.time = TimeMeta{0.0, cfg.solver.t_final, sol.snapshots.size()};
  return f;
}

FieldSample elasticity_sample(const GenerateConfig& cfg, std::uint64_t s, bool stress) {
  const std::size_t n = cfg.solver.resolution;
  const auto m = sample_microstructure(sample_spec(cfg, s, 2), n);
  const auto sol = solve_plane_stress_composite(m, cfg.solver);
  FieldSample f;
  f.grid = GridSpec::square(n, GridLayout::CellCentered);
  f.input.assign(m.phase.begin(), m.phase.end());
  f.out_channels = 3;
  f.output.resize(3 * n * n);
  const auto& a = stress ? sol.sxx : sol.exx;
  const auto& b = stress ? sol.syy : sol.eyy;
  const auto& c = stress ? sol.sxy : sol.exy;
  for (std::size_t p = 0; p < n * n; ++p) {
    f.output[3 * p] = a[p];
    f.output[3 * p + 1] = b[p];
    f.output[3 * p + 2] = c[p];
  }
  return f;
}

}  // namespace

const std::vector<std::string>& generated_datasets() {
  static const std::vector<std::string> names{"burgers", "darcy", "navier-stokes",
                                              "shallow-water", "stress", "strain"};
  return names;
}

GenerateConfig default_generate_config(const std::string& name) {
  GenerateConfig g;
  if (name == "burgers") {
    g.solver = burgers_defaults();
    g.grf = GRFSpec{2.0, 3.0, 2.5, 0, 1, 24};
  } else if (name == "darcy") {
    g.solver = darcy_defaults();
    g.grf = GRFSpec{2.0, 3.0, 1.0, 0, 2, 24};
  } else if (name == "navier-stokes") {
    g.solver = navier_stokes_defaults();
    g.grf = GRFSpec{2.5, 3.0, 6.0, 0, 2, 16};
  } else if (name == "shallow-water") {
    g.solver = shallow_water_defaults();
  } else if (name == "stress" || name == "strain") {
    g.solver = elasticity_defaults();
    g.grf = GRFSpec{2.0, 3.0, 1.0, 0, 2, 16};
  } else {
    throw ConfigError("dataset '" + name + "' cannot be generated (supported: burgers, darcy, "
                      "navier-stokes, shallow-water, stress, strain)");
  }
  return g;
}

DatasetBundle generate_dataset(const std::string& name, std::size_t count, std::size_t resolution,
                               std::uint64_t seed) {
  GenerateConfig cfg = default_generate_config(name);
  cfg.solver.resolution = resolution;
  return generate_dataset(name, count, cfg, seed);
}

DatasetBundle generate_dataset(const std::string& name, std::size_t count,
                               const GenerateConfig& cfg, std::uint64_t seed) {
  default_generate_config(name);
  if (count == 0) throw ConfigError("generate: count must be >= 1");
  if (cfg.refine < 1) throw ConfigError("generate: refine must be >= 1");
  const std::size_t n = cfg.solver.resolution;

  DatasetBundle b;
  b.name = name;
  nlohmann::json meta = {{"dataset", name}, {"seed", seed}, {"count", count}, {"solver", solver_meta(cfg.solver)}};
  std::function<FieldSample(std::uint64_t)> make;
  if (name == "burgers") {
    b.grid = GridSpec::line(n, GridLayout::Periodic);
    b.input_channels = {"u0"};
    b.output_channels = {"u"};
    meta["grf"] = grf_meta(cfg.grf);
    meta["refine"] = cfg.refine;
    meta["time_dependent"] = true;
    make = [&](std::uint64_t s) { return burgers_sample(cfg, s); };
  } else if (name == "darcy") {
    b.grid = GridSpec::square(n, GridLayout::Nodal);
    b.input_channels = {"a"};
    b.output_channels = {"u"};
    meta["grf"] = grf_meta(cfg.grf);
    meta["coefficient_values"] = {cfg.a_low, cfg.a_high};
    meta["time_dependent"] = false;
    make = [&](std::uint64_t s) { return darcy_sample(cfg, s); };
  } else if (name == "navier-stokes") {
    b.grid = GridSpec::square(n, GridLayout::Periodic);
    b.input_channels = {"w0", "f"};
    b.output_channels = {"w"};
    meta["grf"] = grf_meta(cfg.grf);
    meta["forcing"] = "A (sin 2pi(x+y) + cos 2pi(x+y))";
    meta["forcing_amplitude"] = cfg.forcing_amplitude;
    meta["time_dependent"] = true;
    make = [&](std::uint64_t s) { return ns_sample(cfg, s); };
  } else if (name == "shallow-water") {
    b.grid = GridSpec::square(n, GridLayout::CellCentered);
    b.input_channels = {"h0"};
    b.output_channels = {"h"};
    meta["initial_condition"] = "radial dam break";
    meta["radius_range"] = {cfg.radius_lo, cfg.radius_hi};
    meta["bathymetry"] = "flat";
    meta["time_dependent"] = true;
    make = [&](std::uint64_t s) { return swe_sample(cfg, s); };
  } else {
    const bool stress = name == "stress";
    b.grid = GridSpec::square(n, GridLayout::CellCentered);
    b.input_channels = {"phase"};
    b.output_channels = stress ? std::vector<std::string>{"sxx", "syy", "sxy"}
                               : std::vector<std::string>{"exx", "eyy", "exy"};
    meta["grf"] = grf_meta(cfg.grf);
    meta["time_dependent"] = false;
    make = [&, stress](std::uint64_t s) { return elasticity_sample(cfg, s, stress); };
  }
  b.pde_meta = std::move(meta);
  b.samples.resize(count);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      try {
        b.samples[k] = make(derive_seed(seed, k));
      } catch (const Error& e) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::make_exception_ptr(
              SolverError("dataset '" + name + "' sample " + std::to_string(k) + ": " + e.what()));
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, unsigned(count)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  b.validate();
  return b;
}

}  // namespace opbench::forge

#include "opbench/forge/grf.hpp"

#include <cmath>
#include <numbers>

#include "opbench/errors.hpp"
#include "opbench/util/random.hpp"

namespace opbench::forge {

void GRFSpec::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("GRF alpha must be positive");
  if (!(tau > 0.0)) throw ConfigError("GRF tau must be positive");
  if (!(scale > 0.0)) throw ConfigError("GRF scale must be positive");
  if (ndim != 1 && ndim != 2) throw ConfigError("GRF ndim must be 1 or 2");
  if (max_mode < 1) throw ConfigError("GRF max_mode must be >= 1");
}

namespace {

double mode_std(const GRFSpec& s, double k2) {
  // (k^2 + tau^2)^(-alpha/2); underflows cleanly to zero for large alpha.
  return s.scale * std::exp(-0.5 * s.alpha * std::log(k2 + s.tau * s.tau));
}

std::complex<double> draw(Rng& rng, double sd) {
  const double re = rng.normal();
  const double im = rng.normal();
  return {sd * re * std::numbers::sqrt2 * 0.5, sd * im * std::numbers::sqrt2 * 0.5};
}

}  // namespace

GrfCoefficients draw_grf(const GRFSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  GrfCoefficients out;
  out.ndim = spec.ndim;
  out.max_mode = spec.max_mode;
  const long K = static_cast<long>(spec.max_mode);
  if (spec.ndim == 1) {
    out.c.resize(spec.max_mode);
    for (long k = 1; k <= K; ++k) out.c[k - 1] = draw(rng, mode_std(spec, double(k * k)));
  } else {
    out.c.assign((2 * K + 1) * (K + 1), {0.0, 0.0});
    for (long k0 = -K; k0 <= K; ++k0)
      for (long k1 = 0; k1 <= K; ++k1) {
        if (k1 == 0 && k0 <= 0) continue;
        out.c[(k0 + K) * (K + 1) + k1] = draw(rng, mode_std(spec, double(k0 * k0 + k1 * k1)));
      }
  }
  return out;
}

std::vector<double> synthesize(const GrfCoefficients& coeffs, const GridSpec& grid) {
  if (grid.ndim() != coeffs.ndim) throw ShapeError("GRF dimensionality differs from grid");
  const auto axes = make_grid(grid);
  const double two_pi = 2.0 * std::numbers::pi;
  const long K = static_cast<long>(coeffs.max_mode);
  if (grid.ndim() == 1) {
    const auto& x = axes[0];
    std::vector<double> f(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xi = x[i] / grid.extent[0];
      double acc = 0.0;
      for (long k = 1; k <= K; ++k)
        acc += 2.0 * (coeffs.c[k - 1] * std::polar(1.0, two_pi * double(k) * xi)).real();
      f[i] = acc;
    }
    return f;
  }
  const auto& x = axes[0];
  const auto& y = axes[1];
  const std::size_t n0 = x.size(), n1 = y.size();
  // partial[k0][j] = sum_k1 c[k0][k1] exp(2 pi i k1 y_j)
  std::vector<std::complex<double>> ey((K + 1) * n1);
  for (long k1 = 0; k1 <= K; ++k1)
    for (std::size_t j = 0; j < n1; ++j)
      ey[k1 * n1 + j] = std::polar(1.0, two_pi * double(k1) * y[j] / grid.extent[1]);
  std::vector<std::complex<double>> partial((2 * K + 1) * n1, {0.0, 0.0});
  for (long k0 = -K; k0 <= K; ++k0)
    for (long k1 = 0; k1 <= K; ++k1) {
      if (k1 == 0 && k0 <= 0) continue;
      const auto c = coeffs.c[(k0 + K) * (K + 1) + k1];
      for (std::size_t j = 0; j < n1; ++j) partial[(k0 + K) * n1 + j] += c * ey[k1 * n1 + j];
    }
  std::vector<double> f(n0 * n1, 0.0);
  for (std::size_t i = 0; i < n0; ++i) {
    const double xi = x[i] / grid.extent[0];
    for (long k0 = -K; k0 <= K; ++k0) {
      const auto e = std::polar(1.0, two_pi * double(k0) * xi);
      for (std::size_t j = 0; j < n1; ++j)
        f[i * n1 + j] += 2.0 * (e * partial[(k0 + K) * n1 + j]).real();
    }
  }
  return f;
}

std::vector<double> sample_grf(const GRFSpec& spec, const GridSpec& grid) {
  if (grid.ndim() != spec.ndim) throw ConfigError("GRF spec ndim differs from grid ndim");
  return synthesize(draw_grf(spec), grid);
}

}  // namespace opbench::forge

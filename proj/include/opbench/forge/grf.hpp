#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "opbench/grid/grid.hpp"

namespace opbench::forge {

/// Periodic Gaussian random field on the unit interval / square with power
/// spectrum  scale^2 * (|k|^2 + tau^2)^(-alpha)  over integer wavevectors
/// 0 < |k|_inf <= max_mode. The mean mode is always zero.
struct GRFSpec {
  double alpha = 2.0;
  double tau = 3.0;
  double scale = 1.0;
  std::uint64_t seed = 0;
  std::size_t ndim = 1;
  std::size_t max_mode = 24;

  void validate() const;
};

/// Truncated coefficient set of one draw. Synthesis is a direct trigonometric
/// sum, so the same coefficients can be evaluated on any grid.
struct GrfCoefficients {
  std::size_t ndim = 1;
  std::size_t max_mode = 0;
  /// 1D: c[k-1] for k = 1..K.
  /// 2D: half plane, c[(k0 + K) * (K + 1) + k1] for k0 in [-K, K], k1 in [0, K];
  ///     entries with k1 == 0 && k0 <= 0 are unused and zero.
  std::vector<std::complex<double>> c;
};

GrfCoefficients draw_grf(const GRFSpec& spec);
/// field(x) = sum over the half space of 2 Re(c_k exp(2 pi i k.x)), with x
/// taken in units of each axis' extent.
std::vector<double> synthesize(const GrfCoefficients& coeffs, const GridSpec& grid);
std::vector<double> sample_grf(const GRFSpec& spec, const GridSpec& grid);

}  // namespace opbench::forge

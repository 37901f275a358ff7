#pragma once

#include <memory>
#include <vector>

#include "opbench/grid/grid.hpp"
#include "opbench/zoo/autograd.hpp"

namespace opbench::zoo {

using MatrixPtr = std::shared_ptr<const std::vector<double>>;

struct Linear {
  ag::Tensor w, b;
  ag::Tensor operator()(const ag::Tensor& x) const;
};

/// Dense layers with GELU between them; `final_activation` also activates the output.
struct Mlp {
  std::vector<Linear> layers;
  bool final_activation = false;
  ag::Tensor operator()(const ag::Tensor& x) const;
};

/// Spatial shape of a tensor laid out like `grid`: [B, shape..., channels].
ag::Shape batch_shape(const GridSpec& grid, std::size_t batch, std::size_t channels);

/// Throws ShapeError unless x is [B, grid.shape..., channels].
void check_batch(const ag::Tensor& x, const GridSpec& grid, std::size_t channels);

/// Appends the grid's unit-box coordinates as trailing channels.
ag::Tensor append_coordinates(const ag::Tensor& x, const GridSpec& grid);

/// Coordinates as a constant [1, points, ndim] tensor repeated over `batch`.
ag::Tensor coordinate_tokens(const GridSpec& grid, std::size_t batch);

/// Partial DFT matrices for one axis. Retained wavenumbers are 0..k_max on the
/// last (real) axis and -k_max..k_max on axis 0 of a 2D grid, stored in the order
/// 0..k_max, -k_max..-1. When k_max = n/2 the -n/2 row aliases +n/2 and is zeroed.
struct DftAxis {
  std::size_t n = 0, k_max = 0, modes = 0;
  MatrixPtr fwd_re, fwd_im;  // [modes, n]
  MatrixPtr inv_re, inv_im;  // [n, modes]
};

/// Half spectrum (real input) transform along the last spatial axis; the inverse
/// carries the weights 1 (mean and Nyquist) or 2 so it returns the real part.
const DftAxis& real_dft_axis(std::size_t n, std::size_t k_max);
/// Full complex transform over -k_max..k_max.
const DftAxis& complex_dft_axis(std::size_t n, std::size_t k_max);

struct Complex {
  ag::Tensor re, im;
};

/// Forward transform of a real field [B, spatial..., C] onto the retained modes,
/// flattened to [B, modes, C].
Complex spectral_analysis(const ag::Tensor& x, const GridSpec& grid, std::size_t k_max);
/// Inverse of spectral_analysis for coefficients [B, modes, C]; returns the real part.
ag::Tensor spectral_synthesis(const Complex& z, const GridSpec& grid, std::size_t k_max);
std::size_t spectral_modes(std::size_t ndim, std::size_t k_max);

/// Fourier layer: transform, per-mode complex channel mixing with (w_re, w_im)
/// [modes, Cin, Cout], truncation and inverse transform.
ag::Tensor spectral_conv(const ag::Tensor& x, const GridSpec& grid, std::size_t k_max,
                         const ag::Tensor& w_re, const ag::Tensor& w_im);

/// Orthonormal one-level Haar analysis rows for an axis of even length n.
/// approx[i] = (x[2i] + x[2i+1]) / sqrt2, detail[i] = (x[2i] - x[2i+1]) / sqrt2.
MatrixPtr haar_approx(std::size_t n);
MatrixPtr haar_detail(std::size_t n);
MatrixPtr transpose(const MatrixPtr& m, std::size_t rows, std::size_t cols);

/// Multi-level separable Haar decomposition of [B, spatial..., C]. Each level
/// splits the current approximation into 2^ndim bands; details[l] holds the
/// 2^ndim - 1 detail bands of level l (0 = finest).
struct HaarPyramid {
  ag::Tensor approx;
  std::vector<std::vector<ag::Tensor>> details;
};
HaarPyramid haar_forward(const ag::Tensor& x, std::size_t ndim, std::size_t levels);
ag::Tensor haar_inverse(const HaarPyramid& p, std::size_t ndim);

/// Scaled dot-product attention: q [G, n, d], k [G, m, d], v [G, m, dv].
ag::Tensor softmax_attention(const ag::Tensor& q, const ag::Tensor& k, const ag::Tensor& v);
/// Normalized linear attention:
///   out_i = sum_j (q~_i . k~_j) v_j / sum_j (q~_i . k~_j)
/// with q~, k~ the feature-wise softmax of q and k.
ag::Tensor linear_attention(const ag::Tensor& q, const ag::Tensor& k, const ag::Tensor& v);
/// [B, n, H * d] -> [B * H, n, d] and back.
ag::Tensor split_heads(const ag::Tensor& x, std::size_t heads);
ag::Tensor merge_heads(const ag::Tensor& x, std::size_t heads);

/// Constant matrix [m, n] that linearly interpolates the n grid values of one
/// axis at m sensor positions spread evenly over the unit interval.
MatrixPtr interpolation_matrix(std::size_t n, GridLayout layout, std::size_t sensors);

}  // namespace opbench::zoo

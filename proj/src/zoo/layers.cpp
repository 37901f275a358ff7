#include "opbench/zoo/layers.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "opbench/errors.hpp"

namespace opbench::zoo {

using ag::Tensor;

Tensor Linear::operator()(const Tensor& x) const { return ag::add_bias(ag::matmul(x, w), b); }

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size() || final_activation) h = ag::gelu(h);
  }
  return h;
}

ag::Shape batch_shape(const GridSpec& grid, std::size_t batch, std::size_t channels) {
  ag::Shape s{batch};
  s.insert(s.end(), grid.shape.begin(), grid.shape.end());
  s.push_back(channels);
  return s;
}

void check_batch(const Tensor& x, const GridSpec& grid, std::size_t channels) {
  const auto want = batch_shape(grid, x.rank() ? x.dim(0) : 0, channels);
  if (x.shape() != want)
    throw ShapeError("batch " + ag::shape_str(x.shape()) + " does not match expected " + ag::shape_str(want));
}

Tensor coordinate_tokens(const GridSpec& grid, std::size_t batch) {
  const auto c = unit_coordinates(grid);
  std::vector<double> v;
  v.reserve(batch * c.size());
  for (std::size_t b = 0; b < batch; ++b) v.insert(v.end(), c.begin(), c.end());
  return ag::constant({batch, grid.points(), grid.ndim()}, std::move(v));
}

Tensor append_coordinates(const Tensor& x, const GridSpec& grid) {
  const std::size_t B = x.dim(0);
  Tensor c = ag::reshape(coordinate_tokens(grid, B), batch_shape(grid, B, grid.ndim()));
  return ag::concat_last({x, c});
}

// ------------------------------------------------------------------ spectral

namespace {

std::mutex& cache_mutex() {
  static std::mutex m;
  return m;
}

long retained_wavenumber(std::size_t idx, std::size_t k_max) {
  return idx <= k_max ? long(idx) : long(idx) - long(2 * k_max + 1);
}

std::unique_ptr<DftAxis> build_axis(std::size_t n, std::size_t k_max, bool real) {
  if (2 * k_max > n)
    throw ConfigError("retained modes k_max=" + std::to_string(k_max) + " exceed the bandwidth of a " +
                      std::to_string(n) + "-point axis");
  auto a = std::make_unique<DftAxis>();
  a->n = n;
  a->k_max = k_max;
  a->modes = real ? k_max + 1 : 2 * k_max + 1;
  const std::size_t m = a->modes;
  std::vector<double> fr(m * n), fi(m * n), ir(n * m), ii(n * m);
  for (std::size_t q = 0; q < m; ++q) {
    const long k = real ? long(q) : retained_wavenumber(q, k_max);
    const bool aliased = !real && 2 * std::size_t(std::labs(k)) == n && k < 0;
    if (aliased) continue;
    double weight = 1.0;
    if (real) weight = (k == 0 || 2 * std::size_t(k) == n) ? 1.0 : 2.0;
    for (std::size_t x = 0; x < n; ++x) {
      const double arg = 2.0 * std::numbers::pi * double(k) * double(x) / double(n);
      const double c = std::cos(arg), s = std::sin(arg);
      fr[q * n + x] = c;
      fi[q * n + x] = -s;
      ir[x * m + q] = weight * c / double(n);
      ii[x * m + q] = weight * s / double(n);
    }
  }
  a->fwd_re = std::make_shared<const std::vector<double>>(std::move(fr));
  a->fwd_im = std::make_shared<const std::vector<double>>(std::move(fi));
  a->inv_re = std::make_shared<const std::vector<double>>(std::move(ir));
  a->inv_im = std::make_shared<const std::vector<double>>(std::move(ii));
  return a;
}

const DftAxis& cached_axis(std::size_t n, std::size_t k_max, bool real) {
  static std::map<std::tuple<std::size_t, std::size_t, bool>, std::unique_ptr<DftAxis>> cache;
  std::lock_guard lock(cache_mutex());
  auto& slot = cache[{n, k_max, real}];
  if (!slot) slot = build_axis(n, k_max, real);
  return *slot;
}

void check_grid_rank(const Tensor& x, const GridSpec& grid, const char* op) {
  if (x.rank() != grid.ndim() + 2)
    throw ShapeError(std::string(op) + ": tensor " + ag::shape_str(x.shape()) + " does not match a " +
                     std::to_string(grid.ndim()) + "D grid");
  for (std::size_t a = 0; a < grid.ndim(); ++a)
    if (x.dim(a + 1) != grid.shape[a])
      throw ShapeError(std::string(op) + ": tensor " + ag::shape_str(x.shape()) + " does not match the grid");
}

Tensor cmap_re(const Tensor& re, const Tensor& im, std::size_t axis, const MatrixPtr& mr, const MatrixPtr& mi,
               std::size_t rows) {
  return ag::sub(ag::axis_map(re, axis, mr, rows), ag::axis_map(im, axis, mi, rows));
}

Tensor cmap_im(const Tensor& re, const Tensor& im, std::size_t axis, const MatrixPtr& mr, const MatrixPtr& mi,
               std::size_t rows) {
  return ag::add(ag::axis_map(im, axis, mr, rows), ag::axis_map(re, axis, mi, rows));
}

}  // namespace

const DftAxis& real_dft_axis(std::size_t n, std::size_t k_max) { return cached_axis(n, k_max, true); }
const DftAxis& complex_dft_axis(std::size_t n, std::size_t k_max) { return cached_axis(n, k_max, false); }

std::size_t spectral_modes(std::size_t ndim, std::size_t k_max) {
  return ndim == 1 ? k_max + 1 : (2 * k_max + 1) * (k_max + 1);
}

Complex spectral_analysis(const Tensor& x, const GridSpec& grid, std::size_t k_max) {
  check_grid_rank(x, grid, "spectral_analysis");
  const std::size_t B = x.dim(0), C = x.shape().back();
  if (grid.ndim() == 1) {
    const auto& ax = real_dft_axis(grid.shape[0], k_max);
    return {ag::axis_map(x, 1, ax.fwd_re, ax.modes), ag::axis_map(x, 1, ax.fwd_im, ax.modes)};
  }
  const auto& last = real_dft_axis(grid.shape[1], k_max);
  const auto& first = complex_dft_axis(grid.shape[0], k_max);
  Tensor yr = ag::axis_map(x, 2, last.fwd_re, last.modes);
  Tensor yi = ag::axis_map(x, 2, last.fwd_im, last.modes);
  Tensor zr = cmap_re(yr, yi, 1, first.fwd_re, first.fwd_im, first.modes);
  Tensor zi = cmap_im(yr, yi, 1, first.fwd_re, first.fwd_im, first.modes);
  const ag::Shape flat{B, first.modes * last.modes, C};
  return {ag::reshape(zr, flat), ag::reshape(zi, flat)};
}

Tensor spectral_synthesis(const Complex& z, const GridSpec& grid, std::size_t k_max) {
  const std::size_t B = z.re.dim(0), C = z.re.shape().back();
  if (z.re.dim(1) != spectral_modes(grid.ndim(), k_max))
    throw ShapeError("spectral_synthesis: coefficient count does not match k_max");
  if (grid.ndim() == 1) {
    const auto& ax = real_dft_axis(grid.shape[0], k_max);
    return ag::sub(ag::axis_map(z.re, 1, ax.inv_re, ax.n), ag::axis_map(z.im, 1, ax.inv_im, ax.n));
  }
  const auto& last = real_dft_axis(grid.shape[1], k_max);
  const auto& first = complex_dft_axis(grid.shape[0], k_max);
  const ag::Shape grid_shape{B, first.modes, last.modes, C};
  Tensor orr = ag::reshape(z.re, grid_shape), oi = ag::reshape(z.im, grid_shape);
  Tensor pr = cmap_re(orr, oi, 1, first.inv_re, first.inv_im, first.n);
  Tensor pi = cmap_im(orr, oi, 1, first.inv_re, first.inv_im, first.n);
  return ag::sub(ag::axis_map(pr, 2, last.inv_re, last.n), ag::axis_map(pi, 2, last.inv_im, last.n));
}

Tensor spectral_conv(const Tensor& x, const GridSpec& grid, std::size_t k_max, const Tensor& w_re,
                     const Tensor& w_im) {
  const Complex z = spectral_analysis(x, grid, k_max);
  Complex o{ag::sub(ag::mode_mix(z.re, w_re), ag::mode_mix(z.im, w_im)),
            ag::add(ag::mode_mix(z.re, w_im), ag::mode_mix(z.im, w_re))};
  return spectral_synthesis(o, grid, k_max);
}

// ------------------------------------------------------------------ Haar

MatrixPtr haar_approx(std::size_t n) {
  if (n % 2) throw ConfigError("Haar step needs an even axis length, got " + std::to_string(n));
  std::vector<double> m(n / 2 * n, 0.0);
  for (std::size_t i = 0; i < n / 2; ++i) m[i * n + 2 * i] = m[i * n + 2 * i + 1] = std::numbers::sqrt2 / 2;
  return std::make_shared<const std::vector<double>>(std::move(m));
}

MatrixPtr haar_detail(std::size_t n) {
  if (n % 2) throw ConfigError("Haar step needs an even axis length, got " + std::to_string(n));
  std::vector<double> m(n / 2 * n, 0.0);
  for (std::size_t i = 0; i < n / 2; ++i) {
    m[i * n + 2 * i] = std::numbers::sqrt2 / 2;
    m[i * n + 2 * i + 1] = -std::numbers::sqrt2 / 2;
  }
  return std::make_shared<const std::vector<double>>(std::move(m));
}

MatrixPtr transpose(const MatrixPtr& m, std::size_t rows, std::size_t cols) {
  std::vector<double> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = (*m)[r * cols + c];
  return std::make_shared<const std::vector<double>>(std::move(t));
}

HaarPyramid haar_forward(const Tensor& x, std::size_t ndim, std::size_t levels) {
  HaarPyramid p;
  Tensor a = x;
  for (std::size_t l = 0; l < levels; ++l) {
    if (ndim == 1) {
      const std::size_t n = a.dim(1);
      p.details.push_back({ag::axis_map(a, 1, haar_detail(n), n / 2)});
      a = ag::axis_map(a, 1, haar_approx(n), n / 2);
    } else {
      const std::size_t n0 = a.dim(1), n1 = a.dim(2);
      Tensor lo = ag::axis_map(a, 1, haar_approx(n0), n0 / 2);
      Tensor hi = ag::axis_map(a, 1, haar_detail(n0), n0 / 2);
      const auto A1 = haar_approx(n1), D1 = haar_detail(n1);
      p.details.push_back({ag::axis_map(lo, 2, D1, n1 / 2), ag::axis_map(hi, 2, A1, n1 / 2),
                           ag::axis_map(hi, 2, D1, n1 / 2)});
      a = ag::axis_map(lo, 2, A1, n1 / 2);
    }
  }
  p.approx = a;
  return p;
}

Tensor haar_inverse(const HaarPyramid& p, std::size_t ndim) {
  Tensor a = p.approx;
  for (std::size_t l = p.details.size(); l-- > 0;) {
    const auto& d = p.details[l];
    if (ndim == 1) {
      const std::size_t h = a.dim(1), n = 2 * h;
      a = ag::add(ag::axis_map(a, 1, transpose(haar_approx(n), h, n), n),
                  ag::axis_map(d[0], 1, transpose(haar_detail(n), h, n), n));
    } else {
      const std::size_t h0 = a.dim(1), h1 = a.dim(2), n0 = 2 * h0, n1 = 2 * h1;
      const auto At1 = transpose(haar_approx(n1), h1, n1), Dt1 = transpose(haar_detail(n1), h1, n1);
      Tensor lo = ag::add(ag::axis_map(a, 2, At1, n1), ag::axis_map(d[0], 2, Dt1, n1));
      Tensor hi = ag::add(ag::axis_map(d[1], 2, At1, n1), ag::axis_map(d[2], 2, Dt1, n1));
      a = ag::add(ag::axis_map(lo, 1, transpose(haar_approx(n0), h0, n0), n0),
                  ag::axis_map(hi, 1, transpose(haar_detail(n0), h0, n0), n0));
    }
  }
  return a;
}

// ------------------------------------------------------------------ attention

Tensor softmax_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  const double s = 1.0 / std::sqrt(double(q.dim(2)));
  Tensor w = ag::softmax_last(ag::scale(ag::bmm(q, k, false, true), s));
  return ag::bmm(w, v);
}

Tensor linear_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  const std::size_t G = q.dim(0), n = q.dim(1), d = q.dim(2);
  Tensor qs = ag::softmax_last(q);
  Tensor ks = ag::softmax_last(k);
  Tensor kv = ag::bmm(ks, v, true, false);
  Tensor num = ag::bmm(qs, kv);
  Tensor ksum = ag::reshape(ag::sum_axis(ks, 1), {G, d, 1});
  Tensor den = ag::bmm(qs, ksum);
  return ag::div_rows(num, ag::reshape(den, {G * n}));
}

Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t B = x.dim(0), n = x.dim(1), D = x.dim(2);
  if (heads == 0 || D % heads) throw ConfigError("width " + std::to_string(D) + " is not divisible by " +
                                                 std::to_string(heads) + " heads");
  Tensor t = ag::permute(ag::reshape(x, {B, n, heads, D / heads}), {0, 2, 1, 3});
  return ag::reshape(t, {B * heads, n, D / heads});
}

Tensor merge_heads(const Tensor& x, std::size_t heads) {
  const std::size_t G = x.dim(0), n = x.dim(1), d = x.dim(2);
  Tensor t = ag::permute(ag::reshape(x, {G / heads, heads, n, d}), {0, 2, 1, 3});
  return ag::reshape(t, {G / heads, n, heads * d});
}

// ------------------------------------------------------------------ sensors

MatrixPtr interpolation_matrix(std::size_t n, GridLayout layout, std::size_t sensors) {
  if (sensors < 2) throw ConfigError("at least 2 sensors per axis are required");
  std::vector<double> m(sensors * n, 0.0);
  for (std::size_t i = 0; i < sensors; ++i) {
    double s = 0.0, pos = 0.0;
    switch (layout) {
      case GridLayout::Nodal:
        s = double(i) / double(sensors - 1);
        pos = s * double(n - 1);
        break;
      case GridLayout::Periodic:
        s = double(i) / double(sensors);
        pos = s * double(n);
        break;
      case GridLayout::CellCentered:
        s = double(i) / double(sensors - 1);
        pos = std::clamp(s * double(n) - 0.5, 0.0, double(n - 1));
        break;
    }
    std::size_t j = std::min<std::size_t>(std::size_t(std::floor(pos)), n - 1);
    const double t = pos - double(j);
    std::size_t j1 = j + 1;
    if (j1 >= n) j1 = layout == GridLayout::Periodic ? 0 : n - 1;
    m[i * n + j] += 1.0 - t;
    if (t > 0.0) m[i * n + j1] += t;
  }
  return std::make_shared<const std::vector<double>>(std::move(m));
}

}  // namespace opbench::zoo

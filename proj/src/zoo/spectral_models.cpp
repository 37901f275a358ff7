#include <cmath>

#include "opbench/errors.hpp"
#include "opbench/zoo/families.hpp"

namespace opbench::zoo {

using ag::Tensor;

namespace {

Tensor complex_re(const Tensor& re, const Tensor& im, std::size_t axis, const DftAxis& a, bool inverse) {
  const auto& mr = inverse ? a.inv_re : a.fwd_re;
  const auto& mi = inverse ? a.inv_im : a.fwd_im;
  const std::size_t rows = inverse ? a.n : a.modes;
  return ag::sub(ag::axis_map(re, axis, mr, rows), ag::axis_map(im, axis, mi, rows));
}

Tensor complex_im(const Tensor& re, const Tensor& im, std::size_t axis, const DftAxis& a, bool inverse) {
  const auto& mr = inverse ? a.inv_re : a.fwd_re;
  const auto& mi = inverse ? a.inv_im : a.fwd_im;
  const std::size_t rows = inverse ? a.n : a.modes;
  return ag::add(ag::axis_map(im, axis, mr, rows), ag::axis_map(re, axis, mi, rows));
}

void check_model_grid(const GridSpec& grid, const ModelContext& ctx) {
  if (grid.ndim() != ctx.grid.ndim())
    throw ShapeError("model built for a " + std::to_string(ctx.grid.ndim()) + "D grid received a " +
                     std::to_string(grid.ndim()) + "D grid");
}

}  // namespace

// ------------------------------------------------------------------ FNO

std::size_t fno_param_count(std::size_t in_total, std::size_t out, std::size_t width, std::size_t depth,
                            std::size_t k_max, std::size_t proj_width, std::size_t ndim) {
  const std::size_t M = spectral_modes(ndim, k_max), w = width, P = proj_width;
  return in_total * w + w + depth * (2 * M * w * w + w * w + w) + w * P + P + P * out + out;
}

Fno::Fno(nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : Model("fno", std::move(options), std::move(ctx), seed) {
  const std::size_t w = opt("width"), k = opt("modes"), nd = ctx_.grid.ndim();
  if (k == 0) throw ConfigError("fno needs at least one retained mode");
  for (std::size_t n : ctx_.grid.shape)
    if (2 * k > n)
      throw ConfigError("fno modes=" + std::to_string(k) + " needs resolution >= " + std::to_string(2 * k) +
                        ", got " + std::to_string(n));
  const std::size_t M = spectral_modes(nd, k);
  lift_ = add_linear("lift", lifted_channels(), w);
  for (std::size_t l = 0; l < opt("depth"); ++l) {
    const std::string n = "layer" + std::to_string(l);
    Layer layer;
    layer.w_re = add_uniform(n + ".spec_re", {M, w, w}, 1.0 / double(w));
    layer.w_im = add_uniform(n + ".spec_im", {M, w, w}, 1.0 / double(w));
    layer.bypass = add_linear(n + ".bypass", w, w);
    layers_.push_back(layer);
  }
  proj_ = add_mlp("proj", {w, opt("proj_width"), ctx_.out_channels});
}

Tensor Fno::forward(const Tensor& x, const GridSpec& grid) const {
  check_model_grid(grid, ctx_);
  check_batch(x, grid, ctx_.in_channels);
  const std::size_t k = opt("modes");
  Tensor h = lift_(append_coordinates(x, grid));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    h = ag::add(spectral_conv(h, grid, k, L.w_re, L.w_im), L.bypass(h));
    if (l + 1 < layers_.size()) h = ag::gelu(h);
  }
  return proj_(h);
}

// ------------------------------------------------------------------ WNO

namespace {

Tensor pad_axes(const Tensor& x, std::size_t ndim, std::size_t target) {
  if (ndim == 2) return ag::pad_hw(x, target - x.dim(1), target - x.dim(2));
  Tensor t = ag::reshape(x, {x.dim(0), x.dim(1), 1, x.dim(2)});
  t = ag::pad_hw(t, target - x.dim(1), 0);
  return ag::reshape(t, {x.dim(0), target, x.dim(2)});
}

Tensor crop_axes(const Tensor& x, std::size_t ndim, const GridSpec& grid) {
  if (ndim == 2) return ag::crop_hw(x, grid.shape[0], grid.shape[1]);
  Tensor t = ag::reshape(x, {x.dim(0), x.dim(1), 1, x.dim(2)});
  t = ag::crop_hw(t, grid.shape[0], 1);
  return ag::reshape(t, {x.dim(0), grid.shape[0], x.dim(2)});
}

}  // namespace

Wno::Wno(nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : Model("wno", std::move(options), std::move(ctx), seed) {
  const std::size_t w = opt("width"), L = opt("levels"), nd = ctx_.grid.ndim();
  if (L == 0) throw ConfigError("wno needs at least one wavelet level");
  if (nd == 2 && ctx_.grid.shape[0] != ctx_.grid.shape[1]) throw ConfigError("wno needs a square grid");
  const std::size_t m = std::size_t(1) << L;
  const std::size_t n = *std::max_element(ctx_.grid.shape.begin(), ctx_.grid.shape.end());
  for (std::size_t a : ctx_.grid.shape)
    if (a % m && options_.at("pad") == "none")
      throw ConfigError("wno with " + std::to_string(L) + " levels needs resolution divisible by " +
                        std::to_string(m) + ", got " + std::to_string(a));
  padded_ = (n + m - 1) / m * m;
  coarse_points_ = nd == 2 ? (padded_ / m) * (padded_ / m) : padded_ / m;
  const std::string details = options_.at("details");
  const std::size_t bands = (std::size_t(1) << nd) - 1;
  lift_ = add_linear("lift", lifted_channels(), w);
  for (std::size_t l = 0; l < opt("depth"); ++l) {
    const std::string name = "layer" + std::to_string(l);
    Layer layer;
    layer.approx = add_uniform(name + ".approx", {coarse_points_, w, w}, 1.0 / double(w));
    if (details != "none")
      for (std::size_t b = 0; b < bands; ++b)
        layer.coarse.push_back(
            add_uniform(name + ".detail" + std::to_string(b), {coarse_points_, w, w}, 1.0 / double(w)));
    if (details == "all")
      for (std::size_t f = 0; f + 1 < L; ++f) layer.finer.push_back(add_linear(name + ".level" + std::to_string(f), w, w));
    layer.bypass = add_linear(name + ".bypass", w, w);
    layers_.push_back(std::move(layer));
  }
  proj_ = add_mlp("proj", {w, 2 * w, ctx_.out_channels});
}

Tensor Wno::forward(const Tensor& x, const GridSpec& grid) const {
  if (grid.shape != ctx_.grid.shape)
    throw ShapeError("wno coefficient weights are tied to the training resolution");
  check_batch(x, grid, ctx_.in_channels);
  const std::size_t nd = grid.ndim(), L = opt("levels"), w = opt("width"), B = x.dim(0);
  const bool padded = std::any_of(grid.shape.begin(), grid.shape.end(), [&](std::size_t a) { return a != padded_; });
  Tensor h = lift_(append_coordinates(x, grid));
  if (padded) h = pad_axes(h, nd, padded_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    HaarPyramid p = haar_forward(h, nd, L);
    const ag::Shape coarse_shape = p.approx.shape();
    auto mix = [&](const Tensor& t, const Tensor& wt) {
      return ag::reshape(ag::mode_mix(ag::reshape(t, {B, coarse_points_, w}), wt), coarse_shape);
    };
    p.approx = mix(p.approx, layer.approx);
    for (std::size_t f = 0; f < L; ++f)
      for (auto& band : p.details[f]) {
        if (f + 1 == L) continue;
        band = layer.finer.empty() ? ag::zeros(band.shape()) : layer.finer[f](band);
      }
    auto& coarsest = p.details[L - 1];
    for (std::size_t b = 0; b < coarsest.size(); ++b)
      coarsest[b] = layer.coarse.empty() ? ag::zeros(coarsest[b].shape()) : mix(coarsest[b], layer.coarse[b]);
    h = ag::add(haar_inverse(p, nd), layer.bypass(h));
    if (l + 1 < layers_.size()) h = ag::gelu(h);
  }
  if (padded) h = crop_axes(h, nd, grid);
  return proj_(h);
}

// ------------------------------------------------------------------ SNO

Complex sno_analysis(const Tensor& x, const GridSpec& grid, std::size_t k_max) {
  const std::size_t B = x.dim(0), C = x.shape().back();
  const double s = 1.0 / double(grid.points());
  if (grid.ndim() == 1) {
    const auto& a = complex_dft_axis(grid.shape[0], k_max);
    return {ag::scale(ag::axis_map(x, 1, a.fwd_re, a.modes), s), ag::scale(ag::axis_map(x, 1, a.fwd_im, a.modes), s)};
  }
  const auto& a0 = complex_dft_axis(grid.shape[0], k_max);
  const auto& a1 = complex_dft_axis(grid.shape[1], k_max);
  Tensor yr = ag::axis_map(x, 2, a1.fwd_re, a1.modes), yi = ag::axis_map(x, 2, a1.fwd_im, a1.modes);
  const ag::Shape flat{B, a0.modes * a1.modes, C};
  return {ag::scale(ag::reshape(complex_re(yr, yi, 1, a0, false), flat), s),
          ag::scale(ag::reshape(complex_im(yr, yi, 1, a0, false), flat), s)};
}

Tensor sno_synthesis(const Complex& z, const GridSpec& grid, std::size_t k_max) {
  const std::size_t B = z.re.dim(0), C = z.re.shape().back();
  const double s = double(grid.points());
  if (grid.ndim() == 1) {
    const auto& a = complex_dft_axis(grid.shape[0], k_max);
    if (z.re.dim(1) != a.modes) throw ShapeError("sno_synthesis: coefficient count does not match k_max");
    return ag::scale(complex_re(z.re, z.im, 1, a, true), s);
  }
  const auto& a0 = complex_dft_axis(grid.shape[0], k_max);
  const auto& a1 = complex_dft_axis(grid.shape[1], k_max);
  if (z.re.dim(1) != a0.modes * a1.modes) throw ShapeError("sno_synthesis: coefficient count does not match k_max");
  const ag::Shape lattice{B, a0.modes, a1.modes, C};
  Tensor zr = ag::reshape(z.re, lattice), zi = ag::reshape(z.im, lattice);
  Tensor pr = complex_re(zr, zi, 1, a0, true), pi = complex_im(zr, zi, 1, a0, true);
  return ag::scale(complex_re(pr, pi, 2, a1, true), s);
}

Sno::Sno(nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : Model("sno", std::move(options), std::move(ctx), seed) {
  const std::size_t k = opt("modes"), nd = ctx_.grid.ndim(), w = opt("width");
  for (std::size_t n : ctx_.grid.shape)
    if (2 * k > n)
      throw ConfigError("sno truncation k_max=" + std::to_string(k) + " exceeds the bandwidth of a " +
                        std::to_string(n) + "-point axis");
  const std::size_t M = nd == 2 ? (2 * k + 1) * (2 * k + 1) : 2 * k + 1;
  std::vector<std::size_t> dims{M * ctx_.in_channels};
  for (std::size_t i = 0; i < opt("depth"); ++i) dims.push_back(w);
  dims.push_back(M * ctx_.out_channels);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::string n = "clinear" + std::to_string(i);
    const double bound = 1.0 / std::sqrt(double(dims[i]));
    layers_.push_back({add_uniform(n + ".wr", {dims[i], dims[i + 1]}, bound),
                       add_uniform(n + ".wi", {dims[i], dims[i + 1]}, bound),
                       add_uniform(n + ".br", {dims[i + 1]}, bound), add_uniform(n + ".bi", {dims[i + 1]}, bound)});
    if (i + 2 < dims.size()) act_bias_.push_back(add_zeros(n + ".act", {dims[i + 1]}));
  }
}

Complex Sno::coefficient_map(const Complex& z) const {
  const std::size_t B = z.re.dim(0), M = z.re.dim(1);
  Tensor re = ag::reshape(z.re, {B, M * z.re.dim(2)}), im = ag::reshape(z.im, {B, M * z.im.dim(2)});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& L = layers_[i];
    Tensor r = ag::add_bias(ag::sub(ag::matmul(re, L.wr), ag::matmul(im, L.wi)), L.br);
    Tensor m = ag::add_bias(ag::add(ag::matmul(re, L.wi), ag::matmul(im, L.wr)), L.bi);
    if (i < act_bias_.size()) {
      Tensor mag = ag::sqrt(ag::add_scalar(ag::add(ag::square(r), ag::square(m)), 1e-12));
      Tensor gain = ag::div(ag::relu(ag::add_bias(mag, act_bias_[i])), mag);
      r = ag::mul(r, gain);
      m = ag::mul(m, gain);
    }
    re = r;
    im = m;
  }
  return {ag::reshape(re, {B, M, ctx_.out_channels}), ag::reshape(im, {B, M, ctx_.out_channels})};
}

Tensor Sno::forward_to(const Tensor& x, const GridSpec& in_grid, const GridSpec& out_grid) const {
  check_model_grid(in_grid, ctx_);
  check_model_grid(out_grid, ctx_);
  check_batch(x, in_grid, ctx_.in_channels);
  const std::size_t k = opt("modes");
  return sno_synthesis(coefficient_map(sno_analysis(x, in_grid, k)), out_grid, k);
}

Tensor Sno::forward(const Tensor& x, const GridSpec& grid) const { return forward_to(x, grid, grid); }

}  // namespace opbench::zoo

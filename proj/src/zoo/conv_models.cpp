#include <cmath>

#include "opbench/errors.hpp"
#include "opbench/zoo/families.hpp"

namespace opbench::zoo {

using ag::Tensor;

namespace {

Tensor to_image(const Tensor& x, std::size_t ndim) {
  if (ndim == 2) return x;
  return ag::reshape(x, {x.dim(0), x.dim(1), 1, x.dim(2)});
}

Tensor from_image(const Tensor& x, std::size_t ndim) {
  if (ndim == 2) return x;
  return ag::reshape(x, {x.dim(0), x.dim(1), x.dim(3)});
}

Tensor conv(const Tensor& x, const Tensor& k, const Tensor& b) { return ag::add_bias(ag::conv2d(x, k), b); }

MatrixPtr pool_matrix(std::size_t n) {
  std::vector<double> m(n / 2 * n, 0.0);
  for (std::size_t i = 0; i < n / 2; ++i) m[i * n + 2 * i] = m[i * n + 2 * i + 1] = 0.5;
  return std::make_shared<const std::vector<double>>(std::move(m));
}

MatrixPtr upsample_matrix(std::size_t n) {
  std::vector<double> m(2 * n * n, 0.0);
  for (std::size_t i = 0; i < 2 * n; ++i) m[i * n + i / 2] = 1.0;
  return std::make_shared<const std::vector<double>>(std::move(m));
}

Tensor pool(const Tensor& x, std::size_t ndim) {
  Tensor h = ag::axis_map(x, 1, pool_matrix(x.dim(1)), x.dim(1) / 2);
  if (ndim == 2) h = ag::axis_map(h, 2, pool_matrix(x.dim(2)), x.dim(2) / 2);
  return h;
}

Tensor upsample(const Tensor& x, std::size_t ndim) {
  Tensor h = ag::axis_map(x, 1, upsample_matrix(x.dim(1)), 2 * x.dim(1));
  if (ndim == 2) h = ag::axis_map(h, 2, upsample_matrix(x.dim(2)), 2 * x.dim(2));
  return h;
}

ag::Shape kernel_shape(std::size_t ndim, std::size_t in, std::size_t out) {
  return ndim == 2 ? ag::Shape{3, 3, in, out} : ag::Shape{3, 1, in, out};
}

double kernel_bound(std::size_t ndim, std::size_t in) { return 1.0 / std::sqrt(double(in * (ndim == 2 ? 9 : 3))); }

}  // namespace

// ------------------------------------------------------------------ FNN

Fnn::Fnn(nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : Model("fnn", std::move(options), std::move(ctx), seed) {
  std::vector<std::size_t> dims{lifted_channels()};
  const std::size_t depth = opt("depth");
  for (std::size_t i = 0; i < depth; ++i) dims.push_back(opt("width"));
  dims.push_back(ctx_.out_channels);
  net_ = add_mlp("mlp", dims);
}

Tensor Fnn::forward(const Tensor& x, const GridSpec& grid) const {
  check_batch(x, grid, ctx_.in_channels);
  const std::size_t B = x.dim(0);
  Tensor h = ag::reshape(append_coordinates(x, grid), {B * grid.points(), lifted_channels()});
  return ag::reshape(net_(h), batch_shape(grid, B, ctx_.out_channels));
}

// ------------------------------------------------------------------ ResNet

ResNet::ResNet(nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : Model("resnet", std::move(options), std::move(ctx), seed) {
  const std::size_t nd = ctx_.grid.ndim(), w = opt("width");
  stem_ = {add_uniform("stem.k", kernel_shape(nd, lifted_channels(), w), kernel_bound(nd, lifted_channels())),
           add_uniform("stem.b", {w}, kernel_bound(nd, lifted_channels()))};
  for (std::size_t i = 0; i < opt("depth"); ++i) {
    const std::string n = "block" + std::to_string(i);
    Conv a{add_uniform(n + ".a.k", kernel_shape(nd, w, w), kernel_bound(nd, w)),
           add_uniform(n + ".a.b", {w}, kernel_bound(nd, w))};
    Conv b{add_uniform(n + ".b.k", kernel_shape(nd, w, w), kernel_bound(nd, w)),
           add_uniform(n + ".b.b", {w}, kernel_bound(nd, w))};
    blocks_.emplace_back(a, b);
  }
  const double hb = 1.0 / std::sqrt(double(w));
  head_ = {add_uniform("head.k", {1, 1, w, ctx_.out_channels}, hb), add_uniform("head.b", {ctx_.out_channels}, hb)};
}

Tensor ResNet::forward(const Tensor& x, const GridSpec& grid) const {
  check_batch(x, grid, ctx_.in_channels);
  const std::size_t nd = grid.ndim();
  Tensor h = conv(to_image(append_coordinates(x, grid), nd), stem_.k, stem_.b);
  for (const auto& [a, b] : blocks_) h = ag::add(h, conv(ag::gelu(conv(h, a.k, a.b)), b.k, b.b));
  return from_image(conv(h, head_.k, head_.b), nd);
}

// ------------------------------------------------------------------ UNet

UNet::UNet(nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : UNet("unet", std::move(options), std::move(ctx), seed) {}

UNet::UNet(std::string family, nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : Model(std::move(family), std::move(options), std::move(ctx), seed) {
  build();
}

UNet::DoubleConv UNet::double_conv(const std::string& name, std::size_t in, std::size_t out) {
  const std::size_t nd = ctx_.grid.ndim();
  DoubleConv d;
  d.k1 = add_uniform(name + ".k1", kernel_shape(nd, in, out), kernel_bound(nd, in));
  d.b1 = add_uniform(name + ".b1", {out}, kernel_bound(nd, in));
  d.k2 = add_uniform(name + ".k2", kernel_shape(nd, out, out), kernel_bound(nd, out));
  d.b2 = add_uniform(name + ".b2", {out}, kernel_bound(nd, out));
  return d;
}

void UNet::build() {
  const std::size_t w = opt("width"), L = opt("levels");
  down_.push_back(double_conv("down0", lifted_channels(), w));
  for (std::size_t l = 1; l <= L; ++l)
    down_.push_back(double_conv("down" + std::to_string(l), w << (l - 1), w << l));
  up_.resize(L);
  for (std::size_t l = L; l-- > 0;) up_[l] = double_conv("up" + std::to_string(l), (w << (l + 1)) + (w << l), w << l);
  const double hb = 1.0 / std::sqrt(double(w));
  head_w_ = add_uniform("head.w", {w, ctx_.out_channels}, hb);
  head_b_ = add_uniform("head.b", {ctx_.out_channels}, hb);
}

Tensor UNet::forward(const Tensor& x, const GridSpec& grid) const {
  check_batch(x, grid, ctx_.in_channels);
  const std::size_t nd = grid.ndim(), L = opt("levels"), m = std::size_t(1) << L;
  Tensor h = to_image(append_coordinates(x, grid), nd);
  const std::size_t H = h.dim(1), W = h.dim(2);
  const std::size_t Hp = (H + m - 1) / m * m, Wp = nd == 2 ? (W + m - 1) / m * m : W;
  if (Hp != H || Wp != W) {
    if (options_.at("pad") == "none")
      throw ShapeError("unet with " + std::to_string(L) + " levels needs each axis divisible by " +
                       std::to_string(m) + "; resolution " + std::to_string(H) + " requires padding to " +
                       std::to_string(Hp) + " (set pad=auto)");
    h = ag::pad_hw(h, Hp - H, Wp - W);
  }
  auto dc = [](const DoubleConv& d, const Tensor& t) {
    return ag::gelu(conv(ag::gelu(conv(t, d.k1, d.b1)), d.k2, d.b2));
  };
  std::vector<Tensor> skips{dc(down_[0], h)};
  for (std::size_t l = 1; l <= L; ++l) skips.push_back(dc(down_[l], pool(skips.back(), nd)));
  h = skips[L];
  for (std::size_t l = L; l-- > 0;) h = dc(up_[l], ag::concat_last({upsample(h, nd), skips[l]}));
  h = ag::add_bias(ag::matmul(h, head_w_), head_b_);
  if (Hp != H || Wp != W) h = ag::crop_hw(h, H, W);
  return from_image(h, nd);
}

// ------------------------------------------------------------------ cGAN

CGan::CGan(nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : UNet("cgan", std::move(options), std::move(ctx), seed) {
  const std::size_t nd = ctx_.grid.ndim(), dw = opt("disc_width");
  const std::size_t in = ctx_.in_channels + ctx_.out_channels + nd;
  d1_k_ = add_uniform("disc.1.k", kernel_shape(nd, in, dw), kernel_bound(nd, in), 1);
  d1_b_ = add_uniform("disc.1.b", {dw}, kernel_bound(nd, in), 1);
  d2_k_ = add_uniform("disc.2.k", kernel_shape(nd, dw, dw), kernel_bound(nd, dw), 1);
  d2_b_ = add_uniform("disc.2.b", {dw}, kernel_bound(nd, dw), 1);
  d3_w_ = add_uniform("disc.3.w", {dw, 1}, 1.0 / std::sqrt(double(dw)), 1);
  d3_b_ = add_uniform("disc.3.b", {1}, 1.0 / std::sqrt(double(dw)), 1);
}

Tensor CGan::discriminate(const Tensor& cond, const Tensor& out, const GridSpec& grid) const {
  check_batch(cond, grid, ctx_.in_channels);
  check_batch(out, grid, ctx_.out_channels);
  const std::size_t nd = grid.ndim();
  Tensor h = to_image(append_coordinates(ag::concat_last({cond, out}), grid), nd);
  h = ag::gelu(conv(h, d1_k_, d1_b_));
  h = ag::gelu(conv(h, d2_k_, d2_b_));
  return ag::add_bias(ag::matmul(h, d3_w_), d3_b_);
}

CganLosses cgan_losses(const CGan& m, const Tensor& x, const Tensor& y, const GridSpec& grid,
                       const std::function<Tensor(const Tensor&)>& to_loss_space) {
  CganLosses l;
  const Tensor g = m.forward(x, grid);
  l.reconstruction = to_loss_space ? ag::rel_l2_loss(to_loss_space(g), to_loss_space(y)) : ag::rel_l2_loss(g, y);
  l.adversarial = ag::bce_logits(m.discriminate(x, g, grid), 1.0);
  l.generator = ag::add(l.reconstruction, ag::scale(l.adversarial, m.lambda_adv()));
  const Tensor fake = ag::constant(g.shape(), g.value());
  l.discriminator = ag::scale(
      ag::add(ag::bce_logits(m.discriminate(x, y, grid), 1.0), ag::bce_logits(m.discriminate(x, fake, grid), 0.0)),
      0.5);
  return l;
}

}  // namespace opbench::zoo

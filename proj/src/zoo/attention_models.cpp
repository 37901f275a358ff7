#include <cmath>
#include <numbers>

#include "opbench/errors.hpp"
#include "opbench/zoo/families.hpp"

namespace opbench::zoo {

using ag::Tensor;

Tensor random_fourier_features(const Tensor& coords, const Tensor& projection) {
  Tensor z = ag::scale(ag::matmul(coords, projection), 2.0 * std::numbers::pi);
  return ag::concat_last({ag::cos(z), ag::sin(z)});
}

Tensor Attention::operator()(const Tensor& query, const Tensor& context) const {
  Tensor qh = split_heads(q(query), heads);
  Tensor kh = split_heads(k(context), heads);
  Tensor vh = split_heads(v(context), heads);
  Tensor a = linear ? linear_attention(qh, kh, vh) : softmax_attention(qh, kh, vh);
  return o(merge_heads(a, heads));
}

namespace {

Attention make_attention(std::size_t heads, bool linear, Linear q, Linear k, Linear v, Linear o) {
  Attention a;
  a.heads = heads;
  a.linear = linear;
  a.q = std::move(q);
  a.k = std::move(k);
  a.v = std::move(v);
  a.o = std::move(o);
  return a;
}

Tensor flat_inputs(const Tensor& x, const GridSpec& grid) {
  return ag::reshape(x, {x.dim(0), grid.points(), x.shape().back()});
}

}  // namespace

// ------------------------------------------------------------------ OFormer

OFormer::OFormer(nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : Model("oformer", std::move(options), std::move(ctx), seed) {
  const std::size_t w = opt("width"), h = opt("heads"), m = opt("rff"), nd = ctx_.grid.ndim();
  if (h == 0 || w % h) throw ConfigError("oformer width must be divisible by heads");
  const double ratio = options_.at("rollout_ratio").get<double>();
  if (ratio > 0.0) {
    if (!ctx_.time_dependent || ctx_.stored_steps == 0)
      throw ConfigError("oformer rollout requested on a time-independent dataset");
    steps_ = std::max<std::size_t>(1, std::size_t(std::lround(ratio * double(ctx_.stored_steps))));
  }
  std::vector<double> proj(nd * m);
  const double s = options_.at("rff_scale").get<double>();
  for (auto& v : proj) v = s * rng().normal();
  add_buffer("rff.proj", {nd, m}, std::move(proj));
  embed_ = add_linear("embed", ctx_.in_channels + 2 * m, w);
  query_embed_ = add_linear("query_embed", 2 * m, w);
  latents_ = add_uniform("latents", {opt("latents"), w}, 1.0 / std::sqrt(double(w)));
  auto attention = [&](const std::string& n) {
    return make_attention(h, false, add_linear(n + ".q", w, w), add_linear(n + ".k", w, w), add_linear(n + ".v", w, w),
                          add_linear(n + ".o", w, w));
  };
  encode_ = attention("encode");
  for (std::size_t i = 0; i < opt("depth"); ++i) {
    const std::string n = "block" + std::to_string(i);
    Attention a = attention(n + ".attn");
    blocks_.emplace_back(std::move(a), add_mlp(n + ".mlp", {w, 2 * w, w}));
  }
  propagate_ = add_mlp("propagate", {w, 2 * w, w});
  decode_ = attention("decode");
  head_ = add_mlp("head", {w, w, ctx_.out_channels});
}

std::vector<Tensor> OFormer::forward_rollout(const Tensor& x, const GridSpec& grid) const {
  if (grid.ndim() != ctx_.grid.ndim()) throw ShapeError("oformer: grid dimension mismatch");
  check_batch(x, grid, ctx_.in_channels);
  const std::size_t B = x.dim(0);
  Tensor coords = ag::constant({grid.points(), grid.ndim()}, unit_coordinates(grid));
  Tensor feats = ag::repeat_leading(random_fourier_features(coords, param("rff.proj").value), B);
  Tensor tokens = ag::normalize_last(embed_(ag::concat_last({flat_inputs(x, grid), feats})));
  Tensor z = ag::repeat_leading(latents_, B);
  z = ag::add(z, encode_(ag::normalize_last(z), tokens));
  for (const auto& [attn, mlp] : blocks_) {
    Tensor n = ag::normalize_last(z);
    z = ag::add(z, attn(n, n));
    z = ag::add(z, mlp(ag::normalize_last(z)));
  }
  Tensor queries = query_embed_(feats);
  std::vector<Tensor> out;
  for (std::size_t s = 0; s < steps_; ++s) {
    z = ag::add(z, propagate_(ag::normalize_last(z)));
    Tensor h = ag::add(queries, decode_(queries, ag::normalize_last(z)));
    out.push_back(ag::reshape(head_(h), batch_shape(grid, B, ctx_.out_channels)));
  }
  return out;
}

Tensor OFormer::forward(const Tensor& x, const GridSpec& grid) const { return forward_rollout(x, grid).back(); }

// ------------------------------------------------------------------ GNOT

Tensor MixtureOfExperts::weights(const Tensor& coords) const { return ag::softmax_last(gate(coords)); }

Tensor MixtureOfExperts::operator()(const Tensor& h, const Tensor& coords) const {
  const Tensor g = weights(coords);
  const std::size_t n = h.dim(0);
  Tensor out;
  for (std::size_t e = 0; e < experts.size(); ++e) {
    Tensor term = ag::mul_rows(experts[e](h), ag::reshape(ag::slice_last(g, e, e + 1), {n}));
    out = out.defined() ? ag::add(out, term) : term;
  }
  return out;
}

Gnot::Gnot(nlohmann::json options, ModelContext ctx, std::uint64_t seed)
    : Model("gnot", std::move(options), std::move(ctx), seed) {
  const std::size_t w = opt("width"), h = opt("heads"), E = opt("experts"), nd = ctx_.grid.ndim();
  if (E < 1) throw ConfigError("gnot needs at least one expert (E >= 1)");
  if (h == 0 || w % h) throw ConfigError("gnot width must be divisible by heads");
  input_embed_ = add_mlp("input_embed", {lifted_channels(), w, w});
  query_embed_ = add_mlp("query_embed", {nd, w, w});
  auto attention = [&](const std::string& n) {
    return make_attention(h, true, add_linear(n + ".q", w, w), add_linear(n + ".k", w, w), add_linear(n + ".v", w, w),
                          add_linear(n + ".o", w, w));
  };
  auto mixture = [&](const std::string& n) {
    MixtureOfExperts m;
    m.gate = add_linear(n + ".gate", nd, E);
    for (std::size_t e = 0; e < E; ++e) m.experts.push_back(add_mlp(n + ".expert" + std::to_string(e), {w, 2 * w, w}));
    return m;
  };
  for (std::size_t l = 0; l < opt("depth"); ++l) {
    const std::string n = "layer" + std::to_string(l);
    cross_.push_back(attention(n + ".cross"));
    moe_.push_back(mixture(n + ".moe_cross"));
    self_.push_back(attention(n + ".self"));
    moe_.push_back(mixture(n + ".moe_self"));
  }
  head_ = add_mlp("head", {w, w, ctx_.out_channels});
}

Tensor Gnot::forward(const Tensor& x, const GridSpec& grid) const {
  if (grid.ndim() != ctx_.grid.ndim()) throw ShapeError("gnot: grid dimension mismatch");
  check_batch(x, grid, ctx_.in_channels);
  const std::size_t B = x.dim(0), P = grid.points(), w = opt("width"), nd = grid.ndim();
  Tensor coords = ag::repeat_leading(ag::constant({P, nd}, unit_coordinates(grid)), B);
  Tensor flat_coords = ag::reshape(coords, {B * P, nd});
  Tensor inputs = ag::normalize_last(input_embed_(ag::concat_last({flat_inputs(x, grid), coords})));
  Tensor q = query_embed_(coords);
  auto moe = [&](const MixtureOfExperts& m, const Tensor& t) {
    return ag::reshape(m(ag::reshape(ag::normalize_last(t), {B * P, w}), flat_coords), {B, P, w});
  };
  for (std::size_t l = 0; l < cross_.size(); ++l) {
    q = ag::add(q, cross_[l](ag::normalize_last(q), inputs));
    q = ag::add(q, moe(moe_[2 * l], q));
    Tensor n = ag::normalize_last(q);
    q = ag::add(q, self_[l](n, n));
    q = ag::add(q, moe(moe_[2 * l + 1], q));
  }
  return ag::reshape(head_(q), batch_shape(grid, B, ctx_.out_channels));
}

}  // namespace opbench::zoo

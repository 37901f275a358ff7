#pragma once

#include <functional>
#include <vector>

#include "opbench/zoo/model.hpp"

namespace opbench::zoo {

/// Pointwise multilayer perceptron over [inputs, coordinates].
class Fnn : public Model {
 public:
  Fnn(nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  ag::Tensor forward(const ag::Tensor& x, const GridSpec& grid) const override;

 private:
  Mlp net_;
};

/// Conv stem, residual blocks x + conv(gelu(conv(x))), pointwise head.
class ResNet : public Model {
 public:
  ResNet(nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  ag::Tensor forward(const ag::Tensor& x, const GridSpec& grid) const override;

 private:
  struct Conv {
    ag::Tensor k, b;
  };
  Conv stem_, head_;
  std::vector<std::pair<Conv, Conv>> blocks_;
};

/// Encoder-decoder with average pooling, nearest upsampling and skip concatenation.
class UNet : public Model {
 public:
  UNet(nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  ag::Tensor forward(const ag::Tensor& x, const GridSpec& grid) const override;

 protected:
  UNet(std::string family, nlohmann::json options, ModelContext ctx, std::uint64_t seed);

 private:
  struct DoubleConv {
    ag::Tensor k1, b1, k2, b2;
  };
  DoubleConv double_conv(const std::string& name, std::size_t in, std::size_t out);
  void build();

  std::vector<DoubleConv> down_, up_;
  ag::Tensor head_w_, head_b_;
};

/// UNet generator plus a patch discriminator on (condition, output) pairs.
class CGan : public UNet {
 public:
  CGan(nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  bool adversarial() const override { return true; }
  ag::Tensor discriminate(const ag::Tensor& cond, const ag::Tensor& out, const GridSpec& grid) const override;
  double lambda_adv() const { return options_.at("lambda_adv").get<double>(); }

 private:
  ag::Tensor d1_k_, d1_b_, d2_k_, d2_b_, d3_w_, d3_b_;
};

struct CganLosses {
  ag::Tensor reconstruction, adversarial, generator, discriminator;
};
/// Generator loss = relative L2 + lambda * BCE(D(x, G(x)), real); discriminator
/// loss = (BCE(D(x, y), real) + BCE(D(x, G(x)), fake)) / 2 with G(x) detached.
/// `to_loss_space` maps prediction and target before the relative L2 term.
CganLosses cgan_losses(const CGan& m, const ag::Tensor& x, const ag::Tensor& y, const GridSpec& grid,
                       const std::function<ag::Tensor(const ag::Tensor&)>& to_loss_space = {});

/// Lifting, spectral layers with pointwise bypass, two-layer projection.
class Fno : public Model {
 public:
  Fno(nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  ag::Tensor forward(const ag::Tensor& x, const GridSpec& grid) const override;

 private:
  struct Layer {
    ag::Tensor w_re, w_im;
    Linear bypass;
  };
  Linear lift_;
  std::vector<Layer> layers_;
  Mlp proj_;
};

/// Closed-form trainable parameter count of an Fno.
std::size_t fno_param_count(std::size_t in_total, std::size_t out, std::size_t width, std::size_t depth,
                            std::size_t k_max, std::size_t proj_width, std::size_t ndim);

/// Haar-domain layers: learned per-coefficient channel mixing of the coarsest
/// approximation (and coarsest details), pointwise bypass.
class Wno : public Model {
 public:
  Wno(nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  ag::Tensor forward(const ag::Tensor& x, const GridSpec& grid) const override;

 private:
  struct Layer {
    ag::Tensor approx;
    std::vector<ag::Tensor> coarse;
    std::vector<Linear> finer;
    Linear bypass;
  };
  std::size_t padded_ = 0, coarse_points_ = 0;
  Linear lift_;
  std::vector<Layer> layers_;
  Mlp proj_;
};

/// Fourier coefficients c_k = (1/R) sum_x u(x) exp(-2 pi i k.x) over the
/// lattice |k_a| <= k_max, flattened to [B, (2 k_max + 1)^d, C].
Complex sno_analysis(const ag::Tensor& x, const GridSpec& grid, std::size_t k_max);
/// Real part of sum_k c_k exp(2 pi i k.x) on `grid`.
ag::Tensor sno_synthesis(const Complex& z, const GridSpec& grid, std::size_t k_max);

/// Coefficient-space network: analysis, complex feed-forward map with modReLU,
/// synthesis. Sees function values only.
class Sno : public Model {
 public:
  Sno(nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  ag::Tensor forward(const ag::Tensor& x, const GridSpec& grid) const override;
  /// Prediction synthesized on `out_grid` from inputs sampled on `in_grid`.
  ag::Tensor forward_to(const ag::Tensor& x, const GridSpec& in_grid, const GridSpec& out_grid) const;
  Complex coefficient_map(const Complex& z) const;

 private:
  struct CLinear {
    ag::Tensor wr, wi, br, bi;
  };
  std::vector<CLinear> layers_;
  std::vector<ag::Tensor> act_bias_;
};

/// Branch MLP on inputs interpolated to a fixed sensor lattice, trunk MLP on
/// query coordinates, per-channel inner product of p features plus bias.
class DeepONet : public Model {
 public:
  DeepONet(nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  ag::Tensor forward(const ag::Tensor& x, const GridSpec& grid) const override;
  /// sensors [B, S^d * C_in], queries [Q, ndim] in the unit box -> [B, Q, C_out].
  ag::Tensor forward_sensors(const ag::Tensor& sensors, const ag::Tensor& queries) const;
  std::size_t sensor_values() const;

 private:
  Mlp branch_, trunk_;
  ag::Tensor bias_;
};

/// Samples [B, spatial..., C] at S sensors per axis -> [B, S^d * C].
ag::Tensor sensor_samples(const ag::Tensor& x, const GridSpec& grid, std::size_t sensors);
/// out[b, q, c] = sum_k branch[b, c p + k] trunk[q, c p + k] + bias[c].
ag::Tensor deeponet_combine(const ag::Tensor& branch, const ag::Tensor& trunk, const ag::Tensor& bias,
                            std::size_t p);

struct PodBasis {
  std::vector<double> mean;         // [n]
  std::vector<double> modes;        // [p, n], row k is mode k
  std::vector<double> singular;     // all singular values, descending
  std::size_t n = 0, p = 0;
};
/// Leading left singular vectors of the mean-centered snapshot matrix. Each
/// mode's largest-magnitude entry is positive.
PodBasis compute_pod_basis(const std::vector<const std::vector<double>*>& outputs, std::size_t p);
/// Smallest mode count whose squared singular values reach `energy` of the total.
std::size_t pod_energy_modes(const PodBasis& b, double energy);

/// Branch MLP producing coefficients of a fixed POD basis plus its mean.
class PodDeepONet : public Model {
 public:
  PodDeepONet(nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  ag::Tensor forward(const ag::Tensor& x, const GridSpec& grid) const override;
  void prepare(const std::vector<const std::vector<double>*>& train_outputs) override;
  /// mean + sum_k b_k phi_k for coefficients [B, p].
  ag::Tensor predict_from_coefficients(const ag::Tensor& b) const;
  std::size_t active_modes() const;

 private:
  Mlp branch_;
};

/// Random Fourier features [cos(2 pi c B), sin(2 pi c B)] of coordinates c [n, d]
/// with projection B [d, m].
ag::Tensor random_fourier_features(const ag::Tensor& coords, const ag::Tensor& projection);

struct Attention {
  std::size_t heads = 1;
  Linear q, k, v, o;
  bool linear = false;
  /// Multi-head attention from query tokens [B, n, w] to context tokens [B, m, w].
  ag::Tensor operator()(const ag::Tensor& query, const ag::Tensor& context) const;
};

/// Latent-query transformer: encoder cross-attention onto learned latents,
/// latent self-attention, r latent propagation steps, coordinate-query decoder.
class OFormer : public Model {
 public:
  OFormer(nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  ag::Tensor forward(const ag::Tensor& x, const GridSpec& grid) const override;
  std::vector<ag::Tensor> forward_rollout(const ag::Tensor& x, const GridSpec& grid) const override;
  std::size_t rollout_steps() const override { return steps_; }

 private:
  std::size_t steps_ = 1;
  Linear embed_, query_embed_;
  ag::Tensor latents_;
  Attention encode_, decode_;
  std::vector<std::pair<Attention, Mlp>> blocks_;
  Mlp propagate_, head_;
};

/// Mixture of expert MLPs with a softmax gate conditioned on coordinates.
struct MixtureOfExperts {
  Linear gate;
  std::vector<Mlp> experts;
  /// Gate weights [n, E] for coordinates [n, d].
  ag::Tensor weights(const ag::Tensor& coords) const;
  /// h [n, w], coords [n, d] -> sum_e g_e(coords) expert_e(h).
  ag::Tensor operator()(const ag::Tensor& h, const ag::Tensor& coords) const;
};

/// Normalized linear cross/self attention over coordinate queries, each
/// followed by a coordinate-gated mixture of experts.
class Gnot : public Model {
 public:
  Gnot(nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  ag::Tensor forward(const ag::Tensor& x, const GridSpec& grid) const override;
  const MixtureOfExperts& mixture(std::size_t i) const { return moe_.at(i); }

 private:
  Mlp input_embed_, query_embed_, head_;
  std::vector<Attention> cross_, self_;
  std::vector<MixtureOfExperts> moe_;
};

}  // namespace opbench::zoo

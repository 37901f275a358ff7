#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "opbench/grid/grid.hpp"
#include "opbench/util/random.hpp"
#include "opbench/zoo/autograd.hpp"
#include "opbench/zoo/layers.hpp"

namespace opbench::zoo {

/// Family tag plus family-specific options, e.g.
/// {"family": "fno", "width": 32, "depth": 4, "modes": 12}.
struct ModelSpec {
  std::string family;
  nlohmann::json options = nlohmann::json::object();

  static ModelSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

const std::vector<std::string>& model_families();
/// Families whose parameter count does not depend on the grid and which accept
/// grids other than the training grid.
bool mesh_invariant_family(const std::string& family);

/// Fills defaults; unknown keys or unknown families raise ConfigError.
nlohmann::json resolve_options(const ModelSpec& spec);

/// Facts about the data a model is built for.
struct ModelContext {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  GridSpec grid;
  bool time_dependent = false;
  std::size_t stored_steps = 0;
};

ModelContext context_for(const DatasetBundle& bundle);

struct Param {
  std::string name;
  ag::Tensor value;
  /// 0: main network, 1: adversarial discriminator.
  int group = 0;
};

class Model {
 public:
  Model(std::string family, nlohmann::json options, ModelContext ctx, std::uint64_t seed);
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const std::string& family() const { return family_; }
  const nlohmann::json& options() const { return options_; }
  const ModelContext& context() const { return ctx_; }
  std::uint64_t seed() const { return seed_; }
  ModelSpec spec() const { return {family_, options_}; }

  /// x: [B, spatial..., in_channels] of standardized inputs on `grid`.
  /// Returns [B, spatial..., out_channels].
  virtual ag::Tensor forward(const ag::Tensor& x, const GridSpec& grid) const = 0;

  /// Latent rollout models return one prediction per propagation step; the
  /// last entry equals forward().
  virtual std::vector<ag::Tensor> forward_rollout(const ag::Tensor& x, const GridSpec& grid) const {
    return {forward(x, grid)};
  }
  virtual std::size_t rollout_steps() const { return 1; }

  /// Data-dependent setup from standardized training outputs, one vector per sample.
  virtual void prepare(const std::vector<const std::vector<double>*>& train_outputs) {}

  virtual bool adversarial() const { return false; }
  /// Patch logits for (condition, candidate output) pairs.
  virtual ag::Tensor discriminate(const ag::Tensor& cond, const ag::Tensor& out,
                                  const GridSpec& grid) const;

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  /// Non-trainable state that still belongs to the checkpoint (fixed
  /// projections, bases).
  std::vector<Param>& buffers() { return buffers_; }
  const std::vector<Param>& buffers() const { return buffers_; }
  Param& param(const std::string& name);
  const Param& param(const std::string& name) const;

 protected:
  ag::Tensor add_uniform(const std::string& name, ag::Shape shape, double bound, int group = 0);
  ag::Tensor add_zeros(const std::string& name, ag::Shape shape, int group = 0);
  ag::Tensor add_buffer(const std::string& name, ag::Shape shape, std::vector<double> values);
  Linear add_linear(const std::string& name, std::size_t in, std::size_t out, int group = 0);
  /// dims = {in, hidden..., out}.
  Mlp add_mlp(const std::string& name, const std::vector<std::size_t>& dims, bool final_activation = false,
              int group = 0);
  Rng& rng() { return *rng_; }
  /// Channels fed to the network per point: inputs plus coordinates.
  std::size_t lifted_channels() const { return ctx_.in_channels + ctx_.grid.ndim(); }
  std::size_t opt(const char* key) const { return options_.at(key).get<std::size_t>(); }

  std::string family_;
  nlohmann::json options_;
  ModelContext ctx_;
  std::uint64_t seed_;

 private:
  std::vector<Param> params_;
  std::vector<Param> buffers_;
  std::shared_ptr<Rng> rng_;
};

std::unique_ptr<Model> make_model(const ModelSpec& spec, const ModelContext& ctx, std::uint64_t seed);

/// Fresh instance with every parameter and buffer copied.
std::unique_ptr<Model> clone_model(const Model& m);

/// Copies parameter and buffer values by name; shapes must agree.
void copy_state(const Model& from, Model& to);

/// Trainable scalars over every parameter group.
std::size_t count_params(const Model& m);
std::size_t count_params(const Model& m, int group);

/// FNV-1a over parameter names, shapes and values.
std::string param_hash(const Model& m);

/// Standardized batch tensor [B, spatial..., C] from per-sample point-major arrays.
ag::Tensor batch_tensor(const std::vector<const std::vector<double>*>& samples, const GridSpec& grid,
                        std::size_t channels);

}  // namespace opbench::zoo

#include "opbench/zoo/model.hpp"

#include <cmath>
#include <map>

#include "opbench/errors.hpp"
#include "opbench/util/hash.hpp"
#include "opbench/zoo/families.hpp"

namespace opbench::zoo {

using nlohmann::json;

namespace {

const std::map<std::string, json>& default_options() {
  static const std::map<std::string, json> d = {
      {"fnn", {{"width", 32}, {"depth", 4}}},
      {"resnet", {{"width", 32}, {"depth", 4}}},
      {"unet", {{"width", 16}, {"levels", 2}, {"pad", "auto"}}},
      {"cgan", {{"width", 16}, {"levels", 2}, {"pad", "auto"}, {"disc_width", 16}, {"lambda_adv", 0.01}}},
      {"deeponet",
       {{"width", 64}, {"depth", 3}, {"trunk_width", 64}, {"trunk_depth", 3}, {"p", 32}, {"sensors", 16}}},
      {"pod-deeponet", {{"width", 64}, {"depth", 3}, {"p", 64}, {"energy", 0.99}, {"sensors", 16}}},
      {"fno", {{"width", 32}, {"depth", 4}, {"modes", 12}, {"proj_width", 64}}},
      {"wno", {{"width", 32}, {"depth", 4}, {"levels", 3}, {"details", "coarsest"}, {"pad", "auto"}}},
      {"sno", {{"width", 64}, {"depth", 2}, {"modes", 8}}},
      {"oformer",
       {{"width", 32},
        {"depth", 2},
        {"heads", 4},
        {"latents", 32},
        {"rff", 16},
        {"rff_scale", 1.0},
        {"rollout_ratio", 0.0}}},
      {"gnot", {{"width", 32}, {"depth", 2}, {"heads", 4}, {"experts", 3}}},
  };
  return d;
}

const std::map<std::string, std::vector<std::string>>& string_choices() {
  static const std::map<std::string, std::vector<std::string>> c = {
      {"pad", {"auto", "none"}}, {"details", {"coarsest", "all", "none"}}};
  return c;
}

}  // namespace

ModelSpec ModelSpec::from_json(const json& j) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string())
    throw ConfigError("model spec needs a string 'family'");
  ModelSpec s;
  s.family = j["family"].get<std::string>();
  for (const auto& [k, v] : j.items())
    if (k != "family") s.options[k] = v;
  return s;
}

json ModelSpec::to_json() const {
  json j = options;
  j["family"] = family;
  return j;
}

const std::vector<std::string>& model_families() {
  static const std::vector<std::string> f = {"fnn", "resnet", "unet", "cgan", "deeponet", "pod-deeponet",
                                             "fno", "wno",    "sno",  "oformer", "gnot"};
  return f;
}

bool mesh_invariant_family(const std::string& family) {
  return family == "fno" || family == "sno" || family == "deeponet" || family == "oformer" || family == "gnot";
}

json resolve_options(const ModelSpec& spec) {
  const auto& table = default_options();
  const auto it = table.find(spec.family);
  if (it == table.end()) throw ConfigError("unknown model family '" + spec.family + "'");
  json out = it->second;
  if (!spec.options.is_object()) throw ConfigError("model options must be an object");
  for (const auto& [k, v] : spec.options.items()) {
    if (!out.contains(k)) throw ConfigError("option '" + k + "' is not valid for family '" + spec.family + "'");
    const json& def = out[k];
    if (def.is_string()) {
      if (!v.is_string()) throw ConfigError("option '" + k + "' must be a string");
      const auto& choices = string_choices().at(k);
      if (std::find(choices.begin(), choices.end(), v.get<std::string>()) == choices.end())
        throw ConfigError("option '" + k + "' has unsupported value '" + v.get<std::string>() + "'");
    } else if (def.is_number_float()) {
      if (!v.is_number() || !std::isfinite(v.get<double>()))
        throw ConfigError("option '" + k + "' must be a finite number");
      if (v.get<double>() < 0.0) throw ConfigError("option '" + k + "' must be non-negative");
    } else {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("option '" + k + "' must be a non-negative integer");
    }
    out[k] = def.is_number_float() ? json(v.get<double>()) : v;
  }
  for (const char* positive : {"width", "trunk_width", "p", "heads", "latents", "proj_width", "disc_width"})
    if (out.contains(positive) && out[positive].get<long long>() == 0)
      throw ConfigError(std::string("option '") + positive + "' must be positive");
  return out;
}

ModelContext context_for(const DatasetBundle& bundle) {
  ModelContext c;
  c.in_channels = bundle.in_channels();
  c.out_channels = bundle.out_channels();
  c.grid = bundle.grid;
  if (!bundle.samples.empty() && bundle.samples.front().time) {
    c.time_dependent = true;
    c.stored_steps = bundle.samples.front().trajectory.size() /
                     std::max<std::size_t>(1, bundle.grid.points() * bundle.out_channels());
  }
  return c;
}

Model::Model(std::string family, json options, ModelContext ctx, std::uint64_t seed)
    : family_(std::move(family)),
      options_(std::move(options)),
      ctx_(std::move(ctx)),
      seed_(seed),
      rng_(std::make_shared<Rng>(seed)) {
  ctx_.grid.validate();
  if (ctx_.grid.ndim() < 1 || ctx_.grid.ndim() > 2) throw ConfigError("models support 1D and 2D grids only");
  if (ctx_.in_channels == 0 || ctx_.out_channels == 0) throw ConfigError("models need at least one channel");
}

ag::Tensor Model::discriminate(const ag::Tensor&, const ag::Tensor&, const GridSpec&) const {
  throw ConfigError("family '" + family_ + "' has no discriminator");
}

Param& Model::param(const std::string& name) {
  for (auto* list : {&params_, &buffers_})
    for (auto& p : *list)
      if (p.name == name) return p;
  throw ConfigError("no parameter named '" + name + "'");
}

const Param& Model::param(const std::string& name) const { return const_cast<Model*>(this)->param(name); }

ag::Tensor Model::add_uniform(const std::string& name, ag::Shape shape, double bound, int group) {
  std::vector<double> v(ag::numel(shape));
  for (auto& x : v) x = rng_->uniform(-bound, bound);
  params_.push_back({name, ag::parameter(std::move(shape), std::move(v)), group});
  return params_.back().value;
}

ag::Tensor Model::add_zeros(const std::string& name, ag::Shape shape, int group) {
  const std::size_t n = ag::numel(shape);
  params_.push_back({name, ag::parameter(std::move(shape), std::vector<double>(n, 0.0)), group});
  return params_.back().value;
}

ag::Tensor Model::add_buffer(const std::string& name, ag::Shape shape, std::vector<double> values) {
  buffers_.push_back({name, ag::constant(std::move(shape), std::move(values)), 0});
  return buffers_.back().value;
}

Linear Model::add_linear(const std::string& name, std::size_t in, std::size_t out, int group) {
  const double bound = 1.0 / std::sqrt(double(in));
  Linear l;
  l.w = add_uniform(name + ".w", {in, out}, bound, group);
  l.b = add_uniform(name + ".b", {out}, bound, group);
  return l;
}

Mlp Model::add_mlp(const std::string& name, const std::vector<std::size_t>& dims, bool final_activation,
                   int group) {
  Mlp m;
  m.final_activation = final_activation;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    m.layers.push_back(add_linear(name + "." + std::to_string(i), dims[i], dims[i + 1], group));
  return m;
}

std::unique_ptr<Model> make_model(const ModelSpec& spec, const ModelContext& ctx, std::uint64_t seed) {
  json o = resolve_options(spec);
  const std::string& f = spec.family;
  if (f == "fnn") return std::make_unique<Fnn>(o, ctx, seed);
  if (f == "resnet") return std::make_unique<ResNet>(o, ctx, seed);
  if (f == "unet") return std::make_unique<UNet>(o, ctx, seed);
  if (f == "cgan") return std::make_unique<CGan>(o, ctx, seed);
  if (f == "deeponet") return std::make_unique<DeepONet>(o, ctx, seed);
  if (f == "pod-deeponet") return std::make_unique<PodDeepONet>(o, ctx, seed);
  if (f == "fno") return std::make_unique<Fno>(o, ctx, seed);
  if (f == "wno") return std::make_unique<Wno>(o, ctx, seed);
  if (f == "sno") return std::make_unique<Sno>(o, ctx, seed);
  if (f == "oformer") return std::make_unique<OFormer>(o, ctx, seed);
  return std::make_unique<Gnot>(o, ctx, seed);
}

void copy_state(const Model& from, Model& to) {
  auto copy_list = [](const std::vector<Param>& src, std::vector<Param>& dst) {
    if (src.size() != dst.size()) throw ShapeError("checkpoint parameter lists differ in length");
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i].name != dst[i].name || src[i].value.shape() != dst[i].value.shape())
        throw ShapeError("checkpoint entry '" + src[i].name + "' does not match '" + dst[i].name + "'");
      dst[i].value.mutable_value() = src[i].value.value();
    }
  };
  copy_list(from.params(), to.params());
  copy_list(from.buffers(), to.buffers());
}

std::unique_ptr<Model> clone_model(const Model& m) {
  auto c = make_model(m.spec(), m.context(), m.seed());
  copy_state(m, *c);
  return c;
}

std::size_t count_params(const Model& m) {
  std::size_t n = 0;
  for (const auto& p : m.params()) n += p.value.size();
  return n;
}

std::size_t count_params(const Model& m, int group) {
  std::size_t n = 0;
  for (const auto& p : m.params())
    if (p.group == group) n += p.value.size();
  return n;
}

std::string param_hash(const Model& m) {
  Fnv1a64 h;
  for (const auto* list : {&m.params(), &m.buffers()})
    for (const auto& p : *list) {
      h.update(p.name);
      h.update(ag::shape_str(p.value.shape()));
      h.update(std::span<const double>(p.value.value()));
    }
  return h.hex();
}

ag::Tensor batch_tensor(const std::vector<const std::vector<double>*>& samples, const GridSpec& grid,
                        std::size_t channels) {
  const std::size_t per = grid.points() * channels;
  std::vector<double> v;
  v.reserve(samples.size() * per);
  for (const auto* s : samples) {
    if (s->size() != per)
      throw ShapeError("sample holds " + std::to_string(s->size()) + " values, grid expects " +
                       std::to_string(per));
    v.insert(v.end(), s->begin(), s->end());
  }
  return ag::constant(batch_shape(grid, samples.size(), channels), std::move(v));
}

}  // namespace opbench::zoo

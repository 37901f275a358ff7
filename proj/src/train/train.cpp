#include "opbench/train/train.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include "opbench/errors.hpp"
#include "opbench/util/random.hpp"
#include "opbench/zoo/families.hpp"

namespace opbench::train {

using ag::Tensor;
using nlohmann::json;

namespace {

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "adamw"; }
const char* schedule_name(ScheduleKind k) { return k == ScheduleKind::Step ? "step" : "one-cycle"; }

}  // namespace

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be an object");
  TrainConfig c;
  for (const auto& [k, v] : j.items()) {
    try {
      if (k == "optimizer") {
        const auto s = v.get<std::string>();
        if (s == "adam")
          c.optimizer = OptimizerKind::Adam;
        else if (s == "adamw")
          c.optimizer = OptimizerKind::AdamW;
        else
          throw ConfigError("unknown optimizer '" + s + "' (adam, adamw)");
      } else if (k == "schedule") {
        const auto s = v.get<std::string>();
        if (s == "step")
          c.schedule = ScheduleKind::Step;
        else if (s == "one-cycle")
          c.schedule = ScheduleKind::OneCycle;
        else
          throw ConfigError("unknown schedule '" + s + "' (step, one-cycle)");
      } else if (k == "lr") {
        c.lr = v.get<double>();
      } else if (k == "epochs") {
        c.epochs = v.get<std::size_t>();
      } else if (k == "batch_size") {
        c.batch_size = v.get<std::size_t>();
      } else if (k == "seeds") {
        c.seeds = v.get<std::vector<std::uint64_t>>();
      } else if (k == "clip_norm") {
        if (v.is_null())
          c.clip_norm.reset();
        else
          c.clip_norm = v.get<double>();
      } else if (k == "weight_decay") {
        c.weight_decay = v.get<double>();
      } else if (k == "step_every") {
        c.step_every = v.get<std::size_t>();
      } else if (k == "step_gamma") {
        c.step_gamma = v.get<double>();
      } else if (k == "warmup_fraction") {
        c.warmup_fraction = v.get<double>();
      } else {
        throw ConfigError("unknown train config key '" + k + "'");
      }
    } catch (const json::exception& e) {
      throw ConfigError("train config key '" + k + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

json TrainConfig::to_json() const {
  json j{{"optimizer", optimizer_name(optimizer)},
         {"lr", lr},
         {"schedule", schedule_name(schedule)},
         {"epochs", epochs},
         {"batch_size", batch_size},
         {"seeds", seeds},
         {"clip_norm", clip_norm ? json(*clip_norm) : json(nullptr)},
         {"weight_decay", weight_decay},
         {"step_every", step_every},
         {"step_gamma", step_gamma},
         {"warmup_fraction", warmup_fraction}};
  return j;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (!(lr >= 1e-5 && lr <= 1e-1)) throw ConfigError("learning rate must lie in [1e-5, 1e-1]");
  if (clip_norm && !(*clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (step_every == 0) throw ConfigError("step_every must be positive");
  if (!(step_gamma > 0.0 && step_gamma <= 1.0)) throw ConfigError("step_gamma must lie in (0, 1]");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ConfigError("warmup_fraction must lie in [0, 1)");
}

Splits split_dataset(std::size_t count, std::uint64_t seed, std::array<double, 3> fractions) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  for (double f : fractions)
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
  const auto n_val = std::size_t(std::floor(fractions[1] * double(count) + 1e-9));
  const auto n_test = std::size_t(std::floor(fractions[2] * double(count) + 1e-9));
  if (n_val == 0 || n_test == 0 || n_val + n_test >= count)
    throw ConfigError(std::to_string(count) + " samples are too few for non-empty train/val/test splits");
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, 0x5117));
  rng.shuffle(idx);
  Splits s;
  s.test.assign(idx.begin(), idx.begin() + std::ptrdiff_t(n_test));
  s.val.assign(idx.begin() + std::ptrdiff_t(n_test), idx.begin() + std::ptrdiff_t(n_test + n_val));
  s.train.assign(idx.begin() + std::ptrdiff_t(n_test + n_val), idx.end());
  return s;
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch, std::size_t iteration, std::size_t total) {
  if (cfg.schedule == ScheduleKind::Step)
    return cfg.lr * std::pow(cfg.step_gamma, double(epoch / cfg.step_every));
  if (total == 0) return cfg.lr;
  const auto warm = std::size_t(std::ceil(cfg.warmup_fraction * double(total)));
  if (iteration < warm) return cfg.lr * double(iteration + 1) / double(warm);
  const double u = total > warm ? double(iteration - warm) / double(total - warm) : 1.0;
  return cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

// ------------------------------------------------------------------ optimizer

Optimizer::Optimizer(std::vector<Tensor> params, const TrainConfig& cfg)
    : params_(std::move(params)), kind_(cfg.optimizer), weight_decay_(cfg.weight_decay) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double Optimizer::clip(double max_norm) {
  double sq = 0.0;
  for (const auto& p : params_)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params_)
      for (double& g : p.mutable_grad()) g *= s;
  }
  return norm;
}

void Optimizer::step(double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(b1, double(t_)), c2 = 1.0 - std::pow(b2, double(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& w = params_[i].mutable_value();
    const auto& g = params_[i].grad();
    if (g.empty()) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1 - b1) * g[j];
      v[j] = b2 * v[j] + (1 - b2) * g[j] * g[j];
      if (kind_ == OptimizerKind::AdamW) w[j] -= lr * weight_decay_ * w[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
    }
  }
}

// ------------------------------------------------------------------ evaluation

namespace {

const NormStats& stats_of(const DatasetBundle& b) {
  if (!b.normalized || !b.norm) throw ConfigError("bundle '" + b.name + "' must be normalized first");
  return *b.norm;
}

std::vector<const std::vector<double>*> inputs_of(const DatasetBundle& b, const std::vector<std::size_t>& idx,
                                                  std::size_t begin, std::size_t end) {
  std::vector<const std::vector<double>*> v;
  for (std::size_t i = begin; i < end; ++i) v.push_back(&b.samples.at(idx[i]).input);
  return v;
}

/// Denormalized targets; entries that normalized from an exact zero map back to
/// exactly zero so all-zero references are detected as degenerate.
std::vector<double> physical_target(const std::vector<double>& normalized, const ChannelStats& stats) {
  auto out = denormalize(normalized, stats);
  const std::size_t c = stats.mean.size();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (normalized[i] == (0.0 - stats.mean[i % c]) / stats.std[i % c]) out[i] = 0.0;
  return out;
}

}  // namespace

std::vector<std::vector<double>> predict(const zoo::Model& model, const DatasetBundle& normalized,
                                         const std::vector<std::size_t>& indices, std::size_t batch_size) {
  const NormStats& stats = stats_of(normalized);
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  ag::NoGradGuard guard;
  const std::size_t per = normalized.grid.points() * normalized.out_channels();
  std::vector<std::vector<double>> out;
  for (std::size_t b = 0; b < indices.size(); b += batch_size) {
    const std::size_t e = std::min(indices.size(), b + batch_size);
    const Tensor x = zoo::batch_tensor(inputs_of(normalized, indices, b, e), normalized.grid, normalized.in_channels());
    const Tensor pred = model.forward(x, normalized.grid);
    const auto& y = pred.value();
    for (std::size_t k = 0; k < e - b; ++k) {
      std::vector<double> p(y.begin() + std::ptrdiff_t(k * per), y.begin() + std::ptrdiff_t((k + 1) * per));
      denormalize_in_place(p, stats.output);
      out.push_back(std::move(p));
    }
  }
  return out;
}

EvalResult score_predictions(const std::vector<std::vector<double>>& predictions, const DatasetBundle& normalized,
                             const std::vector<std::size_t>& indices) {
  const NormStats& stats = stats_of(normalized);
  if (predictions.size() != indices.size()) throw ShapeError("one prediction per scored sample is required");
  EvalResult r;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto truth = physical_target(normalized.samples.at(indices[k]).output, stats.output);
    try {
      const double s = relative_l2(predictions[k], truth);
      r.scores.push_back(s);
      sum += s;
      ++used;
    } catch (const DegenerateReferenceError&) {
      r.scores.push_back(std::numeric_limits<double>::quiet_NaN());
      ++r.excluded;
    }
  }
  r.mean = used ? sum / double(used) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::vector<std::vector<double>> physical_targets(const DatasetBundle& normalized,
                                                  const std::vector<std::size_t>& indices) {
  const NormStats& stats = stats_of(normalized);
  std::vector<std::vector<double>> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(physical_target(normalized.samples.at(i).output, stats.output));
  return out;
}

EvalResult evaluate(const zoo::Model& model, const DatasetBundle& normalized, const std::vector<std::size_t>& indices,
                    std::size_t batch_size) {
  return score_predictions(predict(model, normalized, indices, batch_size), normalized, indices);
}

// ------------------------------------------------------------------ training

namespace {

struct Snapshot {
  std::vector<std::vector<double>> values;
};

Snapshot snapshot(const zoo::Model& m) {
  Snapshot s;
  for (const auto& p : m.params()) s.values.push_back(p.value.value());
  return s;
}

void restore(zoo::Model& m, const Snapshot& s) {
  for (std::size_t i = 0; i < s.values.size(); ++i) m.params()[i].value.mutable_value() = s.values[i];
}

std::vector<Tensor> group_params(zoo::Model& m, int group) {
  std::vector<Tensor> v;
  for (auto& p : m.params())
    if (p.group == group) v.push_back(p.value);
  return v;
}

/// Target tensor [B, spatial..., C] taken from the output or a stored snapshot.
Tensor targets(const DatasetBundle& b, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
               std::optional<std::size_t> snapshot_index) {
  const std::size_t per = b.grid.points() * b.out_channels();
  std::vector<double> v;
  v.reserve((end - begin) * per);
  for (std::size_t i = begin; i < end; ++i) {
    const auto& s = b.samples[idx[i]];
    if (snapshot_index) {
      const auto off = std::ptrdiff_t(*snapshot_index * per);
      v.insert(v.end(), s.trajectory.begin() + off, s.trajectory.begin() + off + std::ptrdiff_t(per));
    } else {
      v.insert(v.end(), s.output.begin(), s.output.end());
    }
  }
  return ag::constant(zoo::batch_shape(b.grid, end - begin, b.out_channels()), std::move(v));
}

}  // namespace

SeedRun train_seed(const zoo::ModelSpec& spec, const DatasetBundle& normalized, const TrainConfig& cfg,
                   std::uint64_t seed, const std::vector<std::size_t>* train_subset) {
  cfg.validate();
  const NormStats& stats = stats_of(normalized);
  const auto& train_idx = train_subset ? *train_subset : normalized.splits.train;
  const auto& val_idx = normalized.splits.val;
  if (train_idx.empty() || val_idx.empty()) throw ConfigError("training needs non-empty train and val splits");

  const auto t0 = std::chrono::steady_clock::now();
  SeedRun run;
  run.seed = seed;
  std::shared_ptr<zoo::Model> model = zoo::make_model(spec, zoo::context_for(normalized), derive_seed(seed, 1));
  std::vector<const std::vector<double>*> train_outputs;
  for (std::size_t i : train_idx) train_outputs.push_back(&normalized.samples.at(i).output);
  model->prepare(train_outputs);

  auto denorm = [&](const Tensor& t) { return ag::affine_last(t, stats.output.std, stats.output.mean); };
  const auto* gan = model->adversarial() ? dynamic_cast<const zoo::CGan*>(model.get()) : nullptr;
  Optimizer opt(group_params(*model, 0), cfg);
  std::optional<Optimizer> disc_opt;
  if (gan) disc_opt.emplace(group_params(*model, 1), cfg);

  const std::size_t steps = model->rollout_steps();
  const std::size_t stored = model->context().stored_steps;
  const std::size_t batches = (train_idx.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = batches * cfg.epochs;

  run.train_curve.push_back(evaluate(*model, normalized, train_idx, cfg.batch_size).mean);
  run.val_curve.push_back(evaluate(*model, normalized, val_idx, cfg.batch_size).mean);
  if (!std::isfinite(run.val_curve[0])) throw TrainingError("initial validation metric is not finite", -1);
  Snapshot best = snapshot(*model);
  run.best_epoch = 0;
  run.last_finite_epoch = 0;

  Rng rng(derive_seed(seed, 2));
  std::vector<std::size_t> order = train_idx;
  std::size_t iteration = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size, ++iteration) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      const double lr = learning_rate(cfg, epoch - 1, iteration, total);
      const Tensor x = zoo::batch_tensor(inputs_of(normalized, order, b, e), normalized.grid, normalized.in_channels());
      const Tensor y = targets(normalized, order, b, e, std::nullopt);
      Tensor loss;
      if (gan) {
        const auto l = zoo::cgan_losses(*gan, x, y, normalized.grid, denorm);
        opt.zero_grad();
        disc_opt->zero_grad();
        ag::backward(l.generator);
        if (cfg.clip_norm) opt.clip(*cfg.clip_norm);
        opt.step(lr);
        disc_opt->zero_grad();
        ag::backward(l.discriminator);
        if (cfg.clip_norm) disc_opt->clip(*cfg.clip_norm);
        disc_opt->step(lr);
        loss = l.reconstruction;
      } else {
        if (steps > 1) {
          const auto preds = model->forward_rollout(x, normalized.grid);
          Tensor acc;
          for (std::size_t s = 0; s < steps; ++s) {
            std::optional<std::size_t> snap;
            if (s + 1 < steps) snap = std::size_t(std::lround(double((s + 1) * stored) / double(steps))) - 1;
            const Tensor term = ag::rel_l2_loss(denorm(preds[s]), denorm(targets(normalized, order, b, e, snap)));
            acc = acc.defined() ? ag::add(acc, term) : term;
          }
          loss = ag::scale(acc, 1.0 / double(steps));
        } else {
          loss = ag::rel_l2_loss(denorm(model->forward(x, normalized.grid)), denorm(y));
        }
        opt.zero_grad();
        ag::backward(loss);
        if (cfg.clip_norm) opt.clip(*cfg.clip_norm);
        opt.step(lr);
      }
      const double lv = loss.item();
      if (!std::isfinite(lv))
        throw TrainingError("loss became non-finite in epoch " + std::to_string(epoch), run.last_finite_epoch);
      loss_sum += lv;
      ++loss_count;
    }
    const double val = evaluate(*model, normalized, val_idx, cfg.batch_size).mean;
    if (!std::isfinite(val))
      throw TrainingError("validation metric became non-finite in epoch " + std::to_string(epoch),
                          run.last_finite_epoch);
    run.last_finite_epoch = int(epoch);
    run.train_curve.push_back(loss_sum / double(loss_count));
    run.val_curve.push_back(val);
    if (val < run.val_curve[run.best_epoch]) {
      run.best_epoch = epoch;
      best = snapshot(*model);
    }
  }
  restore(*model, best);
  run.model = model;
  run.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

TrainResult train(const zoo::ModelSpec& spec, const DatasetBundle& normalized, const TrainConfig& cfg) {
  TrainResult r;
  r.dataset = normalized.name;
  r.spec = spec;
  r.grid = normalized.grid;
  r.norm = stats_of(normalized);
  for (std::uint64_t seed : cfg.seeds) {
    try {
      r.runs.push_back(train_seed(spec, normalized, cfg, seed));
    } catch (const TrainingError& e) {
      SeedRun failed;
      failed.seed = seed;
      failed.failed = true;
      failed.error = e.what();
      failed.last_finite_epoch = e.last_finite_epoch();
      r.runs.push_back(std::move(failed));
    }
  }
  return r;
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= double(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(sq / double(v.size()));
  return r;
}

}  // namespace opbench::train

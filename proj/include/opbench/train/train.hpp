#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "opbench/grid/grid.hpp"
#include "opbench/zoo/model.hpp"

namespace opbench::train {

enum class OptimizerKind { Adam, AdamW };
enum class ScheduleKind { Step, OneCycle };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double lr = 1e-3;
  ScheduleKind schedule = ScheduleKind::Step;
  std::size_t epochs = 500;
  std::size_t batch_size = 20;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::optional<double> clip_norm;
  /// Decoupled decay for AdamW; ignored by Adam.
  double weight_decay = 1e-4;
  std::size_t step_every = 100;
  double step_gamma = 0.5;
  double warmup_fraction = 0.3;

  /// Unknown keys and out-of-range values raise ConfigError.
  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

/// Shuffled partition; validation and test sizes are floor(fraction * count)
/// and the remainder goes to training.
Splits split_dataset(std::size_t count, std::uint64_t seed, std::array<double, 3> fractions = {0.8, 0.1, 0.1});

/// Learning rate for `iteration` (0-based, within `total` iterations) in `epoch`.
double learning_rate(const TrainConfig& cfg, std::size_t epoch, std::size_t iteration, std::size_t total);

/// Adam / AdamW over a fixed parameter list.
class Optimizer {
 public:
  Optimizer(std::vector<ag::Tensor> params, const TrainConfig& cfg);
  void step(double lr);
  /// Rescales gradients so their global norm is at most `max_norm`; returns the norm before clipping.
  double clip(double max_norm);
  void zero_grad();

 private:
  std::vector<ag::Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  OptimizerKind kind_;
  double weight_decay_;
  std::size_t t_ = 0;
};

struct EvalResult {
  double mean = 0.0;
  /// Per-sample rel-L2 in the order of the requested indices; NaN where the
  /// reference was degenerate.
  std::vector<double> scores;
  std::size_t excluded = 0;
};

/// Scores predictions against targets in physical units (denormalized with the
/// bundle's output statistics). The result does not depend on batch size.
EvalResult evaluate(const zoo::Model& model, const DatasetBundle& normalized, const std::vector<std::size_t>& indices,
                    std::size_t batch_size = 20);

/// Scores physical-unit predictions (one per index) against the bundle's targets.
EvalResult score_predictions(const std::vector<std::vector<double>>& predictions, const DatasetBundle& normalized,
                             const std::vector<std::size_t>& indices);

/// Targets in physical units; entries stored as a normalized exact zero map back
/// to exactly zero.
std::vector<std::vector<double>> physical_targets(const DatasetBundle& normalized,
                                                  const std::vector<std::size_t>& indices);
/// Model predictions in physical units for the given samples, one vector each.
std::vector<std::vector<double>> predict(const zoo::Model& model, const DatasetBundle& normalized,
                                         const std::vector<std::size_t>& indices, std::size_t batch_size = 20);

struct SeedRun {
  std::uint64_t seed = 0;
  std::shared_ptr<zoo::Model> model;
  /// Index 0 holds the untrained model; index e the state after epoch e.
  std::vector<double> train_curve, val_curve;
  std::size_t best_epoch = 0;
  double train_seconds = 0.0;
  bool failed = false;
  std::string error;
  int last_finite_epoch = -1;
};

struct TrainResult {
  std::string dataset;
  zoo::ModelSpec spec;
  GridSpec grid;
  NormStats norm;
  std::vector<SeedRun> runs;
};

/// Trains one seed on the bundle's training split (or `train_subset`) and
/// returns the best-validation checkpoint. Raises TrainingError on divergence.
SeedRun train_seed(const zoo::ModelSpec& spec, const DatasetBundle& normalized, const TrainConfig& cfg,
                   std::uint64_t seed, const std::vector<std::size_t>* train_subset = nullptr);

/// One run per configured seed; a diverging seed is recorded as failed.
TrainResult train(const zoo::ModelSpec& spec, const DatasetBundle& normalized, const TrainConfig& cfg);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
/// Population mean and standard deviation.
MeanStd mean_std(const std::vector<double>& v);

}  // namespace opbench::train

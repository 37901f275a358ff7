#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "opbench/grid/grid.hpp"
#include "opbench/train/train.hpp"
#include "opbench/zoo/model.hpp"

namespace opbench::harness {

enum class Task { Accuracy, Noise, DataEfficiency, SuperResolution, OodSwap, Timing };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

/// A named model configuration. The family "oracle" is a lookup table of the
/// true outputs and scores exactly zero on data it has seen.
struct ModelEntry {
  std::string name;
  zoo::ModelSpec spec;

  bool oracle() const { return spec.family == "oracle"; }
  /// {"name": "fno-small", "family": "fno", "width": 16, ...}; name defaults to the family.
  static ModelEntry from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Where a dataset comes from and how it is split.
struct DatasetSpec {
  std::string name;
  /// "generate", "pdebench", "mechanical-mnist" or "native".
  std::string source = "generate";
  /// Generator name for source "generate"; defaults to `name`.
  std::string generator;
  /// Samples to generate; for ingested data 0 keeps every stored sample.
  std::size_t count = 0;
  /// Grid points per axis for generated data; 0 keeps the solver default.
  std::size_t resolution = 0;
  std::uint64_t seed = 0;
  std::string path;
  std::array<double, 3> split = {0.8, 0.1, 0.1};

  static DatasetSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  const std::string& generator_name() const { return generator.empty() ? name : generator; }
};

inline const std::vector<double> kDefaultNoiseLevels = {0.0, 0.005, 0.01, 0.02, 0.04, 0.08, 0.16};

struct TaskSpec {
  Task task = Task::Accuracy;
  std::vector<std::string> models;
  std::vector<std::string> datasets;
  std::vector<double> noise_levels = kDefaultNoiseLevels;
  std::vector<double> fractions = {0.25, 0.5, 1.0};
  /// Super-resolution: training resolution (0 = the dataset's own) and test resolutions.
  std::size_t train_resolution = 0;
  std::vector<std::size_t> test_resolutions = {47, 64, 128};
  std::array<std::string, 2> pair = {"stress", "strain"};
  std::size_t timing_samples = 200;
  std::size_t timing_repeats = 5;

  static TaskSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

/// One (model, dataset, task, parameter, seed) outcome. Scores are per-sample
/// relative L2 errors over the test split; mean and std are taken over them.
struct ExperimentRecord {
  std::string model;
  std::string dataset;
  std::string task;
  std::string parameter;
  std::uint64_t seed = 0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t samples = 0;
  std::size_t excluded = 0;
  /// Samples the task could not treat as requested (zero-variance inputs under noise).
  std::size_t flagged = 0;
  bool failed = false;
  std::string error;
  /// Parameter hash of the evaluated state.
  std::string state_hash;
  std::string config_hash;
  // Volatile fields.
  double train_seconds = 0.0;
  double inference_seconds = 0.0;
  std::vector<double> inference_repeats;
  bool contention = false;
  std::string timestamp;

  /// Uniqueness key: model, dataset, task, parameter, seed and config hash.
  std::string key() const;
  /// Canonical form; without volatile fields when `include_volatile` is false.
  nlohmann::json to_json(bool include_volatile = true) const;
  nlohmann::json volatile_json() const;
  static ExperimentRecord from_json(const nlohmann::json& j);
  /// Merges volatile fields written separately.
  void apply_volatile(const nlohmann::json& j);
  /// Equal metric content (bitwise on the floating-point values).
  bool same_metrics(const ExperimentRecord& other) const;
};

/// x + gamma * sigma_x * eta with eta standard normal per element and sigma_x
/// the population standard deviation of the sample's input. Returns false (and
/// leaves the input untouched) when sigma_x = 0.
bool add_noise(std::span<double> input, double gamma, std::uint64_t seed);

struct NoisyBundle {
  DatasetBundle bundle;
  /// Samples left unchanged because their input variance is zero.
  std::size_t flagged = 0;
};
/// Corrupts the inputs of `indices` in a raw bundle; sample i draws from
/// derive_seed(seed, i) so every level reuses the same eta.
NoisyBundle add_noise(const DatasetBundle& raw, const std::vector<std::size_t>& indices, double gamma,
                      std::uint64_t seed);

/// Nested training subsets: a fixed shuffle of the train split, truncated to
/// round(fraction * count) (the whole split for fraction 1), kept in split order.
std::vector<std::vector<std::size_t>> nested_subsets(const DatasetBundle& bundle,
                                                     const std::vector<double>& fractions,
                                                     std::uint64_t seed);

/// Generates (or ingests) a dataset and assigns its splits.
DatasetBundle load_dataset(const DatasetSpec& spec, std::size_t resolution);

/// Raw and normalized bundles by (name, resolution), built on first use.
class DataCatalog {
 public:
  using Loader = std::function<DatasetBundle(const DatasetSpec&, std::size_t resolution)>;

  explicit DataCatalog(std::vector<DatasetSpec> specs, Loader loader = load_dataset);

  const DatasetSpec& spec(const std::string& name) const;
  bool contains(const std::string& name) const;
  /// resolution 0 selects the spec's own resolution.
  const DatasetBundle& raw(const std::string& name, std::size_t resolution = 0);
  const DatasetBundle& normalized(const std::string& name, std::size_t resolution = 0);
  /// Identity of a bundle for cache keys.
  nlohmann::json identity(const std::string& name, std::size_t resolution = 0) const;

 private:
  std::size_t resolve(const std::string& name, std::size_t resolution) const;

  std::vector<DatasetSpec> specs_;
  Loader loader_;
  std::map<std::pair<std::string, std::size_t>, std::unique_ptr<DatasetBundle>> raw_, normalized_;
};

/// Persistent backing for trained states.
class StateStore {
 public:
  virtual ~StateStore() = default;
  virtual std::optional<train::SeedRun> load(const std::string& key, const zoo::ModelSpec& spec,
                                             const zoo::ModelContext& ctx) = 0;
  virtual void save(const std::string& key, const train::SeedRun& run) = 0;
};

/// Trained states by (model, data, training config, seed, subset).
class StateCache {
 public:
  void set_store(StateStore* store) { store_ = store; }
  std::shared_ptr<const train::SeedRun> find(const std::string& key) const;
  void insert(const std::string& key, train::SeedRun run);
  std::size_t size() const { return runs_.size(); }
  StateStore* store() const { return store_; }

 private:
  std::map<std::string, std::shared_ptr<const train::SeedRun>> runs_;
  StateStore* store_ = nullptr;
};

struct HarnessOptions {
  train::TrainConfig train;
  std::string config_hash = "none";
  /// Drives noise draws and subset selection.
  std::uint64_t master_seed = 0;
  bool deterministic = true;
  /// Timestamp source; the default writes UTC ISO-8601.
  std::function<std::string()> clock;
};

class Harness {
 public:
  Harness(DataCatalog& catalog, HarnessOptions options, std::shared_ptr<StateCache> cache = nullptr);

  std::vector<ExperimentRecord> run(const TaskSpec& task, const std::vector<ModelEntry>& models);

  std::vector<ExperimentRecord> run_accuracy(const std::vector<ModelEntry>& models,
                                             const std::vector<std::string>& datasets);
  std::vector<ExperimentRecord> run_noise(const std::vector<ModelEntry>& models, const std::string& dataset,
                                          const std::vector<double>& levels);
  std::vector<ExperimentRecord> run_data_efficiency(const std::vector<ModelEntry>& models,
                                                    const std::string& dataset,
                                                    const std::vector<double>& fractions);
  std::vector<ExperimentRecord> run_super_resolution(const std::vector<ModelEntry>& models,
                                                     const std::string& dataset, std::size_t train_resolution,
                                                     const std::vector<std::size_t>& test_resolutions);
  std::vector<ExperimentRecord> run_ood_swap(const std::vector<ModelEntry>& models,
                                             const std::array<std::string, 2>& pair);
  std::vector<ExperimentRecord> run_timing(const std::vector<ModelEntry>& models, const std::string& dataset,
                                           std::size_t samples = 200, std::size_t repeats = 5);

  /// Trained state for one seed, from the cache when available. Failed seeds
  /// are returned with `failed` set.
  std::shared_ptr<const train::SeedRun> state(const ModelEntry& model, const std::string& dataset,
                                              std::size_t resolution, std::uint64_t seed,
                                              const std::vector<std::size_t>* subset = nullptr);

  StateCache& cache() { return *cache_; }
  const HarnessOptions& options() const { return options_; }
  /// Trainings actually performed by this harness (cache misses).
  std::size_t trainings() const { return trainings_; }

 private:
  ExperimentRecord base_record(const ModelEntry& m, const std::string& dataset, Task task,
                               const std::string& parameter, std::uint64_t seed) const;
  void score(ExperimentRecord& r, const ModelEntry& m, const train::SeedRun& run, const std::string& train_dataset,
             std::size_t train_resolution, const DatasetBundle& test) const;

  DataCatalog& catalog_;
  HarnessOptions options_;
  std::shared_ptr<StateCache> cache_;
  std::size_t trainings_ = 0;
};

/// Formats a task parameter (noise level, fraction) for records.
std::string format_parameter(double value);

}  // namespace opbench::harness

#include "opbench/harness/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <limits>
#include <set>
#include <unordered_map>

#include "opbench/errors.hpp"
#include "opbench/forge/generate.hpp"
#include "opbench/forge/ingest.hpp"
#include "opbench/util/hash.hpp"
#include "opbench/util/random.hpp"

namespace opbench::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::atomic<int> active_timing_runs{0};

const std::map<Task, std::string>& task_names() {
  static const std::map<Task, std::string> names{{Task::Accuracy, "accuracy"},
                                                 {Task::Noise, "noise"},
                                                 {Task::DataEfficiency, "data-efficiency"},
                                                 {Task::SuperResolution, "super-resolution"},
                                                 {Task::OodSwap, "ood-swap"},
                                                 {Task::Timing, "timing"}};
  return names;
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown " + what + " key '" + k + "'");
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double number_from(const nlohmann::json& j) { return j.is_null() ? kNaN : j.get<double>(); }

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0 || (std::isnan(a) && std::isnan(b));
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string input_key(const std::vector<double>& input) { return fnv1a_hex(std::span<const double>(input)); }

/// Exact outputs of every sample seen in `bundle`, keyed by input values.
class OracleTable {
 public:
  explicit OracleTable(const DatasetBundle& normalized) {
    std::vector<std::size_t> all(normalized.samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto targets = train::physical_targets(normalized, all);
    for (std::size_t i = 0; i < all.size(); ++i)
      table_.emplace(input_key(normalized.samples[i].input), std::move(targets[i]));
  }

  std::vector<std::vector<double>> predict(const DatasetBundle& normalized, const std::vector<std::size_t>& idx) const {
    std::vector<std::vector<double>> out;
    for (std::size_t i : idx) {
      auto it = table_.find(input_key(normalized.samples.at(i).input));
      if (it == table_.end()) throw ConfigError("oracle has no entry for sample " + std::to_string(i));
      out.push_back(it->second);
    }
    return out;
  }

 private:
  std::unordered_map<std::string, std::vector<double>> table_;
};

void check_subset(const std::vector<std::size_t>& small, const std::vector<std::size_t>& large) {
  std::set<std::size_t> big(large.begin(), large.end());
  for (std::size_t i : small)
    if (!big.count(i)) throw IntegrityError("training subsets are not nested");
}

std::string grid_label(const GridSpec& g) {
  std::string s;
  for (std::size_t a = 0; a < g.ndim(); ++a) s += (a ? "x" : "") + std::to_string(g.shape[a]);
  return s;
}

}  // namespace

std::string to_string(Task task) { return task_names().at(task); }

Task task_from_string(const std::string& name) {
  for (const auto& [t, n] : task_names())
    if (n == name) return t;
  throw ConfigError("unknown task '" + name +
                    "' (expected accuracy, noise, data-efficiency, super-resolution, ood-swap or timing)");
}

std::string format_parameter(double value) { return nlohmann::json(value).dump(); }

// ------------------------------------------------------------------ specs

ModelEntry ModelEntry::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family")) throw ConfigError("model entry needs a 'family'");
  ModelEntry m;
  nlohmann::json rest = j;
  m.name = rest.value("name", j.at("family").get<std::string>());
  rest.erase("name");
  if (j.at("family") == "oracle") {
    rest.erase("family");
    if (!rest.empty()) throw ConfigError("the oracle model takes no options");
    m.spec.family = "oracle";
  } else {
    m.spec = zoo::ModelSpec::from_json(rest);
    m.spec.options = zoo::resolve_options(m.spec);
  }
  return m;
}

nlohmann::json ModelEntry::to_json() const {
  nlohmann::json j = oracle() ? nlohmann::json{{"family", "oracle"}} : spec.to_json();
  j["name"] = name;
  return j;
}

DatasetSpec DatasetSpec::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"name", "source", "generator", "count", "resolution", "seed", "path", "split"}, "dataset");
  DatasetSpec d;
  d.name = j.at("name").get<std::string>();
  d.source = j.value("source", d.source);
  d.generator = j.value("generator", d.generator);
  d.count = j.value("count", d.count);
  d.resolution = j.value("resolution", d.resolution);
  d.seed = j.value("seed", d.seed);
  d.path = j.value("path", d.path);
  if (j.contains("split")) d.split = j.at("split").get<std::array<double, 3>>();
  static const std::set<std::string> sources{"generate", "pdebench", "mechanical-mnist", "native"};
  if (!sources.count(d.source)) throw ConfigError("unknown dataset source '" + d.source + "'");
  if (d.source != "generate" && d.path.empty()) throw ConfigError("dataset '" + d.name + "' needs a path");
  return d;
}

nlohmann::json DatasetSpec::to_json() const {
  return {{"name", name},   {"source", source}, {"generator", generator_name()}, {"count", count},
          {"resolution", resolution}, {"seed", seed}, {"path", path}, {"split", split}};
}

TaskSpec TaskSpec::from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"task", "models", "datasets", "noise_levels", "fractions", "train_resolution",
                  "test_resolutions", "pair", "timing_samples", "timing_repeats"},
                 "task");
  TaskSpec t;
  t.task = task_from_string(j.at("task").get<std::string>());
  t.models = j.value("models", t.models);
  t.datasets = j.value("datasets", t.datasets);
  t.noise_levels = j.value("noise_levels", t.noise_levels);
  t.fractions = j.value("fractions", t.fractions);
  t.train_resolution = j.value("train_resolution", t.train_resolution);
  t.test_resolutions = j.value("test_resolutions", t.test_resolutions);
  if (j.contains("pair")) t.pair = j.at("pair").get<std::array<std::string, 2>>();
  t.timing_samples = j.value("timing_samples", t.timing_samples);
  t.timing_repeats = j.value("timing_repeats", t.timing_repeats);
  t.validate();
  return t;
}

nlohmann::json TaskSpec::to_json() const {
  nlohmann::json j{{"task", to_string(task)}, {"models", models}, {"datasets", datasets}};
  switch (task) {
    case Task::Noise: j["noise_levels"] = noise_levels; break;
    case Task::DataEfficiency: j["fractions"] = fractions; break;
    case Task::SuperResolution:
      j["train_resolution"] = train_resolution;
      j["test_resolutions"] = test_resolutions;
      break;
    case Task::OodSwap: j["pair"] = pair; break;
    case Task::Timing:
      j["timing_samples"] = timing_samples;
      j["timing_repeats"] = timing_repeats;
      break;
    case Task::Accuracy: break;
  }
  return j;
}

void TaskSpec::validate() const {
  if (models.empty()) throw ConfigError(to_string(task) + " task lists no models");
  if (task != Task::OodSwap && datasets.empty()) throw ConfigError(to_string(task) + " task lists no datasets");
  if (task == Task::Noise)
    for (double g : noise_levels)
      if (!(g >= 0.0)) throw ConfigError("noise level must be >= 0, got " + format_parameter(g));
  if (task == Task::DataEfficiency)
    for (double f : fractions)
      if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fraction must lie in (0, 1], got " + format_parameter(f));
  if (task == Task::SuperResolution && test_resolutions.empty())
    throw ConfigError("super-resolution task lists no test resolutions");
  if (task == Task::Timing && (timing_samples == 0 || timing_repeats == 0))
    throw ConfigError("timing needs at least one sample and one repeat");
}

// ------------------------------------------------------------------ records

std::string ExperimentRecord::key() const {
  return nlohmann::json{model, dataset, task, parameter, seed, config_hash}.dump();
}

nlohmann::json ExperimentRecord::to_json(bool include_volatile) const {
  nlohmann::json j{{"model", model},
                   {"dataset", dataset},
                   {"task", task},
                   {"parameter", parameter},
                   {"seed", seed},
                   {"mean", number_or_null(mean)},
                   {"std", number_or_null(std)},
                   {"samples", samples},
                   {"excluded", excluded},
                   {"flagged", flagged},
                   {"failed", failed},
                   {"error", error},
                   {"state_hash", state_hash},
                   {"config_hash", config_hash}};
  if (include_volatile) j.update(volatile_json());
  return j;
}

nlohmann::json ExperimentRecord::volatile_json() const {
  nlohmann::json reps = nlohmann::json::array();
  for (double r : inference_repeats) reps.push_back(r);
  return {{"train_seconds", train_seconds},
          {"inference_seconds", inference_seconds},
          {"inference_repeats", reps},
          {"contention", contention},
          {"timestamp", timestamp}};
}

ExperimentRecord ExperimentRecord::from_json(const nlohmann::json& j) {
  ExperimentRecord r;
  r.model = j.at("model").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.task = j.at("task").get<std::string>();
  r.parameter = j.at("parameter").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.mean = number_from(j.at("mean"));
  r.std = number_from(j.at("std"));
  r.samples = j.at("samples").get<std::size_t>();
  r.excluded = j.at("excluded").get<std::size_t>();
  r.flagged = j.value("flagged", std::size_t{0});
  r.failed = j.at("failed").get<bool>();
  r.error = j.value("error", "");
  r.state_hash = j.value("state_hash", "");
  r.config_hash = j.at("config_hash").get<std::string>();
  r.apply_volatile(j);
  return r;
}

void ExperimentRecord::apply_volatile(const nlohmann::json& j) {
  train_seconds = j.value("train_seconds", train_seconds);
  inference_seconds = j.value("inference_seconds", inference_seconds);
  if (j.contains("inference_repeats")) inference_repeats = j.at("inference_repeats").get<std::vector<double>>();
  contention = j.value("contention", contention);
  timestamp = j.value("timestamp", timestamp);
}

bool ExperimentRecord::same_metrics(const ExperimentRecord& o) const {
  return same_bits(mean, o.mean) && same_bits(std, o.std) && samples == o.samples && excluded == o.excluded &&
         failed == o.failed && state_hash == o.state_hash;
}

// ------------------------------------------------------------------ noise and subsets

bool add_noise(std::span<double> input, double gamma, std::uint64_t seed) {
  if (!(gamma >= 0.0)) throw ConfigError("noise level must be >= 0, got " + format_parameter(gamma));
  if (input.empty()) return false;
  double mean = 0.0;
  for (double v : input) mean += v;
  mean /= double(input.size());
  double sq = 0.0;
  for (double v : input) sq += (v - mean) * (v - mean);
  const double sigma = std::sqrt(sq / double(input.size()));
  if (sigma == 0.0) return false;
  if (gamma == 0.0) return true;
  Rng rng(seed);
  for (double& v : input) v += gamma * sigma * rng.normal();
  return true;
}

NoisyBundle add_noise(const DatasetBundle& raw, const std::vector<std::size_t>& indices, double gamma,
                      std::uint64_t seed) {
  if (raw.normalized) throw ConfigError("noise is applied to physical-unit inputs");
  NoisyBundle out{raw, 0};
  for (std::size_t i : indices)
    if (!add_noise(out.bundle.samples.at(i).input, gamma, derive_seed(seed, i))) ++out.flagged;
  return out;
}

std::vector<std::vector<std::size_t>> nested_subsets(const DatasetBundle& bundle,
                                                     const std::vector<double>& fractions, std::uint64_t seed) {
  const auto& train = bundle.splits.train;
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0xEFF1C));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> subsets;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fraction must lie in (0, 1], got " + format_parameter(f));
    const std::size_t size =
        f == 1.0 ? train.size()
                 : std::min<std::size_t>(train.size(), std::size_t(std::llround(f * double(bundle.samples.size()))));
    if (size == 0) throw ConfigError("fraction " + format_parameter(f) + " leaves no training samples");
    std::vector<std::size_t> pos(order.begin(), order.begin() + std::ptrdiff_t(size));
    std::sort(pos.begin(), pos.end());
    std::vector<std::size_t> subset;
    for (std::size_t p : pos) subset.push_back(train[p]);
    subsets.push_back(std::move(subset));
  }
  return subsets;
}

// ------------------------------------------------------------------ data

DatasetBundle load_dataset(const DatasetSpec& spec, std::size_t resolution) {
  DatasetBundle b;
  if (spec.source == "generate") {
    if (spec.count == 0) throw ConfigError("generated dataset '" + spec.name + "' needs a count");
    forge::GenerateConfig cfg = forge::default_generate_config(spec.generator_name());
    if (resolution) cfg.solver.resolution = resolution;
    b = forge::generate_dataset(spec.generator_name(), spec.count, cfg, spec.seed);
  } else if (spec.source == "pdebench" || spec.source == "mechanical-mnist") {
    b = forge::ingest_external(spec.path, forge::adapter_from_string(spec.source), spec.name);
    if (resolution && resolution != b.grid.shape.at(0))
      throw ConfigError("dataset '" + spec.name + "' is only available at its stored resolution");
    if (spec.count && spec.count < b.samples.size()) b.samples.resize(spec.count);
  } else {
    throw ConfigError("dataset '" + spec.name + "': source '" + spec.source + "' needs a store-backed loader");
  }
  b.name = spec.name;
  b.splits = train::split_dataset(b.samples.size(), spec.seed, spec.split);
  b.splits.validate(b.samples.size());
  return b;
}

DataCatalog::DataCatalog(std::vector<DatasetSpec> specs, Loader loader)
    : specs_(std::move(specs)), loader_(std::move(loader)) {
  std::set<std::string> names;
  for (const auto& s : specs_)
    if (!names.insert(s.name).second) throw ConfigError("dataset '" + s.name + "' is defined twice");
}

bool DataCatalog::contains(const std::string& name) const {
  return std::any_of(specs_.begin(), specs_.end(), [&](const DatasetSpec& s) { return s.name == name; });
}

const DatasetSpec& DataCatalog::spec(const std::string& name) const {
  for (const auto& s : specs_)
    if (s.name == name) return s;
  throw ConfigError("unknown dataset '" + name + "'");
}

std::size_t DataCatalog::resolve(const std::string& name, std::size_t resolution) const {
  return resolution ? resolution : spec(name).resolution;
}

const DatasetBundle& DataCatalog::raw(const std::string& name, std::size_t resolution) {
  const auto key = std::make_pair(name, resolve(name, resolution));
  auto it = raw_.find(key);
  if (it == raw_.end()) {
    auto b = std::make_unique<DatasetBundle>(loader_(spec(name), key.second));
    b->splits.validate(b->samples.size());
    it = raw_.emplace(key, std::move(b)).first;
  }
  return *it->second;
}

const DatasetBundle& DataCatalog::normalized(const std::string& name, std::size_t resolution) {
  const auto key = std::make_pair(name, resolve(name, resolution));
  auto it = normalized_.find(key);
  if (it == normalized_.end())
    it = normalized_.emplace(key, std::make_unique<DatasetBundle>(normalize(raw(name, key.second)))).first;
  return *it->second;
}

nlohmann::json DataCatalog::identity(const std::string& name, std::size_t resolution) const {
  nlohmann::json j = spec(name).to_json();
  j["resolution"] = resolve(name, resolution);
  return j;
}

// ------------------------------------------------------------------ cache

std::shared_ptr<const train::SeedRun> StateCache::find(const std::string& key) const {
  auto it = runs_.find(key);
  return it == runs_.end() ? nullptr : it->second;
}

void StateCache::insert(const std::string& key, train::SeedRun run) {
  runs_[key] = std::make_shared<const train::SeedRun>(std::move(run));
}

// ------------------------------------------------------------------ harness

Harness::Harness(DataCatalog& catalog, HarnessOptions options, std::shared_ptr<StateCache> cache)
    : catalog_(catalog), options_(std::move(options)), cache_(cache ? std::move(cache) : std::make_shared<StateCache>()) {
  options_.train.validate();
  if (!options_.clock) options_.clock = utc_now;
}

std::shared_ptr<const train::SeedRun> Harness::state(const ModelEntry& model, const std::string& dataset,
                                                     std::size_t resolution, std::uint64_t seed,
                                                     const std::vector<std::size_t>* subset) {
  const DatasetBundle& data = catalog_.normalized(dataset, resolution);
  if (subset && *subset == data.splits.train) subset = nullptr;
  nlohmann::json cfg = options_.train.to_json();
  cfg.erase("seeds");
  nlohmann::json id{{"model", model.oracle() ? nlohmann::json("oracle") : zoo::resolve_options(model.spec)},
                    {"family", model.spec.family},
                    {"data", catalog_.identity(dataset, resolution)},
                    {"train", cfg},
                    {"seed", seed},
                    {"subset", subset ? fnv1a_hex(nlohmann::json(*subset).dump()) : "full"}};
  const std::string key = fnv1a_hex(id.dump());
  if (auto hit = cache_->find(key)) return hit;

  train::SeedRun run;
  run.seed = seed;
  if (!model.oracle()) {
    std::optional<train::SeedRun> stored;
    if (cache_->store()) stored = cache_->store()->load(key, model.spec, zoo::context_for(data));
    if (stored) {
      run = std::move(*stored);
    } else {
      ++trainings_;
      try {
        run = train::train_seed(model.spec, data, options_.train, seed, subset);
      } catch (const TrainingError& e) {
        run.failed = true;
        run.error = e.what();
        run.last_finite_epoch = e.last_finite_epoch();
      }
      if (cache_->store() && !run.failed) cache_->store()->save(key, run);
    }
  }
  cache_->insert(key, std::move(run));
  return cache_->find(key);
}

ExperimentRecord Harness::base_record(const ModelEntry& m, const std::string& dataset, Task task,
                                      const std::string& parameter, std::uint64_t seed) const {
  ExperimentRecord r;
  r.model = m.name;
  r.dataset = dataset;
  r.task = to_string(task);
  r.parameter = parameter;
  r.seed = seed;
  r.config_hash = options_.config_hash;
  r.timestamp = options_.clock();
  return r;
}

void Harness::score(ExperimentRecord& r, const ModelEntry& m, const train::SeedRun& run,
                    const std::string& train_dataset, std::size_t train_resolution, const DatasetBundle& test) const {
  r.train_seconds = run.train_seconds;
  const auto& idx = test.splits.test;
  r.samples = idx.size();
  if (run.failed) {
    r.failed = true;
    r.error = run.error + " (last finite epoch " + std::to_string(run.last_finite_epoch) + ")";
    r.mean = r.std = kNaN;
    return;
  }
  try {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<double>> preds;
    if (m.oracle()) {
      preds = OracleTable(catalog_.normalized(train_dataset, train_resolution)).predict(test, idx);
      r.state_hash = "oracle";
    } else {
      preds = train::predict(*run.model, test, idx, options_.train.batch_size);
      r.state_hash = zoo::param_hash(*run.model);
    }
    r.inference_seconds = seconds_since(t0);
    const auto ev = train::score_predictions(preds, test, idx);
    std::vector<double> finite;
    for (double s : ev.scores)
      if (!std::isnan(s)) finite.push_back(s);
    r.excluded = ev.excluded;
    r.mean = ev.mean;
    r.std = finite.empty() ? kNaN : train::mean_std(finite).std;
  } catch (const Error& e) {
    r.failed = true;
    r.error = e.what();
    r.mean = r.std = kNaN;
  }
}

std::vector<ExperimentRecord> Harness::run_accuracy(const std::vector<ModelEntry>& models,
                                                    const std::vector<std::string>& datasets) {
  std::vector<ExperimentRecord> out;
  for (const auto& d : datasets) {
    const DatasetBundle& data = catalog_.normalized(d);
    for (const auto& m : models)
      for (std::uint64_t seed : options_.train.seeds) {
        auto r = base_record(m, d, Task::Accuracy, "", seed);
        score(r, m, *state(m, d, 0, seed), d, 0, data);
        out.push_back(std::move(r));
      }
  }
  return out;
}

std::vector<ExperimentRecord> Harness::run_noise(const std::vector<ModelEntry>& models, const std::string& dataset,
                                                 const std::vector<double>& levels) {
  for (double g : levels)
    if (!(g >= 0.0)) throw ConfigError("noise level must be >= 0, got " + format_parameter(g));
  const DatasetBundle& clean = catalog_.normalized(dataset);
  const DatasetBundle& raw = catalog_.raw(dataset);
  const std::uint64_t noise_seed = derive_seed(options_.master_seed, 0x4015E);
  std::vector<ExperimentRecord> out;
  for (double g : levels) {
    auto noisy = add_noise(raw, raw.splits.test, g, noise_seed);
    const DatasetBundle test = normalize(noisy.bundle, *clean.norm);
    for (const auto& m : models)
      for (std::uint64_t seed : options_.train.seeds) {
        auto r = base_record(m, dataset, Task::Noise, format_parameter(g), seed);
        score(r, m, *state(m, dataset, 0, seed), dataset, 0, test);
        r.flagged = noisy.flagged;
        out.push_back(std::move(r));
      }
  }
  return out;
}

std::vector<ExperimentRecord> Harness::run_data_efficiency(const std::vector<ModelEntry>& models,
                                                           const std::string& dataset,
                                                           const std::vector<double>& fractions) {
  const DatasetBundle& data = catalog_.normalized(dataset);
  const auto subsets = nested_subsets(data, fractions, options_.master_seed);
  std::vector<std::size_t> order(fractions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fractions[a] < fractions[b]; });
  for (std::size_t k = 1; k < order.size(); ++k) check_subset(subsets[order[k - 1]], subsets[order[k]]);
  std::vector<ExperimentRecord> out;
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    check_subset(subsets[f], data.splits.train);
    for (const auto& m : models)
      for (std::uint64_t seed : options_.train.seeds) {
        auto r = base_record(m, dataset, Task::DataEfficiency, format_parameter(fractions[f]), seed);
        score(r, m, *state(m, dataset, 0, seed, &subsets[f]), dataset, 0, data);
        out.push_back(std::move(r));
      }
  }
  return out;
}

std::vector<ExperimentRecord> Harness::run_super_resolution(const std::vector<ModelEntry>& models,
                                                            const std::string& dataset,
                                                            std::size_t train_resolution,
                                                            const std::vector<std::size_t>& test_resolutions) {
  for (const auto& m : models)
    if (m.spec.family != "fno" && m.spec.family != "gnot")
      throw ConfigError("super-resolution supports only fno and gnot models, not '" + m.spec.family + "'");
  // Resolution 0 addresses the dataset as configured so its states are shared with the other tasks.
  const std::size_t native = catalog_.raw(dataset).grid.shape.at(0);
  const auto key_of = [&](std::size_t res) { return res == native ? std::size_t{0} : res; };
  if (!train_resolution) train_resolution = native;
  const std::size_t train_key = key_of(train_resolution);
  const DatasetBundle& train_data = catalog_.normalized(dataset, train_key);
  std::vector<const DatasetBundle*> tests;
  std::vector<DatasetBundle> owned;
  owned.reserve(test_resolutions.size());
  for (std::size_t res : test_resolutions) {
    if (res == train_resolution) {
      tests.push_back(&train_data);
      continue;
    }
    const DatasetBundle& raw = catalog_.raw(dataset, key_of(res));
    if (raw.samples.size() != train_data.samples.size() || raw.splits != train_data.splits)
      throw AlignmentError("resolution " + std::to_string(res) + " bundle is not aligned with the training bundle");
    owned.push_back(normalize(raw, *train_data.norm));
    tests.push_back(&owned.back());
  }
  std::vector<ExperimentRecord> out;
  for (const auto& m : models)
    for (std::uint64_t seed : options_.train.seeds) {
      const auto run = state(m, dataset, train_key, seed);
      const std::string before = run->failed ? "" : zoo::param_hash(*run->model);
      for (std::size_t k = 0; k < tests.size(); ++k) {
        auto r = base_record(m, dataset, Task::SuperResolution, std::to_string(test_resolutions[k]), seed);
        score(r, m, *run, dataset, train_key, *tests[k]);
        if (!run->failed && r.state_hash != before)
          throw IntegrityError("parameters changed during zero-shot evaluation");
        out.push_back(std::move(r));
      }
    }
  return out;
}

std::vector<ExperimentRecord> Harness::run_ood_swap(const std::vector<ModelEntry>& models,
                                                    const std::array<std::string, 2>& pair) {
  const DatasetBundle& a = catalog_.normalized(pair[0]);
  const DatasetBundle& b = catalog_.normalized(pair[1]);
  const DatasetBundle& ra = catalog_.raw(pair[0]);
  const DatasetBundle& rb = catalog_.raw(pair[1]);
  bool same = ra.samples.size() == rb.samples.size() && ra.grid == rb.grid && ra.splits == rb.splits;
  for (std::size_t i = 0; same && i < ra.samples.size(); ++i) same = ra.samples[i].input == rb.samples[i].input;
  if (!same) throw ConfigError("ood-swap datasets '" + pair[0] + "' and '" + pair[1] + "' do not share inputs");
  const DatasetBundle* bundles[2] = {&a, &b};
  std::vector<ExperimentRecord> out;
  for (const auto& m : models)
    for (std::uint64_t seed : options_.train.seeds)
      for (int tr = 0; tr < 2; ++tr) {
        const auto run = state(m, pair[tr], 0, seed);
        for (int te = 0; te < 2; ++te) {
          auto r = base_record(m, pair[te], Task::OodSwap, "train=" + pair[tr], seed);
          score(r, m, *run, pair[tr], 0, *bundles[te]);
          out.push_back(std::move(r));
        }
      }
  return out;
}

std::vector<ExperimentRecord> Harness::run_timing(const std::vector<ModelEntry>& models, const std::string& dataset,
                                                  std::size_t samples, std::size_t repeats) {
  if (samples == 0 || repeats == 0) throw ConfigError("timing needs at least one sample and one repeat");
  const DatasetBundle& data = catalog_.normalized(dataset);
  if (data.splits.test.size() < samples)
    throw ConfigError("timing needs " + std::to_string(samples) + " test samples, dataset '" + dataset + "' has " +
                      std::to_string(data.splits.test.size()));
  DatasetBundle timed = data;
  timed.splits.test.resize(samples);
  const std::size_t batch = options_.train.batch_size;
  const std::vector<std::size_t> warm(timed.splits.test.begin(),
                                      timed.splits.test.begin() + std::ptrdiff_t(std::min(batch, samples)));
  std::vector<ExperimentRecord> out;
  for (const auto& m : models)
    for (std::uint64_t seed : options_.train.seeds) {
      const auto run = state(m, dataset, 0, seed);
      auto r = base_record(m, dataset, Task::Timing, grid_label(data.grid), seed);
      score(r, m, *run, dataset, 0, timed);
      if (!r.failed && !m.oracle()) {
        const bool contended = active_timing_runs.fetch_add(1) > 0;
        train::predict(*run->model, timed, warm, batch);
        for (std::size_t k = 0; k < repeats; ++k) {
          const auto t0 = std::chrono::steady_clock::now();
          train::predict(*run->model, timed, timed.splits.test, batch);
          r.inference_repeats.push_back(seconds_since(t0));
        }
        r.contention = contended || active_timing_runs.load() > 1;
        active_timing_runs.fetch_sub(1);
        auto sorted = r.inference_repeats;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        r.inference_seconds = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
      }
      out.push_back(std::move(r));
    }
  return out;
}

std::vector<ExperimentRecord> Harness::run(const TaskSpec& task, const std::vector<ModelEntry>& models) {
  task.validate();
  std::vector<ModelEntry> chosen;
  for (const auto& name : task.models) {
    auto it = std::find_if(models.begin(), models.end(), [&](const ModelEntry& m) { return m.name == name; });
    if (it == models.end()) throw ConfigError("task refers to unknown model '" + name + "'");
    chosen.push_back(*it);
  }
  auto single = [&]() -> const std::string& {
    if (task.datasets.size() != 1)
      throw ConfigError(to_string(task.task) + " task takes exactly one dataset");
    return task.datasets[0];
  };
  switch (task.task) {
    case Task::Accuracy: return run_accuracy(chosen, task.datasets);
    case Task::Noise: return run_noise(chosen, single(), task.noise_levels);
    case Task::DataEfficiency: return run_data_efficiency(chosen, single(), task.fractions);
    case Task::SuperResolution:
      return run_super_resolution(chosen, single(), task.train_resolution, task.test_resolutions);
    case Task::OodSwap: return run_ood_swap(chosen, task.pair);
    case Task::Timing: return run_timing(chosen, single(), task.timing_samples, task.timing_repeats);
  }
  throw ConfigError("unhandled task");
}

}  // namespace opbench::harness

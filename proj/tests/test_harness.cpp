#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "opbench/errors.hpp"
#include "opbench/harness/harness.hpp"
#include "opbench/util/random.hpp"

using namespace opbench;
using namespace opbench::harness;

namespace {

/// Random 2D inputs with a smooth nonlinear response; `scale` multiplies the outputs.
DatasetBundle synthetic(const DatasetSpec& spec, std::size_t n, double scale = 1.0, double response = 1.0) {
  DatasetBundle b;
  b.name = spec.name;
  b.grid = GridSpec::square(n);
  b.input_channels = {"a"};
  b.output_channels = {"u"};
  Rng rng(spec.seed);
  for (std::size_t k = 0; k < spec.count; ++k) {
    FieldSample s;
    s.grid = b.grid;
    const double amp = rng.uniform(0.5, 1.5), phase = rng.uniform(0.0, 6.28);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double x = double(i) / double(n - 1), y = double(j) / double(n - 1);
        const double a = amp * std::sin(6.28 * x + phase) * std::cos(3.14 * y) + 0.1 * rng.normal();
        s.input.push_back(a);
        s.output.push_back(scale * (response * a * a + 0.5 * a + x));
      }
    b.samples.push_back(std::move(s));
  }
  b.splits = train::split_dataset(spec.count, spec.seed, spec.split);
  return b;
}

DatasetSpec synth_spec(const std::string& name, std::size_t count, std::size_t res, std::uint64_t seed = 5) {
  DatasetSpec d;
  d.name = name;
  d.source = "generate";
  d.count = count;
  d.resolution = res;
  d.seed = seed;
  return d;
}

DataCatalog synthetic_catalog(std::vector<DatasetSpec> specs) {
  return DataCatalog(std::move(specs), [](const DatasetSpec& s, std::size_t res) {
    if (s.name == "huge") return synthetic(s, res, 1e200);
    if (s.name == "twin") return synthetic(s, res, 7.0, -1.0);
    return synthetic(s, res);
  });
}

HarnessOptions quick(std::size_t epochs = 3, std::vector<std::uint64_t> seeds = {0, 1}) {
  HarnessOptions o;
  o.train.epochs = epochs;
  o.train.lr = 1e-2;
  o.train.batch_size = 8;
  o.train.seeds = std::move(seeds);
  o.config_hash = "test";
  o.clock = [] { return std::string("t"); };
  return o;
}

ModelEntry entry(const std::string& family, nlohmann::json options = nlohmann::json::object()) {
  options["family"] = family;
  return ModelEntry::from_json(options);
}

const nlohmann::json kTinyFno{{"width", 4}, {"depth", 1}, {"modes", 2}, {"proj_width", 4}};

void check_same(const std::vector<ExperimentRecord>& a, const std::vector<ExperimentRecord>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].model == b[i].model);
    CHECK(a[i].seed == b[i].seed);
    CHECK(a[i].same_metrics(b[i]));
  }
}

}  // namespace

TEST_CASE("add_noise: zero level leaves inputs bit-identical") {
  std::vector<double> x{1.0, -2.0, 0.25, 3.5};
  const auto before = x;
  CHECK(add_noise(x, 0.0, 9));
  CHECK(x == before);
}

TEST_CASE("add_noise: relative noise magnitude matches the level") {
  const double gamma = 0.05;
  std::vector<double> x(100000);
  Rng rng(3);
  for (auto& v : x) v = 2.0 + 3.0 * rng.uniform(-1, 1);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(x.size());
  double sq = 0.0;
  for (double v : x) sq += (v - mean) * (v - mean);
  const double sigma = std::sqrt(sq / double(x.size()));
  auto y = x;
  REQUIRE(add_noise(y, gamma, 11));
  double s2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s2 += std::pow((y[i] - x[i]) / sigma, 2);
  const double empirical = std::sqrt(s2 / double(x.size()));
  CHECK(std::abs(empirical / gamma - 1.0) < 0.02);
  auto z = x;
  add_noise(z, gamma, 11);
  CHECK(z == y);
}

TEST_CASE("add_noise: zero-variance samples are unchanged and flagged; negative level rejected") {
  std::vector<double> c(10, 4.0);
  CHECK_FALSE(add_noise(c, 0.1, 1));
  CHECK(c == std::vector<double>(10, 4.0));
  std::vector<double> x{1.0, 2.0};
  CHECK_THROWS_AS(add_noise(x, -0.1, 1), ConfigError);

  DatasetSpec s = synth_spec("d", 10, 4);
  auto b = synthetic(s, 4);
  b.samples[b.splits.test[0]].input.assign(16, 1.0);
  const auto noisy = add_noise(b, b.splits.test, 0.1, 2);
  CHECK(noisy.flagged == 1);
  CHECK(noisy.bundle.samples[b.splits.test[0]].input == std::vector<double>(16, 1.0));
  CHECK(noisy.bundle.samples[b.splits.train[0]].input == b.samples[b.splits.train[0]].input);
  CHECK(noisy.bundle.samples[b.splits.test[0]].output == b.samples[b.splits.test[0]].output);
}

TEST_CASE("nested subsets: counts, nestedness, train-only") {
  DatasetBundle b;
  b.samples.resize(1700);
  b.splits = train::split_dataset(1700, 4);
  const auto subs = nested_subsets(b, {0.25, 0.5, 1.0}, 7);
  CHECK(subs[0].size() == 425);
  CHECK(subs[1].size() == 850);
  CHECK(subs[2] == b.splits.train);
  const std::set<std::size_t> half(subs[1].begin(), subs[1].end());
  for (std::size_t i : subs[0]) CHECK(half.count(i) == 1);
  const std::set<std::size_t> tr(b.splits.train.begin(), b.splits.train.end());
  for (std::size_t i : subs[1]) CHECK(tr.count(i) == 1);
  CHECK(nested_subsets(b, {0.25}, 7) == std::vector<std::vector<std::size_t>>{subs[0]});

  DatasetBundle small;
  small.samples.resize(10);
  small.splits = train::split_dataset(10, 1);
  CHECK_THROWS_AS(nested_subsets(small, {0.01}, 1), ConfigError);
  CHECK_THROWS_AS(nested_subsets(small, {0.0}, 1), ConfigError);
  CHECK_THROWS_AS(nested_subsets(small, {1.5}, 1), ConfigError);
}

TEST_CASE("accuracy: oracle row is exactly zero and record count is models x datasets x seeds") {
  auto cat = synthetic_catalog({synth_spec("a", 30, 6), synth_spec("b", 30, 6, 8)});
  Harness h(cat, quick(2, {0, 1, 2}));
  const auto recs = h.run_accuracy({entry("oracle"), entry("fno", kTinyFno)}, {"a", "b"});
  CHECK(recs.size() == 2 * 2 * 3);
  std::set<std::string> keys;
  for (const auto& r : recs) {
    keys.insert(r.key());
    CHECK_FALSE(r.failed);
    CHECK(r.samples == 3);
    if (r.model == "oracle") {
      CHECK(r.mean == 0.0);
      CHECK(r.std == 0.0);
    } else {
      CHECK(r.mean > 0.0);
    }
  }
  CHECK(keys.size() == recs.size());
}

TEST_CASE("accuracy: a diverging seed is flagged and the suite continues") {
  auto cat = synthetic_catalog({synth_spec("huge", 20, 4)});
  Harness h(cat, quick(2, {0}));
  const auto recs = h.run_accuracy({entry("fno", kTinyFno), entry("oracle")}, {"huge"});
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].failed);
  CHECK(std::isnan(recs[0].mean));
  CHECK(recs[0].error.find("last finite epoch -1") != std::string::npos);
  CHECK_FALSE(recs[1].failed);
}

TEST_CASE("states are cached across tasks") {
  auto cat = synthetic_catalog({synth_spec("a", 30, 6)});
  Harness h(cat, quick(2, {0}));
  const auto m = entry("fno", kTinyFno);
  h.run_accuracy({m}, {"a"});
  CHECK(h.trainings() == 1);
  h.run_noise({m}, "a", {0.0, 0.1});
  h.run_timing({m}, "a", 3, 2);
  CHECK(h.trainings() == 1);
}

TEST_CASE("noise: level 0 reproduces accuracy; parameters follow the level list; weak monotonicity") {
  auto cat = synthetic_catalog({synth_spec("a", 40, 6)});
  Harness h(cat, quick(5));
  const auto models = std::vector<ModelEntry>{entry("fno", kTinyFno), entry("fnn", {{"width", 8}, {"depth", 2}})};
  const auto acc = h.run_accuracy(models, {"a"});
  check_same(h.run_noise(models, "a", {0.0}), acc);

  const std::vector<double> levels{0.0, 0.02, 0.5};
  const auto recs = h.run_noise(models, "a", levels);
  REQUIRE(recs.size() == levels.size() * models.size() * 2);
  std::vector<std::string> params;
  for (const auto& r : recs)
    if (params.empty() || params.back() != r.parameter) params.push_back(r.parameter);
  CHECK(params == std::vector<std::string>{"0.0", "0.02", "0.5"});
  for (const auto& m : models) {
    double lo = 0.0, hi = 0.0;
    for (const auto& r : recs) {
      if (r.model != m.name) continue;
      if (r.parameter == "0.0") lo += r.mean;
      if (r.parameter == "0.5") hi += r.mean;
    }
    CHECK(lo <= hi);
  }
  CHECK_THROWS_AS(h.run_noise(models, "a", {-0.01}), ConfigError);
}

TEST_CASE("data efficiency: fraction 1 retrains to the accuracy record; val/test unchanged") {
  auto cat = synthetic_catalog({synth_spec("a", 40, 6)});
  const auto m = entry("fno", kTinyFno);
  Harness first(cat, quick(3));
  const auto acc = first.run_accuracy({m}, {"a"});
  Harness fresh(cat, quick(3));
  const auto full = fresh.run_data_efficiency({m}, "a", {1.0});
  CHECK(fresh.trainings() == 2);
  check_same(full, acc);

  const auto recs = fresh.run_data_efficiency({m}, "a", {0.25, 0.5});
  REQUIRE(recs.size() == 4);
  CHECK(recs[0].parameter == "0.25");
  CHECK(recs[0].samples == acc[0].samples);
  CHECK_FALSE(recs[0].same_metrics(acc[0]));
  CHECK_THROWS_AS(fresh.run_data_efficiency({m}, "a", {0.001}), ConfigError);
}

TEST_CASE("super-resolution: restricted families, zero-shot hash constancy, train-res identity") {
  DatasetSpec s = synth_spec("a", 30, 9);
  auto cat = synthetic_catalog({s});
  Harness h(cat, quick(3, {0}));
  const auto m = entry("fno", kTinyFno);
  CHECK_THROWS_AS(h.run_super_resolution({entry("fnn")}, "a", 9, {9, 17}), ConfigError);
  CHECK_THROWS_AS(h.run_super_resolution({entry("sno")}, "a", 9, {9}), ConfigError);
  const auto acc = h.run_accuracy({m}, {"a"});
  const auto recs = h.run_super_resolution({m}, "a", 9, {9, 17});
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].parameter == "9");
  CHECK(recs[1].parameter == "17");
  CHECK(recs[0].same_metrics(acc[0]));
  CHECK(recs[0].state_hash == recs[1].state_hash);
  CHECK_FALSE(recs[1].failed);
  CHECK(std::isfinite(recs[1].mean));
  CHECK(h.trainings() == 1);
}

TEST_CASE("super-resolution: misaligned bundles are rejected") {
  DatasetSpec s = synth_spec("a", 30, 9);
  DataCatalog cat({s}, [](const DatasetSpec& d, std::size_t res) {
    auto spec = d;
    if (res != 9) spec.count = 20;
    return synthetic(spec, res);
  });
  Harness h(cat, quick(1, {0}));
  CHECK_THROWS_AS(h.run_super_resolution({entry("fno", kTinyFno)}, "a", 9, {9, 17}), AlignmentError);
}

TEST_CASE("ood swap: 2x2 grid per seed, diagonal equals accuracy, mismatched inputs rejected") {
  auto cat = synthetic_catalog({synth_spec("base", 30, 6), synth_spec("twin", 30, 6), synth_spec("other", 30, 6, 9)});
  Harness h(cat, quick(3));
  const auto m = entry("fno", kTinyFno);
  const auto recs = h.run_ood_swap({m}, {"base", "twin"});
  CHECK(recs.size() == 4 * 2);
  const auto acc_base = h.run_accuracy({m}, {"base"});
  const auto acc_twin = h.run_accuracy({m}, {"twin"});
  for (const auto& r : recs) {
    if (r.parameter == "train=base" && r.dataset == "base")
      CHECK(r.same_metrics(r.seed == 0 ? acc_base[0] : acc_base[1]));
    if (r.parameter == "train=twin" && r.dataset == "twin")
      CHECK(r.same_metrics(r.seed == 0 ? acc_twin[0] : acc_twin[1]));
  }
  CHECK_THROWS_AS(h.run_ood_swap({m}, {"base", "other"}), ConfigError);
}

TEST_CASE("ood swap: cross predictions are denormalized with the test statistics") {
  auto cat = synthetic_catalog({synth_spec("base", 30, 6), synth_spec("twin", 30, 6)});
  Harness h(cat, quick(0, {0}));
  const auto recs = h.run_ood_swap({entry("oracle")}, {"base", "twin"});
  REQUIRE(recs.size() == 4);
  CHECK(recs[0].mean == 0.0);
  CHECK(recs[1].mean > 0.1);
  CHECK(recs[3].mean == 0.0);
}

TEST_CASE("timing: positive finite timings, stored repeats and median") {
  auto cat = synthetic_catalog({synth_spec("a", 60, 6)});
  Harness h(cat, quick(1, {0}));
  const auto recs = h.run_timing({entry("fno", kTinyFno)}, "a", 6, 5);
  REQUIRE(recs.size() == 1);
  const auto& r = recs[0];
  CHECK(r.parameter == "6x6");
  REQUIRE(r.inference_repeats.size() == 5);
  for (double t : r.inference_repeats) CHECK((t > 0.0 && std::isfinite(t)));
  auto sorted = r.inference_repeats;
  std::sort(sorted.begin(), sorted.end());
  CHECK(r.inference_seconds == sorted[2]);
  CHECK(r.train_seconds > 0.0);
  CHECK_FALSE(r.contention);
  CHECK_THROWS_AS(h.run_timing({entry("fno", kTinyFno)}, "a", 7, 5), ConfigError);
}

TEST_CASE("timing: fnn inference is faster than unet at default sizes") {
  auto cat = synthetic_catalog({synth_spec("a", 200, 47)});
  Harness h(cat, quick(0, {0}));
  const auto recs = h.run_timing({entry("fnn"), entry("unet")}, "a", 20, 5);
  REQUIRE(recs.size() == 2);
  MESSAGE("fnn " << recs[0].inference_seconds << " s, unet " << recs[1].inference_seconds << " s");
  CHECK(recs[0].inference_seconds < recs[1].inference_seconds);
}

TEST_CASE("records: canonical json round trip, volatile split, NaN as null") {
  ExperimentRecord r;
  r.model = "fno";
  r.dataset = "darcy";
  r.task = "noise";
  r.parameter = "0.01";
  r.seed = 2;
  r.mean = 0.0108;
  r.std = std::numeric_limits<double>::quiet_NaN();
  r.samples = 170;
  r.config_hash = "abc";
  r.train_seconds = 1.5;
  r.inference_repeats = {0.1, 0.2};
  r.timestamp = "2024-01-01T00:00:00Z";
  const auto j = r.to_json();
  CHECK(j.at("std").is_null());
  const auto back = ExperimentRecord::from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.same_metrics(r));
  CHECK(back.inference_repeats == r.inference_repeats);
  CHECK(back.to_json().dump() == j.dump());
  const auto stable = r.to_json(false);
  CHECK_FALSE(stable.contains("timestamp"));
  CHECK_FALSE(stable.contains("train_seconds"));
  auto merged = ExperimentRecord::from_json(stable);
  merged.apply_volatile(r.volatile_json());
  CHECK(merged.to_json().dump() == j.dump());
  ExperimentRecord other = r;
  other.seed = 3;
  CHECK(other.key() != r.key());
}

TEST_CASE("task specs: validation and unknown keys") {
  const auto t = TaskSpec::from_json({{"task", "noise"}, {"models", {"fno"}}, {"datasets", {"darcy"}}});
  CHECK(t.noise_levels == kDefaultNoiseLevels);
  CHECK(TaskSpec::from_json(t.to_json()).to_json() == t.to_json());
  CHECK_THROWS_AS(TaskSpec::from_json({{"task", "bogus"}, {"models", {"fno"}}}), ConfigError);
  CHECK_THROWS_AS(TaskSpec::from_json({{"task", "noise"}, {"models", {"fno"}}, {"datasets", {"d"}}, {"noise_levels", {-1}}}),
                  ConfigError);
  CHECK_THROWS_AS(TaskSpec::from_json({{"task", "accuracy"}, {"models", {"fno"}}, {"datasets", {"d"}}, {"typo", 1}}),
                  ConfigError);
  CHECK_THROWS_AS(ModelEntry::from_json({{"family", "oracle"}, {"width", 3}}), ConfigError);
  CHECK_THROWS_AS(ModelEntry::from_json({{"family", "fno"}, {"wdth", 3}}), ConfigError);
  CHECK_THROWS_AS(DatasetSpec::from_json({{"name", "x"}, {"source", "ftp"}}), ConfigError);
}

TEST_CASE("run dispatches on the task kind and resolves model names") {
  auto cat = synthetic_catalog({synth_spec("a", 30, 6)});
  Harness h(cat, quick(1, {0}));
  const std::vector<ModelEntry> models{entry("oracle"), entry("fno", kTinyFno)};
  TaskSpec t;
  t.task = Task::Accuracy;
  t.models = {"oracle"};
  t.datasets = {"a"};
  CHECK(h.run(t, models).size() == 1);
  t.models = {"missing"};
  CHECK_THROWS_AS(h.run(t, models), ConfigError);
}

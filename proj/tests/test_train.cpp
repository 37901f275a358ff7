#include <doctest.h>

#include <cmath>
#include <set>

#include "opbench/errors.hpp"
#include "opbench/forge/generate.hpp"
#include "opbench/train/train.hpp"
#include "opbench/util/random.hpp"
#include "opbench/zoo/families.hpp"

using namespace opbench;
using namespace opbench::train;

namespace {

/// Samples whose output is an exact affine map of (input, coordinate).
DatasetBundle linear_bundle(std::size_t count, std::uint64_t seed) {
  DatasetBundle b;
  b.name = "linear";
  b.grid = GridSpec::line(16);
  b.input_channels = {"a"};
  b.output_channels = {"u"};
  const auto coords = unit_coordinates(b.grid);
  Rng rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    FieldSample s;
    s.grid = b.grid;
    for (std::size_t p = 0; p < 16; ++p) {
      const double a = rng.uniform(-1, 1) + 0.5 * double(k % 3);
      s.input.push_back(a);
      s.output.push_back(2.0 * a - 1.5 * coords[p] + 3.0);
    }
    b.samples.push_back(std::move(s));
  }
  b.splits = split_dataset(count, seed);
  return b;
}

TrainConfig quick(std::size_t epochs, double lr = 1e-2) {
  TrainConfig c;
  c.epochs = epochs;
  c.lr = lr;
  c.seeds = {0};
  return c;
}

const zoo::ModelSpec kLinear{"fnn", {{"depth", 0}}};

}  // namespace

TEST_CASE("split_dataset: counts, determinism, disjointness") {
  const auto s = split_dataset(1700, 3);
  CHECK(s.train.size() == 1360);
  CHECK(s.val.size() == 170);
  CHECK(s.test.size() == 170);
  s.validate(1700);
  const auto t = split_dataset(10, 3);
  CHECK(t.train.size() == 8);
  CHECK(t.val.size() == 1);
  CHECK(t.test.size() == 1);
  CHECK(split_dataset(1700, 3) == s);
  CHECK_FALSE(split_dataset(1700, 4) == s);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 1700);
  CHECK_THROWS_AS(split_dataset(5, 1), ConfigError);
  CHECK_THROWS_AS(split_dataset(100, 1, {0.8, 0.1, 0.2}), ConfigError);
}

TEST_CASE("train config: json round trip and validation") {
  TrainConfig c;
  c.optimizer = OptimizerKind::AdamW;
  c.schedule = ScheduleKind::OneCycle;
  c.clip_norm = 2.0;
  c.seeds = {4, 5};
  const auto back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(TrainConfig{}.batch_size == 20);
  CHECK(TrainConfig{}.seeds.size() == 3);
  CHECK_THROWS_AS(TrainConfig::from_json({{"lr", 0.5}}), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json({{"batch_size", 0}}), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json({{"seeds", nlohmann::json::array()}}), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json({{"optimizer", "sgd"}}), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json({{"momentum", 0.9}}), ConfigError);
}

TEST_CASE("learning-rate schedules") {
  TrainConfig c;
  c.lr = 1e-3;
  CHECK(learning_rate(c, 0, 0, 1000) == 1e-3);
  CHECK(learning_rate(c, 99, 0, 1000) == 1e-3);
  CHECK(learning_rate(c, 100, 0, 1000) == 5e-4);
  CHECK(learning_rate(c, 250, 0, 1000) == 2.5e-4);
  c.schedule = ScheduleKind::OneCycle;
  double prev = 0.0;
  for (std::size_t i = 0; i < 300; ++i) {
    const double lr = learning_rate(c, 0, i, 1000);
    CHECK(lr > prev);
    prev = lr;
  }
  CHECK(learning_rate(c, 0, 300, 1000) == doctest::Approx(1e-3));
  for (std::size_t i = 301; i < 1000; ++i) {
    const double lr = learning_rate(c, 0, i, 1000);
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK(learning_rate(c, 0, 999, 1000) < 1e-8);
}

TEST_CASE("adam and adamw single steps") {
  TrainConfig c;
  ag::Tensor w = ag::parameter({2}, {1.0, -2.0});
  Optimizer adam({w}, c);
  ag::backward(ag::sum(ag::square(w)));
  adam.step(0.1);
  CHECK(w.value()[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(w.value()[1] == doctest::Approx(-1.9).epsilon(1e-7));

  c.optimizer = OptimizerKind::AdamW;
  c.weight_decay = 0.5;
  ag::Tensor v = ag::parameter({1}, {2.0});
  Optimizer adamw({v}, c);
  ag::backward(ag::sum(v));
  adamw.step(0.1);
  CHECK(v.value()[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0 - 0.1).epsilon(1e-7));

  ag::Tensor g = ag::parameter({2}, {3.0, 4.0});
  Optimizer clip({g}, c);
  ag::backward(ag::sum(ag::mul(g, ag::constant({2}, {3.0, 4.0}))));
  CHECK(clip.clip(1.0) == doctest::Approx(5.0));
  CHECK(g.grad()[0] == doctest::Approx(0.6));
  CHECK(g.grad()[1] == doctest::Approx(0.8));
}

TEST_CASE("evaluate: oracle, zero predictor, batch invariance, degenerate samples") {
  const auto raw = linear_bundle(40, 1);
  const auto b = normalize(raw);
  const auto& test = b.splits.test;
  std::vector<std::vector<double>> truth, zero;
  for (std::size_t i : test) {
    truth.push_back(denormalize(b.samples[i].output, b.norm->output));
    zero.emplace_back(b.grid.points(), 0.0);
  }
  CHECK(score_predictions(truth, b, test).mean == 0.0);
  CHECK(score_predictions(zero, b, test).mean == 1.0);

  auto m = zoo::make_model({"fnn", {{"width", 8}, {"depth", 2}}}, zoo::context_for(b), 3);
  std::vector<std::size_t> all(40);
  for (std::size_t i = 0; i < 40; ++i) all[i] = i;
  const double m1 = evaluate(*m, b, all, 1).mean, m20 = evaluate(*m, b, all, 20).mean;
  CHECK(std::abs(m1 - m20) < 1e-12);
  CHECK(evaluate(*m, b, all, 7).scores.size() == 40);

  auto degenerate = raw;
  std::fill(degenerate.samples[test[0]].output.begin(), degenerate.samples[test[0]].output.end(), 0.0);
  const auto nb = normalize(degenerate, *b.norm);
  const auto r = evaluate(*m, nb, test);
  CHECK(r.excluded == 1);
  CHECK(std::isnan(r.scores[0]));
  CHECK(std::isfinite(r.mean));
  CHECK_THROWS_AS(evaluate(*m, raw, test), ConfigError);
}

TEST_CASE("train: zero epochs returns the initial state") {
  const auto b = normalize(linear_bundle(40, 2));
  const auto run = train_seed(kLinear, b, quick(0), 5);
  auto fresh = zoo::make_model(kLinear, zoo::context_for(b), derive_seed(5, 1));
  CHECK(zoo::param_hash(*run.model) == zoo::param_hash(*fresh));
  CHECK(evaluate(*run.model, b, b.splits.test).mean == evaluate(*fresh, b, b.splits.test).mean);
  CHECK(run.val_curve.size() == 1);
  CHECK(run.best_epoch == 0);
}

TEST_CASE("train: linear model fits exactly-linear data") {
  const auto b = normalize(linear_bundle(60, 3));
  const auto run = train_seed(kLinear, b, quick(200, 2e-2), 1);
  const double train_err = evaluate(*run.model, b, b.splits.train).mean;
  INFO("train rel-L2 " << train_err);
  CHECK(train_err < 1e-3);
  CHECK(run.val_curve.size() == 201);
  double best = run.val_curve[0];
  std::size_t arg = 0;
  for (std::size_t e = 0; e < run.val_curve.size(); ++e)
    if (run.val_curve[e] < best) best = run.val_curve[arg = e];
  CHECK(run.best_epoch == arg);
  CHECK(evaluate(*run.model, b, b.splits.val).mean == run.val_curve[run.best_epoch]);
}

TEST_CASE("train: identical seeds give bit-identical parameters") {
  const auto b = normalize(linear_bundle(40, 4));
  const zoo::ModelSpec spec{"fnn", {{"width", 8}, {"depth", 2}}};
  const auto a = train_seed(spec, b, quick(5), 9), c = train_seed(spec, b, quick(5), 9);
  CHECK(zoo::param_hash(*a.model) == zoo::param_hash(*c.model));
  CHECK(a.val_curve == c.val_curve);
  CHECK(a.train_curve == c.train_curve);
  const auto d = train_seed(spec, b, quick(5), 10);
  CHECK(zoo::param_hash(*a.model) != zoo::param_hash(*d.model));
}

TEST_CASE("train: seed ensemble statistics and divergence isolation") {
  const auto b = normalize(linear_bundle(40, 5));
  auto cfg = quick(2);
  cfg.seeds = {1, 1};
  const auto r = train::train(kLinear, b, cfg);
  REQUIRE(r.runs.size() == 2);
  std::vector<double> metrics;
  for (const auto& run : r.runs) metrics.push_back(evaluate(*run.model, b, b.splits.test).mean);
  CHECK(mean_std(metrics).std == 0.0);
  CHECK(mean_std({1.0, 3.0}).mean == 2.0);
  CHECK(mean_std({1.0, 3.0}).std == 1.0);

  auto blown = b;
  for (auto& s : blown.norm->output.std) s = 1e308;
  const auto bad = train::train(kLinear, blown, cfg);
  REQUIRE(bad.runs.size() == 2);
  CHECK(bad.runs[0].failed);
  CHECK(bad.runs[0].last_finite_epoch == -1);
  CHECK_THROWS_AS(train_seed(kLinear, blown, cfg, 1), TrainingError);
}

TEST_CASE("cgan with zero adversarial weight trains like a plain unet") {
  auto raw = forge::generate_dataset("darcy", 20, 8, 1);
  raw.splits = split_dataset(raw.samples.size(), 1);
  const auto b = normalize(raw);
  const nlohmann::json o{{"width", 2}, {"levels", 1}};
  nlohmann::json g = o;
  g["lambda_adv"] = 0.0;
  g["disc_width"] = 2;
  const auto unet = train_seed({"unet", o}, b, quick(3, 1e-3), 2);
  const auto gan = train_seed({"cgan", g}, b, quick(3, 1e-3), 2);
  CHECK(unet.val_curve.size() == gan.val_curve.size());
  for (std::size_t e = 0; e < unet.val_curve.size(); ++e)
    CHECK(std::abs(unet.val_curve[e] - gan.val_curve[e]) < 1e-12);
  for (std::size_t i = 0; i < unet.model->params().size(); ++i)
    CHECK(unet.model->params()[i].value.value() == gan.model->params()[i].value.value());

  g["lambda_adv"] = 0.1;
  const auto adv = train_seed({"cgan", g}, b, quick(2, 1e-3), 2);
  CHECK(std::isfinite(adv.val_curve.back()));
}

TEST_CASE("oformer latent rollout trains against stored snapshots") {
  auto raw = forge::generate_dataset("burgers", 20, 32, 2);
  raw.splits = split_dataset(raw.samples.size(), 2);
  const auto b = normalize(raw);
  const zoo::ModelSpec spec{"oformer",
                            {{"width", 8}, {"depth", 1}, {"heads", 2}, {"latents", 4}, {"rff", 4}, {"rollout_ratio", 0.3}}};
  const auto run = train_seed(spec, b, quick(2, 1e-3), 1);
  CHECK(run.model->rollout_steps() == 3);
  CHECK(std::isfinite(run.val_curve.back()));
}

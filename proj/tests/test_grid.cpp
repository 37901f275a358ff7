#include <doctest.h>

#include <cmath>
#include <numeric>

#include "opbench/errors.hpp"
#include "opbench/grid/grid.hpp"
#include "opbench/util/random.hpp"

using namespace opbench;

TEST_CASE("make_grid spacing and endpoints") {
  const auto g = make_grid(GridSpec::line(3));
  REQUIRE(g.size() == 1);
  CHECK(g[0] == std::vector<double>{0.0, 0.5, 1.0});

  const auto sq = make_grid(GridSpec::square(2));
  CHECK(sq[0] == std::vector<double>{0.0, 1.0});
  CHECK(sq[1] == std::vector<double>{0.0, 1.0});

  const auto d = make_grid(GridSpec::square(47));
  CHECK(d[0].size() == 47);
  for (std::size_t j = 1; j < 47; ++j) CHECK(d[0][j] - d[0][j - 1] == doctest::Approx(1.0 / 46).epsilon(1e-14));
  CHECK(d[0].back() == 1.0);

  const auto p = make_grid(GridSpec::line(4, GridLayout::Periodic));
  CHECK(p[0] == std::vector<double>{0.0, 0.25, 0.5, 0.75});
  const auto c = make_grid(GridSpec::line(4, GridLayout::CellCentered));
  CHECK(c[0] == std::vector<double>{0.125, 0.375, 0.625, 0.875});
}

TEST_CASE("grid spec validation") {
  CHECK_THROWS_AS(GridSpec::line(1).validate(), ConfigError);
  CHECK_THROWS_AS((GridSpec{{4, 4}, {1.0, 0.0}, GridLayout::Nodal}.validate()), ConfigError);
  CHECK_THROWS_AS((GridSpec{{4, 4}, {1.0}, GridLayout::Nodal}.validate()), ConfigError);
  CHECK_THROWS_AS((GridSpec{{2, 2, 2}, {1, 1, 1}, GridLayout::Nodal}.validate()), ConfigError);
  CHECK_THROWS_AS(make_grid(GridSpec{{0}, {1.0}, GridLayout::Nodal}), ConfigError);
  CHECK(GridSpec::square(47).points() == 47 * 47);
}

TEST_CASE("custom extent scales coordinates") {
  const auto g = make_grid(GridSpec{{5}, {2.0}, GridLayout::Nodal});
  CHECK(g[0] == std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0});
  const auto u = unit_coordinates(GridSpec{{5}, {2.0}, GridLayout::Nodal});
  CHECK(u == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("unit coordinates are row-major with axis 0 first") {
  const auto u = unit_coordinates(GridSpec::square(2));
  CHECK(u == std::vector<double>{0, 0, 0, 1, 1, 0, 1, 1});
}

TEST_CASE("relative_l2 hand fixtures") {
  const std::vector<double> t{3.0, 4.0};
  CHECK(relative_l2(t, t) == 0.0);
  CHECK(relative_l2(std::vector<double>{0, 0}, t) == 1.0);
  CHECK(std::abs(relative_l2(std::vector<double>{1, 1}, std::vector<double>{1, 2}) - 1.0 / std::sqrt(5.0)) < 1e-12);
  CHECK(std::abs(relative_l2(std::vector<double>{6, 8}, t) - 1.0) < 1e-12);
  CHECK(std::abs(relative_l2(std::vector<double>{3, 5}, t) - 0.2) < 1e-12);
  CHECK(std::abs(relative_l2(std::vector<double>{2, 2, 2, 2}, std::vector<double>{1, 1, 1, 1}) - 1.0) < 1e-12);
}

TEST_CASE("relative_l2 rejects degenerate and mismatched references") {
  CHECK_THROWS_AS(relative_l2(std::vector<double>{1, 2}, std::vector<double>{0, 0}), DegenerateReferenceError);
  CHECK_THROWS_AS(relative_l2(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
}

TEST_CASE("relative_l2 scaling properties") {
  Rng rng(11);
  std::vector<double> truth(64), r(64);
  for (auto& v : truth) v = rng.normal();
  for (auto& v : r) v = rng.normal();
  for (double alpha : {-2.0, 0.0, 0.3, 1.0, 1.7, 5.0}) {
    std::vector<double> pred(truth);
    for (auto& v : pred) v *= alpha;
    CHECK(std::abs(relative_l2(pred, truth) - std::abs(alpha - 1.0)) < 1e-12);
  }
  auto shifted = [&](double s) {
    std::vector<double> p(truth);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += s * r[i];
    return relative_l2(p, truth);
  };
  const double base = shifted(1e-3);
  for (double s : {2.0, 10.0, 100.0}) CHECK(shifted(s * 1e-3) == doctest::Approx(s * base).epsilon(1e-9));
}

TEST_CASE("relative_l2_mean averages per-sample scores") {
  const std::vector<std::vector<double>> truth{{3, 4}, {1, 2}};
  const std::vector<std::vector<double>> pred{{0, 0}, {1, 2}};
  CHECK(relative_l2_mean(pred, truth) == 0.5);
}

namespace {
DatasetBundle two_point_bundle(std::vector<double> in_vals, std::vector<double> out_vals) {
  DatasetBundle b;
  b.name = "toy";
  b.grid = GridSpec::line(2);
  b.input_channels = {"a"};
  b.output_channels = {"u"};
  for (std::size_t k = 0; k < in_vals.size(); ++k) {
    FieldSample s;
    s.grid = b.grid;
    s.input = {in_vals[k], in_vals[k]};
    s.output = {out_vals[k], out_vals[k]};
    b.samples.push_back(s);
    b.splits.train.push_back(k);
  }
  return b;
}
}  // namespace

TEST_CASE("normalize two-point statistics") {
  auto b = two_point_bundle({1.0, 3.0}, {5.0, 5.0});
  const auto st = compute_norm_stats(b);
  CHECK(st.input.mean[0] == 2.0);
  CHECK(st.input.std[0] == 1.0);
  CHECK(st.output.std[0] == kStdFloor);
  const auto n = normalize(b);
  CHECK(n.normalized);
  CHECK(n.samples[0].input == std::vector<double>{-1.0, -1.0});
  CHECK(n.samples[1].input == std::vector<double>{1.0, 1.0});
  CHECK(n.samples[0].output == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(normalize(n), ConfigError);
}

TEST_CASE("normalize uses training split only") {
  auto b = two_point_bundle({1.0, 3.0, 100.0}, {0.0, 1.0, 2.0});
  b.splits.train = {0, 1};
  b.splits.test = {2};
  const auto st = compute_norm_stats(b);
  CHECK(st.input.mean[0] == 2.0);
}

TEST_CASE("normalize round trip and monotonicity") {
  Rng rng(5);
  std::vector<double> v(300);
  for (auto& x : v) x = 10.0 * rng.normal() + 3.0;
  const auto st = channel_stats({&v}, 3);
  std::vector<double> n(v);
  normalize_in_place(n, st);
  for (std::size_t i = 3; i < v.size(); ++i)
    if (v[i] > v[i - 3]) CHECK(n[i] > n[i - 3]);
  const auto back = denormalize(n, st);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) < 1e-12 * std::max(1.0, std::abs(v[i])));
}

TEST_CASE("normalize channel mismatch") {
  auto b = two_point_bundle({1.0, 3.0}, {1.0, 2.0});
  NormStats bad{ChannelStats{{0, 0}, {1, 1}}, ChannelStats{{0}, {1}}};
  CHECK_THROWS_AS(normalize(b, bad), ShapeError);
  std::vector<double> v{1, 2, 3};
  CHECK_THROWS_AS(normalize_in_place(v, ChannelStats{{0, 0}, {1, 1}}), ShapeError);
}

TEST_CASE("subsample nodal grids") {
  FieldSample f;
  f.grid = GridSpec::line(129);
  f.input.resize(129);
  std::iota(f.input.begin(), f.input.end(), 0.0);
  f.output = f.input;
  const auto s = subsample(f, 2);
  CHECK(s.grid.shape[0] == 65);
  CHECK(s.input.front() == 0.0);
  CHECK(s.input.back() == 128.0);
  CHECK(subsample(f, 1).input == f.input);

  CHECK_THROWS_AS(subsample_grid(GridSpec::square(141), 3), AlignmentError);
  CHECK(subsample_grid(GridSpec::square(139), 3).shape == std::vector<std::size_t>{47, 47});
  CHECK_THROWS_AS(subsample_grid(GridSpec::line(10, GridLayout::Periodic), 3), AlignmentError);
  CHECK(subsample_grid(GridSpec::line(12, GridLayout::Periodic), 3).shape[0] == 4);
  CHECK_THROWS_AS(subsample_grid(GridSpec::line(12, GridLayout::CellCentered), 2), AlignmentError);
}

TEST_CASE("subsample composes") {
  const GridSpec g = GridSpec::square(25);
  FieldSample f;
  f.grid = g;
  f.in_channels = 2;
  f.input.resize(25 * 25 * 2);
  std::iota(f.input.begin(), f.input.end(), 0.0);
  f.output.assign(25 * 25, 1.0);
  const auto twice = subsample(subsample(f, 2), 3);
  const auto once = subsample(f, 6);
  CHECK(twice.grid == once.grid);
  CHECK(twice.input == once.input);
  CHECK(once.grid.shape[0] == 5);
}

TEST_CASE("field sample invariants") {
  FieldSample f;
  f.grid = GridSpec::line(3);
  f.input = {0, 1, 2};
  f.output = {0, 1};
  CHECK_THROWS_AS(f.validate(), ShapeError);
  f.output = {0, NAN, 1};
  CHECK_THROWS_AS(f.validate(), DomainError);
  f.output = {0, 1, 2};
  CHECK_NOTHROW(f.validate());
}

TEST_CASE("splits must be disjoint and in range") {
  Splits s{{0, 1}, {2}, {3}};
  CHECK_NOTHROW(s.validate(5));
  s.test = {1};
  CHECK_THROWS_AS(s.validate(5), ConfigError);
  s.test = {7};
  CHECK_THROWS_AS(s.validate(5), ConfigError);
}

#include <doctest.h>

#include <cmath>

#include "grad_check.hpp"
#include "opbench/errors.hpp"
#include "opbench/zoo/autograd.hpp"

using namespace opbench;
using ag::Tensor;
using testing::check_gradients;
using testing::random_tensor;

namespace {

void expect_grad(const char* what, const std::vector<std::pair<std::string, Tensor>>& leaves,
                 const std::function<Tensor()>& loss) {
  const auto e = check_gradients(leaves, loss, 8);
  INFO(what << " worst block " << e.worst << " error " << e.error);
  CHECK(e.error < 1e-6);
}

Tensor weighted(const Tensor& x, std::uint64_t seed) {
  return ag::sum(ag::mul(x, random_tensor(x.shape(), seed)));
}

}  // namespace

TEST_CASE("autograd: elementwise ops") {
  Tensor a = random_tensor({3, 4}, 1, true), b = random_tensor({3, 4}, 2, true, 0.5, 2.0);
  expect_grad("add", {{"a", a}, {"b", b}}, [&] { return weighted(ag::add(a, b), 10); });
  expect_grad("sub", {{"a", a}, {"b", b}}, [&] { return weighted(ag::sub(a, b), 11); });
  expect_grad("mul", {{"a", a}, {"b", b}}, [&] { return weighted(ag::mul(a, b), 12); });
  expect_grad("div", {{"a", a}, {"b", b}}, [&] { return weighted(ag::div(a, b), 13); });
  expect_grad("gelu", {{"a", a}}, [&] { return weighted(ag::gelu(a), 14); });
  expect_grad("tanh", {{"a", a}}, [&] { return weighted(ag::tanh(a), 15); });
  expect_grad("sigmoid", {{"a", a}}, [&] { return weighted(ag::sigmoid(a), 16); });
  expect_grad("exp", {{"a", a}}, [&] { return weighted(ag::exp(a), 17); });
  expect_grad("sqrt", {{"b", b}}, [&] { return weighted(ag::sqrt(b), 18); });
  expect_grad("square", {{"a", a}}, [&] { return weighted(ag::square(a), 19); });
  expect_grad("sin/cos", {{"a", a}}, [&] { return weighted(ag::add(ag::sin(a), ag::cos(a)), 20); });
  expect_grad("scale", {{"a", a}}, [&] { return weighted(ag::add_scalar(ag::scale(a, -2.5), 1.0), 21); });
}

TEST_CASE("autograd: broadcasting ops") {
  Tensor x = random_tensor({2, 3, 4}, 3, true), v = random_tensor({4}, 4, true);
  Tensor r = random_tensor({6}, 5, true, 0.5, 1.5);
  expect_grad("add_bias", {{"x", x}, {"v", v}}, [&] { return weighted(ag::add_bias(x, v), 30); });
  expect_grad("mul_last", {{"x", x}, {"v", v}}, [&] { return weighted(ag::mul_last(x, v), 31); });
  expect_grad("mul_rows", {{"x", x}, {"r", r}}, [&] { return weighted(ag::mul_rows(x, r), 32); });
  expect_grad("div_rows", {{"x", x}, {"r", r}}, [&] { return weighted(ag::div_rows(x, r), 33); });
  const std::vector<double> s{1, 2, 3, 4}, t{0.1, 0.2, 0.3, 0.4};
  expect_grad("affine_last", {{"x", x}}, [&] { return weighted(ag::affine_last(x, s, t), 34); });
}

TEST_CASE("autograd: linear algebra") {
  Tensor x = random_tensor({2, 3, 4}, 6, true), w = random_tensor({4, 5}, 7, true);
  expect_grad("matmul", {{"x", x}, {"w", w}}, [&] { return weighted(ag::matmul(x, w), 40); });
  Tensor a = random_tensor({2, 3, 4}, 8, true), b = random_tensor({2, 4, 5}, 9, true);
  expect_grad("bmm", {{"a", a}, {"b", b}}, [&] { return weighted(ag::bmm(a, b), 41); });
  Tensor at = random_tensor({2, 4, 3}, 10, true), bt = random_tensor({2, 5, 4}, 11, true);
  expect_grad("bmm^T", {{"a", at}, {"b", bt}}, [&] { return weighted(ag::bmm(at, bt, true, true), 42); });
  auto m = std::make_shared<const std::vector<double>>(random_tensor({2, 3}, 12).value());
  expect_grad("axis_map", {{"x", x}}, [&] { return weighted(ag::axis_map(x, 1, m, 2), 43); });
  Tensor mx = random_tensor({2, 3, 4}, 13, true), mw = random_tensor({3, 4, 2}, 14, true);
  expect_grad("mode_mix", {{"x", mx}, {"w", mw}}, [&] { return weighted(ag::mode_mix(mx, mw), 44); });
}

TEST_CASE("autograd: mode_mix matches explicit loops") {
  Tensor x = random_tensor({2, 3, 4}, 15), w = random_tensor({3, 4, 2}, 16);
  Tensor y = ag::mode_mix(x, w);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t m = 0; m < 3; ++m)
      for (std::size_t o = 0; o < 2; ++o) {
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i) s += x.value()[(b * 3 + m) * 4 + i] * w.value()[(m * 4 + i) * 2 + o];
        CHECK(y.value()[(b * 3 + m) * 2 + o] == doctest::Approx(s).epsilon(1e-13));
      }
}

TEST_CASE("autograd: shape ops and reductions") {
  Tensor x = random_tensor({2, 3, 4}, 17, true), y = random_tensor({2, 3, 2}, 18, true);
  expect_grad("permute", {{"x", x}}, [&] { return weighted(ag::permute(x, {2, 0, 1}), 50); });
  expect_grad("concat", {{"x", x}, {"y", y}}, [&] { return weighted(ag::concat_last({x, y}), 51); });
  expect_grad("slice", {{"x", x}}, [&] { return weighted(ag::slice_last(x, 1, 3), 52); });
  expect_grad("repeat", {{"x", x}}, [&] { return weighted(ag::repeat_leading(x, 3), 53); });
  expect_grad("sum_axis", {{"x", x}}, [&] { return weighted(ag::sum_axis(x, 1), 54); });
  expect_grad("mean_axis", {{"x", x}}, [&] { return weighted(ag::mean_axis(x, 2), 55); });
  expect_grad("softmax", {{"x", x}}, [&] { return weighted(ag::softmax_last(x), 56); });
  expect_grad("normalize", {{"x", x}}, [&] { return weighted(ag::normalize_last(x), 57); });
  expect_grad("mean", {{"x", x}}, [&] { return ag::mean(ag::square(x)); });

  Tensor p = ag::permute(x, {2, 0, 1});
  CHECK(p.shape() == ag::Shape{4, 2, 3});
  CHECK(p.value()[(1 * 2 + 1) * 3 + 2] == x.value()[(1 * 3 + 2) * 4 + 1]);
  Tensor s = ag::softmax_last(x);
  for (std::size_t r = 0; r < 6; ++r) {
    double t = 0.0;
    for (std::size_t c = 0; c < 4; ++c) t += s.value()[r * 4 + c];
    CHECK(t == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("autograd: convolution and resampling") {
  Tensor x = random_tensor({2, 4, 6, 2}, 19, true), k = random_tensor({3, 3, 2, 3}, 20, true);
  expect_grad("conv2d", {{"x", x}, {"k", k}}, [&] { return weighted(ag::conv2d(x, k), 60); });
  expect_grad("avg_pool2", {{"x", x}}, [&] { return weighted(ag::avg_pool2(x), 61); });
  expect_grad("upsample2", {{"x", x}}, [&] { return weighted(ag::upsample2(x), 62); });
  expect_grad("pad", {{"x", x}}, [&] { return weighted(ag::pad_hw(x, 1, 2), 63); });
  expect_grad("crop", {{"x", x}}, [&] { return weighted(ag::crop_hw(x, 3, 4), 64); });
  CHECK_THROWS_AS(ag::conv2d(x, random_tensor({2, 3, 2, 3}, 1)), ShapeError);
}

TEST_CASE("conv2d equals direct sliding-window summation") {
  Tensor x = random_tensor({1, 5, 5, 2}, 21), k = random_tensor({3, 3, 2, 3}, 22);
  Tensor y = ag::conv2d(x, k);
  double worst = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      for (int o = 0; o < 3; ++o) {
        double s = 0.0;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj) {
            const int ii = i + di, jj = j + dj;
            if (ii < 0 || jj < 0 || ii >= 5 || jj >= 5) continue;
            for (int c = 0; c < 2; ++c)
              s += x.value()[(ii * 5 + jj) * 2 + c] * k.value()[((di + 1) * 3 + (dj + 1)) * 6 + c * 3 + o];
          }
        worst = std::max(worst, std::abs(s - y.value()[(i * 5 + j) * 3 + o]));
      }
  CHECK(worst < 1e-12);
}

TEST_CASE("relative L2 loss: value, gradient and degenerate reference") {
  Tensor p = random_tensor({3, 5, 2}, 23, true), t = random_tensor({3, 5, 2}, 24);
  Tensor l = ag::rel_l2_loss(p, t);
  double expect = 0.0;
  for (std::size_t b = 0; b < 3; ++b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      const double d = p.value()[b * 10 + i] - t.value()[b * 10 + i];
      num += d * d;
      den += t.value()[b * 10 + i] * t.value()[b * 10 + i];
    }
    expect += std::sqrt(num / den) / 3.0;
  }
  CHECK(l.item() == doctest::Approx(expect).epsilon(1e-13));
  expect_grad("rel_l2", {{"p", p}}, [&] { return ag::rel_l2_loss(p, t); });
  CHECK_THROWS_AS(ag::rel_l2_loss(p, ag::zeros({3, 5, 2})), DegenerateReferenceError);

  Tensor exact = ag::parameter({3, 5, 2}, t.value());
  ag::backward(ag::rel_l2_loss(exact, t));
  for (double g : exact.grad()) CHECK(g == 0.0);
}

TEST_CASE("binary cross-entropy on logits") {
  Tensor z = ag::parameter({4}, {-2.0, -0.5, 0.0, 3.0});
  const double l1 = ag::bce_logits(z, 1.0).item();
  double e = 0.0;
  for (double v : z.value()) e += std::log1p(std::exp(-v)) / 4.0;
  CHECK(l1 == doctest::Approx(e).epsilon(1e-14));
  expect_grad("bce", {{"z", z}}, [&] { return ag::add(ag::bce_logits(z, 1.0), ag::bce_logits(z, 0.0)); });
}

TEST_CASE("backward through shared subgraphs accumulates") {
  Tensor a = ag::parameter({1}, {3.0});
  Tensor y = ag::add(ag::mul(a, a), a);
  ag::backward(ag::sum(y));
  CHECK(a.grad()[0] == doctest::Approx(7.0));
  {
    ag::NoGradGuard g;
    CHECK_FALSE(ag::grad_enabled());
    CHECK_FALSE(ag::mul(a, a).requires_grad());
  }
  CHECK(ag::grad_enabled());
}

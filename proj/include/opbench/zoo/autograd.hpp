#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace opbench::ag {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer();
};

/// Dense row-major double tensor with reverse-mode gradient tracking.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  const std::vector<double>& value() const { return node_->value; }
  std::vector<double>& mutable_value() { return node_->value; }
  const std::vector<double>& grad() const { return node_->grad; }
  std::vector<double>& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const;
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }
  bool defined() const { return static_cast<bool>(node_); }
  void zero_grad();

 private:
  std::shared_ptr<Node> node_;
};

Tensor constant(Shape shape, std::vector<double> values);
Tensor zeros(Shape shape);
Tensor parameter(Shape shape, std::vector<double> values);

/// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every tracked leaf.
void backward(const Tensor& loss);

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Shape manipulation.
Tensor reshape(const Tensor& x, Shape shape);
/// General axis permutation: out.shape[i] = x.shape[perm[i]].
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor concat_last(const std::vector<Tensor>& xs);
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end);
/// Repeats x [rows...] `times` along a new leading axis.
Tensor repeat_leading(const Tensor& x, std::size_t times);

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);

// Broadcasting over the last axis (b has shape [last]).
Tensor add_bias(const Tensor& x, const Tensor& b);
Tensor mul_last(const Tensor& x, const Tensor& g);
/// Per-channel affine map with constant coefficients: x * s[c] + t[c].
Tensor affine_last(const Tensor& x, std::span<const double> s, std::span<const double> t);
// Broadcasting one value per row (x viewed as [rows, last], r has `rows` values).
Tensor mul_rows(const Tensor& x, const Tensor& r);
Tensor div_rows(const Tensor& x, const Tensor& r);

// Linear algebra.
/// x [..., K] times w [K, N] -> [..., N].
Tensor matmul(const Tensor& x, const Tensor& w);
/// Batched product over a leading group axis: a [G, n, k] (or [G, k, n] when
/// trans_a) times b [G, k, m] (or [G, m, k] when trans_b) -> [G, n, m].
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
/// Applies a constant matrix m [rows, n] along `axis` of x (x.shape[axis] == n).
Tensor axis_map(const Tensor& x, std::size_t axis, std::shared_ptr<const std::vector<double>> m,
                std::size_t rows);
/// Independent channel mixing per mode: x [B, M, Cin], w [M, Cin, Cout] -> [B, M, Cout].
Tensor mode_mix(const Tensor& x, const Tensor& w);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Sums axis `axis` away.
Tensor sum_axis(const Tensor& x, std::size_t axis);
Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor softmax_last(const Tensor& x);
/// Layer normalization over the last axis without affine parameters.
Tensor normalize_last(const Tensor& x, double eps = 1e-5);

// Convolution on [B, H, W, C] tensors, stride 1, zero "same" padding.
/// k [kh, kw, Cin, Cout] with odd kh, kw.
Tensor conv2d(const Tensor& x, const Tensor& k);
Tensor avg_pool2(const Tensor& x);
Tensor upsample2(const Tensor& x);
/// Zero padding at the high end of axes 1 and 2.
Tensor pad_hw(const Tensor& x, std::size_t ph, std::size_t pw);
Tensor crop_hw(const Tensor& x, std::size_t h, std::size_t w);

// Losses.
/// Mean over the leading axis of per-sample ||pred - truth|| / ||truth||.
Tensor rel_l2_loss(const Tensor& pred, const Tensor& truth);
/// Mean binary cross-entropy of logits against a constant label.
Tensor bce_logits(const Tensor& logits, double label);

}  // namespace opbench::ag

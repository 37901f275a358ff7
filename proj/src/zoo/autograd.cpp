#include "opbench/zoo/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include <Eigen/Core>

#include "opbench/errors.hpp"

namespace opbench::ag {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<MatRM>;
using CMap = Eigen::Map<const MatRM>;
using SMap = Eigen::Map<MatRM, 0, Eigen::OuterStride<>>;
using CSMap = Eigen::Map<const MatRM, 0, Eigen::OuterStride<>>;

thread_local bool g_grad_enabled = true;

Tensor make(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
            std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  if (g_grad_enabled) {
    bool track = false;
    for (const auto& p : parents) track = track || p.requires_grad();
    if (track) {
      n->requires_grad = true;
      for (auto& p : parents) n->parents.push_back(p.ptr());
      n->backward = std::move(bw);
    }
  }
  return Tensor(std::move(n));
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
}

std::size_t last_dim(const Tensor& x, const char* op) {
  if (x.rank() == 0) throw ShapeError(std::string(op) + ": scalar input");
  return x.shape().back();
}

template <typename F, typename D>
Tensor unary(const Tensor& x, F f, D df) {
  std::vector<double> v(x.size());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(xv[i]);
  return make(x.shape(), std::move(v), {x}, [df](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(p.value[i], self.value[i]);
  });
}

struct AxisSplit {
  std::size_t pre = 1, n = 1, post = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.pre *= s[i];
  a.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.post *= s[i];
  return a;
}

}  // namespace

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

Tensor constant(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size())
    throw ShapeError("constant: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return Tensor(std::move(n));
}

Tensor zeros(Shape shape) {
  const std::size_t n = numel(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node()->requires_grad = true;
  return t;
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) throw ShapeError("backward: loss must be a scalar");
  if (!loss.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ------------------------------------------------------------------ shapes

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  return make(std::move(shape), x.value(), {x}, [](Node& self) {
    Node& p = parent(self, 0);
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t r = x.rank();
  if (perm.size() != r) throw ShapeError("permute: axis count mismatch");
  Shape out_shape(r);
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.shape()[i];
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.shape().at(perm[i]);
  const std::size_t n = x.size();
  auto map = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t o = 0; o < n; ++o) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += idx[i] * in_stride[perm[i]];
    (*map)[o] = src;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<double> v(n);
  for (std::size_t o = 0; o < n; ++o) v[o] = x.value()[(*map)[o]];
  return make(out_shape, std::move(v), {x}, [map](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t o = 0; o < self.grad.size(); ++o) g[(*map)[o]] += self.grad[o];
  });
}

Tensor concat_last(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_last: no inputs");
  Shape lead = xs[0].shape();
  lead.pop_back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& x : xs) {
    Shape l = x.shape();
    const std::size_t w = last_dim(x, "concat_last");
    l.pop_back();
    if (l != lead) throw ShapeError("concat_last: leading shapes differ");
    widths.push_back(w);
    total += w;
  }
  const std::size_t rows = numel(lead);
  std::vector<double> v(rows * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& xv = xs[k].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(xv.begin() + long(r * widths[k]), widths[k], v.begin() + long(r * total + off));
    off += widths[k];
  }
  Shape out = lead;
  out.push_back(total);
  return make(out, std::move(v), xs, [widths, rows, total](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node& p = parent(self, k);
      if (p.requires_grad) {
        auto& g = p.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) g[r * widths[k] + c] += self.grad[r * total + off + c];
      }
      off += widths[k];
    }
  });
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t w = last_dim(x, "slice_last");
  if (begin >= end || end > w) throw ShapeError("slice_last: invalid range");
  const std::size_t rows = x.size() / w, n = end - begin;
  std::vector<double> v(rows * n);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(x.value().begin() + long(r * w + begin), n, v.begin() + long(r * n));
  Shape out = x.shape();
  out.back() = n;
  return make(out, std::move(v), {x}, [rows, w, n, begin](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < n; ++c) g[r * w + begin + c] += self.grad[r * n + c];
  });
}

Tensor repeat_leading(const Tensor& x, std::size_t times) {
  Shape out{times};
  out.insert(out.end(), x.shape().begin(), x.shape().end());
  std::vector<double> v;
  v.reserve(times * x.size());
  for (std::size_t t = 0; t < times; ++t) v.insert(v.end(), x.value().begin(), x.value().end());
  return make(out, std::move(v), {x}, [times](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    const std::size_t n = g.size();
    for (std::size_t t = 0; t < times; ++t)
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[t * n + i];
  });
}

// ------------------------------------------------------------------ elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] + b.value()[i];
  return make(a.shape(), std::move(v), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] - b.value()[i];
  return make(a.shape(), std::move(v), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      const double s = k == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] * b.value()[i];
  return make(a.shape(), std::move(v), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same(a, b, "div");
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] / b.value()[i];
  return make(a.shape(), std::move(v), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.value[i] / pb.value[i];
    }
  });
}

Tensor scale(const Tensor& x, double s) {
  return unary(x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary(x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.7071067811865476;
  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt2pi](double v, double) {
        return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
      });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor sqrt(const Tensor& x) {
  return unary(x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sin(const Tensor& x) {
  return unary(x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

Tensor cos(const Tensor& x) {
  return unary(x, [](double v) { return std::cos(v); }, [](double v, double) { return -std::sin(v); });
}

// ------------------------------------------------------------------ broadcasting

Tensor add_bias(const Tensor& x, const Tensor& b) {
  const std::size_t n = last_dim(x, "add_bias");
  if (b.size() != n) throw ShapeError("add_bias: bias has " + std::to_string(b.size()) + " entries, expected " + std::to_string(n));
  std::vector<double> v(x.value());
  for (std::size_t i = 0; i < v.size();)
    for (std::size_t c = 0; c < n; ++c, ++i) v[i] += b.value()[c];
  return make(x.shape(), std::move(v), {x, b}, [n](Node& self) {
    Node& px = parent(self, 0);
    Node& pb = parent(self, 1);
    if (px.requires_grad) {
      auto& g = px.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size();)
        for (std::size_t c = 0; c < n; ++c, ++i) g[c] += self.grad[i];
    }
  });
}

Tensor mul_last(const Tensor& x, const Tensor& s) {
  const std::size_t n = last_dim(x, "mul_last");
  if (s.size() != n) throw ShapeError("mul_last: scale size mismatch");
  std::vector<double> v(x.value());
  for (std::size_t i = 0; i < v.size();)
    for (std::size_t c = 0; c < n; ++c, ++i) v[i] *= s.value()[c];
  return make(x.shape(), std::move(v), {x, s}, [n](Node& self) {
    Node& px = parent(self, 0);
    Node& ps = parent(self, 1);
    if (px.requires_grad) {
      auto& g = px.grad_buffer();
      for (std::size_t i = 0; i < g.size();)
        for (std::size_t c = 0; c < n; ++c, ++i) g[i] += self.grad[i] * ps.value[c];
    }
    if (ps.requires_grad) {
      auto& g = ps.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size();)
        for (std::size_t c = 0; c < n; ++c, ++i) g[c] += self.grad[i] * px.value[i];
    }
  });
}

Tensor affine_last(const Tensor& x, std::span<const double> s, std::span<const double> t) {
  const std::size_t n = last_dim(x, "affine_last");
  if (s.size() != n || t.size() != n) throw ShapeError("affine_last: coefficient size mismatch");
  std::vector<double> sv(s.begin(), s.end());
  std::vector<double> v(x.value());
  for (std::size_t i = 0; i < v.size();)
    for (std::size_t c = 0; c < n; ++c, ++i) v[i] = v[i] * s[c] + t[c];
  return make(x.shape(), std::move(v), {x}, [sv, n](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size();)
      for (std::size_t c = 0; c < n; ++c, ++i) g[i] += self.grad[i] * sv[c];
  });
}

Tensor mul_rows(const Tensor& x, const Tensor& r) {
  const std::size_t rows = r.size();
  if (rows == 0 || x.size() % rows != 0) throw ShapeError("mul_rows: row count mismatch");
  const std::size_t n = x.size() / rows;
  std::vector<double> v(x.value());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= r.value()[i / n];
  return make(x.shape(), std::move(v), {x, r}, [n](Node& self) {
    Node& px = parent(self, 0);
    Node& pr = parent(self, 1);
    if (px.requires_grad) {
      auto& g = px.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pr.value[i / n];
    }
    if (pr.requires_grad) {
      auto& g = pr.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i / n] += self.grad[i] * px.value[i];
    }
  });
}

Tensor div_rows(const Tensor& x, const Tensor& r) {
  const std::size_t rows = r.size();
  if (rows == 0 || x.size() % rows != 0) throw ShapeError("div_rows: row count mismatch");
  const std::size_t n = x.size() / rows;
  std::vector<double> v(x.value());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] /= r.value()[i / n];
  return make(x.shape(), std::move(v), {x, r}, [n](Node& self) {
    Node& px = parent(self, 0);
    Node& pr = parent(self, 1);
    if (px.requires_grad) {
      auto& g = px.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pr.value[i / n];
    }
    if (pr.requires_grad) {
      auto& g = pr.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i / n] -= self.grad[i] * self.value[i] / pr.value[i / n];
    }
  });
}

// ------------------------------------------------------------------ linear algebra

Tensor matmul(const Tensor& x, const Tensor& w) {
  if (w.rank() != 2) throw ShapeError("matmul: weight must be rank 2");
  const std::size_t K = last_dim(x, "matmul"), N = w.dim(1);
  if (w.dim(0) != K)
    throw ShapeError("matmul: input " + shape_str(x.shape()) + " against weight " + shape_str(w.shape()));
  const std::size_t rows = x.size() / K;
  std::vector<double> v(rows * N);
  Map(v.data(), long(rows), long(N)).noalias() =
      CMap(x.value().data(), long(rows), long(K)) * CMap(w.value().data(), long(K), long(N));
  Shape out = x.shape();
  out.back() = N;
  return make(out, std::move(v), {x, w}, [rows, K, N](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    CMap g(self.grad.data(), long(rows), long(N));
    if (px.requires_grad)
      Map(px.grad_buffer().data(), long(rows), long(K)).noalias() += g * CMap(pw.value.data(), long(K), long(N)).transpose();
    if (pw.requires_grad)
      Map(pw.grad_buffer().data(), long(K), long(N)).noalias() += CMap(px.value.data(), long(rows), long(K)).transpose() * g;
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) throw ShapeError("bmm: expects [G, ., .] operands with equal G");
  const std::size_t G = a.dim(0);
  const std::size_t ar = a.dim(1), ac = a.dim(2), br = b.dim(1), bc = b.dim(2);
  const std::size_t n = trans_a ? ac : ar, k = trans_a ? ar : ac;
  const std::size_t kb = trans_b ? bc : br, m = trans_b ? br : bc;
  if (k != kb) throw ShapeError("bmm: inner dimensions " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> v(G * n * m);
  for (std::size_t g = 0; g < G; ++g) {
    CMap A(a.value().data() + g * ar * ac, long(ar), long(ac));
    CMap B(b.value().data() + g * br * bc, long(br), long(bc));
    Map O(v.data() + g * n * m, long(n), long(m));
    if (trans_a && trans_b) O.noalias() = A.transpose() * B.transpose();
    else if (trans_a) O.noalias() = A.transpose() * B;
    else if (trans_b) O.noalias() = A * B.transpose();
    else O.noalias() = A * B;
  }
  return make({G, n, m}, std::move(v), {a, b}, [=](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    for (std::size_t g = 0; g < G; ++g) {
      CMap GO(self.grad.data() + g * n * m, long(n), long(m));
      CMap A(pa.value.data() + g * ar * ac, long(ar), long(ac));
      CMap B(pb.value.data() + g * br * bc, long(br), long(bc));
      if (pa.requires_grad) {
        Map GA(pa.grad_buffer().data() + g * ar * ac, long(ar), long(ac));
        if (!trans_a && !trans_b) GA.noalias() += GO * B.transpose();
        else if (!trans_a && trans_b) GA.noalias() += GO * B;
        else if (trans_a && !trans_b) GA.noalias() += B * GO.transpose();
        else GA.noalias() += B.transpose() * GO.transpose();
      }
      if (pb.requires_grad) {
        Map GB(pb.grad_buffer().data() + g * br * bc, long(br), long(bc));
        if (!trans_a && !trans_b) GB.noalias() += A.transpose() * GO;
        else if (!trans_a && trans_b) GB.noalias() += GO.transpose() * A;
        else if (trans_a && !trans_b) GB.noalias() += A * GO;
        else GB.noalias() += GO.transpose() * A.transpose();
      }
    }
  });
}

Tensor axis_map(const Tensor& x, std::size_t axis, std::shared_ptr<const std::vector<double>> m,
                std::size_t rows) {
  if (axis >= x.rank()) throw ShapeError("axis_map: axis out of range");
  const AxisSplit s = split_at(x.shape(), axis);
  if (m->size() != rows * s.n)
    throw ShapeError("axis_map: matrix does not match axis length " + std::to_string(s.n));
  std::vector<double> v(s.pre * rows * s.post);
  CMap M(m->data(), long(rows), long(s.n));
  for (std::size_t p = 0; p < s.pre; ++p)
    Map(v.data() + p * rows * s.post, long(rows), long(s.post)).noalias() =
        M * CMap(x.value().data() + p * s.n * s.post, long(s.n), long(s.post));
  Shape out = x.shape();
  out[axis] = rows;
  return make(out, std::move(v), {x}, [m, rows, s](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    CMap M(m->data(), long(rows), long(s.n));
    for (std::size_t p = 0; p < s.pre; ++p)
      Map(g.data() + p * s.n * s.post, long(s.n), long(s.post)).noalias() +=
          M.transpose() * CMap(self.grad.data() + p * rows * s.post, long(rows), long(s.post));
  });
}

Tensor mode_mix(const Tensor& x, const Tensor& w) {
  if (x.rank() != 3 || w.rank() != 3 || x.dim(1) != w.dim(0) || x.dim(2) != w.dim(1))
    throw ShapeError("mode_mix: input " + shape_str(x.shape()) + " against weights " + shape_str(w.shape()));
  const std::size_t B = x.dim(0), M = x.dim(1), Ci = x.dim(2), Co = w.dim(2);
  std::vector<double> v(B * M * Co);
  for (std::size_t m = 0; m < M; ++m)
    SMap(v.data() + m * Co, long(B), long(Co), Eigen::OuterStride<>(long(M * Co))).noalias() =
        CSMap(x.value().data() + m * Ci, long(B), long(Ci), Eigen::OuterStride<>(long(M * Ci))) *
        CMap(w.value().data() + m * Ci * Co, long(Ci), long(Co));
  return make({B, M, Co}, std::move(v), {x, w}, [=](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    for (std::size_t m = 0; m < M; ++m) {
      CSMap G(self.grad.data() + m * Co, long(B), long(Co), Eigen::OuterStride<>(long(M * Co)));
      if (px.requires_grad)
        SMap(px.grad_buffer().data() + m * Ci, long(B), long(Ci), Eigen::OuterStride<>(long(M * Ci))).noalias() +=
            G * CMap(pw.value.data() + m * Ci * Co, long(Ci), long(Co)).transpose();
      if (pw.requires_grad)
        Map(pw.grad_buffer().data() + m * Ci * Co, long(Ci), long(Co)).noalias() +=
            CSMap(px.value.data() + m * Ci, long(B), long(Ci), Eigen::OuterStride<>(long(M * Ci))).transpose() * G;
    }
  });
}

// ------------------------------------------------------------------ reductions

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.value()) s += v;
  return make({}, {s}, {x}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / double(x.size())); }

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw ShapeError("sum_axis: axis out of range");
  const AxisSplit s = split_at(x.shape(), axis);
  std::vector<double> v(s.pre * s.post, 0.0);
  for (std::size_t p = 0; p < s.pre; ++p)
    for (std::size_t i = 0; i < s.n; ++i)
      for (std::size_t q = 0; q < s.post; ++q) v[p * s.post + q] += x.value()[(p * s.n + i) * s.post + q];
  Shape out = x.shape();
  out.erase(out.begin() + long(axis));
  return make(out, std::move(v), {x}, [s](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t p = 0; p < s.pre; ++p)
      for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t q = 0; q < s.post; ++q) g[(p * s.n + i) * s.post + q] += self.grad[p * s.post + q];
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  return scale(sum_axis(x, axis), 1.0 / double(x.shape().at(axis)));
}

Tensor softmax_last(const Tensor& x) {
  const std::size_t n = last_dim(x, "softmax_last");
  const std::size_t rows = x.size() / n;
  std::vector<double> v(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.value().data() + r * n;
    double* out = v.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += (out[c] = std::exp(in[c] - mx));
    for (std::size_t c = 0; c < n; ++c) out[c] /= z;
  }
  return make(x.shape(), std::move(v), {x}, [n, rows](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * n;
      const double* go = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += go[c] * y[c];
      for (std::size_t c = 0; c < n; ++c) g[r * n + c] += y[c] * (go[c] - dot);
    }
  });
}

Tensor normalize_last(const Tensor& x, double eps) {
  const std::size_t n = last_dim(x, "normalize_last");
  const std::size_t rows = x.size() / n;
  std::vector<double> v(x.size());
  auto inv_sd = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.value().data() + r * n;
    double mu = 0.0, var = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += in[c];
    mu /= double(n);
    for (std::size_t c = 0; c < n; ++c) var += (in[c] - mu) * (in[c] - mu);
    const double is = 1.0 / std::sqrt(var / double(n) + eps);
    (*inv_sd)[r] = is;
    for (std::size_t c = 0; c < n; ++c) v[r * n + c] = (in[c] - mu) * is;
  }
  return make(x.shape(), std::move(v), {x}, [n, rows, inv_sd](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * n;
      const double* go = self.grad.data() + r * n;
      double mg = 0.0, mgy = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        mg += go[c];
        mgy += go[c] * y[c];
      }
      mg /= double(n);
      mgy /= double(n);
      for (std::size_t c = 0; c < n; ++c) g[r * n + c] += (*inv_sd)[r] * (go[c] - mg - y[c] * mgy);
    }
  });
}

// ------------------------------------------------------------------ convolution

Tensor conv2d(const Tensor& x, const Tensor& k) {
  if (x.rank() != 4 || k.rank() != 4 || k.dim(2) != x.dim(3))
    throw ShapeError("conv2d: input " + shape_str(x.shape()) + " against kernel " + shape_str(k.shape()));
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), Ci = x.dim(3);
  const std::size_t kh = k.dim(0), kw = k.dim(1), Co = k.dim(3);
  if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("conv2d: kernel extents must be odd");
  const long ph = long(kh / 2), pw = long(kw / 2);
  std::vector<double> v(B * H * W * Co, 0.0);
  auto for_each_block = [=](auto&& fn) {
    for (std::size_t di = 0; di < kh; ++di)
      for (std::size_t dj = 0; dj < kw; ++dj) {
        const long oj = long(dj) - pw;
        const long j0 = std::max<long>(0, -oj), j1 = std::min<long>(long(W), long(W) - oj);
        if (j1 <= j0) continue;
        for (std::size_t b = 0; b < B; ++b)
          for (long i = 0; i < long(H); ++i) {
            const long si = i + long(di) - ph;
            if (si < 0 || si >= long(H)) continue;
            const std::size_t out_off = ((b * H + std::size_t(i)) * W + std::size_t(j0)) * Co;
            const std::size_t in_off = ((b * H + std::size_t(si)) * W + std::size_t(j0 + oj)) * Ci;
            fn(out_off, in_off, std::size_t(j1 - j0), (di * kw + dj) * Ci * Co);
          }
      }
  };
  for_each_block([&](std::size_t oo, std::size_t io, std::size_t len, std::size_t ko) {
    Map(v.data() + oo, long(len), long(Co)).noalias() +=
        CMap(x.value().data() + io, long(len), long(Ci)) * CMap(k.value().data() + ko, long(Ci), long(Co));
  });
  return make({B, H, W, Co}, std::move(v), {x, k}, [=](Node& self) {
    Node& px = parent(self, 0);
    Node& pk = parent(self, 1);
    double* gx = px.requires_grad ? px.grad_buffer().data() : nullptr;
    double* gk = pk.requires_grad ? pk.grad_buffer().data() : nullptr;
    for_each_block([&](std::size_t oo, std::size_t io, std::size_t len, std::size_t ko) {
      CMap G(self.grad.data() + oo, long(len), long(Co));
      if (gx) Map(gx + io, long(len), long(Ci)).noalias() += G * CMap(pk.value.data() + ko, long(Ci), long(Co)).transpose();
      if (gk) Map(gk + ko, long(Ci), long(Co)).noalias() += CMap(px.value.data() + io, long(len), long(Ci)).transpose() * G;
    });
  });
}

Tensor avg_pool2(const Tensor& x) {
  if (x.rank() != 4 || x.dim(1) % 2 || x.dim(2) % 2)
    throw ShapeError("avg_pool2: needs [B, H, W, C] with even H and W, got " + shape_str(x.shape()));
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t h = H / 2, w = W / 2;
  std::vector<double> v(B * h * w * C, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        for (std::size_t c = 0; c < C; ++c)
          v[((b * h + i / 2) * w + j / 2) * C + c] += 0.25 * x.value()[((b * H + i) * W + j) * C + c];
  return make({B, h, w, C}, std::move(v), {x}, [=](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j)
          for (std::size_t c = 0; c < C; ++c)
            g[((b * H + i) * W + j) * C + c] += 0.25 * self.grad[((b * h + i / 2) * w + j / 2) * C + c];
  });
}

Tensor upsample2(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("upsample2: needs [B, H, W, C]");
  const std::size_t B = x.dim(0), h = x.dim(1), w = x.dim(2), C = x.dim(3);
  const std::size_t H = 2 * h, W = 2 * w;
  std::vector<double> v(B * H * W * C);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        for (std::size_t c = 0; c < C; ++c)
          v[((b * H + i) * W + j) * C + c] = x.value()[((b * h + i / 2) * w + j / 2) * C + c];
  return make({B, H, W, C}, std::move(v), {x}, [=](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j)
          for (std::size_t c = 0; c < C; ++c)
            g[((b * h + i / 2) * w + j / 2) * C + c] += self.grad[((b * H + i) * W + j) * C + c];
  });
}

Tensor pad_hw(const Tensor& x, std::size_t ph, std::size_t pw) {
  if (x.rank() != 4) throw ShapeError("pad_hw: needs [B, H, W, C]");
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  const std::size_t H2 = H + ph, W2 = W + pw;
  std::vector<double> v(B * H2 * W2 * C, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < H; ++i)
      std::copy_n(x.value().begin() + long(((b * H + i) * W) * C), W * C, v.begin() + long(((b * H2 + i) * W2) * C));
  return make({B, H2, W2, C}, std::move(v), {x}, [=](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t q = 0; q < W * C; ++q) g[((b * H + i) * W) * C + q] += self.grad[((b * H2 + i) * W2) * C + q];
  });
}

Tensor crop_hw(const Tensor& x, std::size_t h, std::size_t w) {
  if (x.rank() != 4 || h > x.dim(1) || w > x.dim(2)) throw ShapeError("crop_hw: invalid crop");
  const std::size_t B = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
  std::vector<double> v(B * h * w * C);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = 0; i < h; ++i)
      std::copy_n(x.value().begin() + long(((b * H + i) * W) * C), w * C, v.begin() + long(((b * h + i) * w) * C));
  return make({B, h, w, C}, std::move(v), {x}, [=](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t q = 0; q < w * C; ++q) g[((b * H + i) * W) * C + q] += self.grad[((b * h + i) * w) * C + q];
  });
}

// ------------------------------------------------------------------ losses

Tensor rel_l2_loss(const Tensor& pred, const Tensor& truth) {
  require_same(pred, truth, "rel_l2_loss");
  if (pred.rank() == 0) throw ShapeError("rel_l2_loss: needs a leading batch axis");
  const std::size_t B = pred.dim(0), n = pred.size() / B;
  auto coef = std::make_shared<std::vector<double>>(B, 0.0);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = b * n; i < (b + 1) * n; ++i) {
      const double d = pred.value()[i] - truth.value()[i];
      num += d * d;
      den += truth.value()[i] * truth.value()[i];
    }
    if (!(den > 0.0)) throw DegenerateReferenceError("rel_l2_loss: sample " + std::to_string(b) + " has a zero reference");
    const double r = std::sqrt(num) / std::sqrt(den);
    total += r;
    (*coef)[b] = num > 0.0 ? 1.0 / (std::sqrt(num) * std::sqrt(den) * double(B)) : 0.0;
  }
  return make({}, {total / double(B)}, {pred, truth}, [coef, n](Node& self) {
    Node& pp = parent(self, 0);
    Node& pt = parent(self, 1);
    if (!pp.requires_grad) return;
    auto& g = pp.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[0] * (*coef)[i / n] * (pp.value[i] - pt.value[i]);
  });
}

Tensor bce_logits(const Tensor& logits, double label) {
  const std::size_t n = logits.size();
  double s = 0.0;
  for (double z : logits.value()) s += std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
  return make({}, {s / double(n)}, {logits}, [label, n](Node& self) {
    Node& p = parent(self, 0);
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[0] * (1.0 / (1.0 + std::exp(-p.value[i])) - label) / double(n);
  });
}

}  // namespace opbench::ag

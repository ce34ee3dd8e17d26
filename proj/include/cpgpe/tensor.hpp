#pragma once

// Dense float64 tensors with a reverse-mode tape, plus the binary SpikeTensor
// that carries activations between spiking layers.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cpgpe/errors.hpp"

namespace cpgpe {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads the gradient of this node and accumulates into the parents.
  std::function<void(std::span<const double>)> backward_fn;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

inline thread_local bool grad_enabled = true;

// [outer, axis, inner] factorization used by every axis-wise op.
struct AxisSplit {
  std::size_t outer, n, inner;
};

inline AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace detail

// Disables tape construction in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled) { detail::grad_enabled = false; }
  ~NoGradGuard() { detail::grad_enabled = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class ValueTensor {
 public:
  using BackwardFn = std::function<void(std::span<const double>)>;

  ValueTensor() : ValueTensor(Shape{0}, {}) {}

  ValueTensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (numel(shape) != data.size())
      throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                           shape_str(shape));
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static ValueTensor zeros(Shape shape, bool requires_grad = false) {
    auto n = numel(shape);
    return ValueTensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static ValueTensor full(Shape shape, double v, bool requires_grad = false) {
    auto n = numel(shape);
    return ValueTensor(std::move(shape), std::vector<double>(n, v), requires_grad);
  }

  static ValueTensor scalar(double v, bool requires_grad = false) {
    return ValueTensor(Shape{1}, {v}, requires_grad);
  }

  // Builds an op result. The backward closure runs only when some parent
  // requires a gradient and tape recording is enabled.
  static ValueTensor make_op(Shape shape, std::vector<double> data,
                             std::initializer_list<const ValueTensor*> parents, BackwardFn fn) {
    ValueTensor out(std::move(shape), std::move(data));
    if (!detail::grad_enabled) return out;
    bool any = false;
    for (const auto* p : parents) any = any || p->requires_grad();
    if (!any) return out;
    out.node_->requires_grad = true;
    for (const auto* p : parents) out.node_->parents.push_back(p->node_);
    out.node_->backward_fn = std::move(fn);
    return out;
  }

  static ValueTensor make_op(Shape shape, std::vector<double> data,
                             const std::vector<ValueTensor>& parents, BackwardFn fn) {
    ValueTensor out(std::move(shape), std::move(data));
    if (!detail::grad_enabled) return out;
    bool any = std::any_of(parents.begin(), parents.end(),
                           [](const ValueTensor& p) { return p.requires_grad(); });
    if (!any) return out;
    out.node_->requires_grad = true;
    for (const auto& p : parents) out.node_->parents.push_back(p.node_);
    out.node_->backward_fn = std::move(fn);
    return out;
  }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t size() const { return node_->data.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> data() const { return node_->data; }
  // Direct write access, meant for optimizers and initializers on leaves.
  std::span<double> mutable_data() { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double item() const {
    if (size() != 1) throw ContractViolation("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
  }

  // Empty span until a backward pass has touched this node.
  std::span<const double> grad() const { return node_->grad; }
  std::vector<double> grad_or_zero() const {
    return node_->grad.empty() ? std::vector<double>(size(), 0.0) : node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  // Gradient accumulation hook for op implementations.
  void accumulate_grad(std::size_t i, double g) const {
    node_->ensure_grad();
    node_->grad[i] += g;
  }
  std::span<double> grad_buffer() const {
    node_->ensure_grad();
    return node_->grad;
  }

  ValueTensor detach() const { return ValueTensor(shape(), node_->data); }

  bool same_node(const ValueTensor& o) const { return node_ == o.node_; }

 private:
  friend std::size_t backward(const ValueTensor& loss);
  std::shared_ptr<detail::Node> node_;
};

// Runs reverse accumulation from a scalar loss. Returns the number of graph
// nodes visited; each node is processed exactly once.
inline std::size_t backward(const ValueTensor& loss) {
  if (loss.size() != 1)
    throw ContractViolation("backward() requires a scalar loss, got shape " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return 0;

  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{loss.node_.get(), 0}};
  seen.insert(loss.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node_->ensure_grad();
  loss.node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(n->grad);
  }
  return order.size();
}

// ---------------------------------------------------------------------------
// Elementwise and reduction ops

inline void check_same_shape(const ValueTensor& a, const ValueTensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
}

inline ValueTensor add(const ValueTensor& a, const ValueTensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return ValueTensor::make_op(a.shape(), std::move(out), {&a, &b}, [a, b](std::span<const double> g) {
    if (a.requires_grad()) {
      auto ga = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

inline ValueTensor sub(const ValueTensor& a, const ValueTensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return ValueTensor::make_op(a.shape(), std::move(out), {&a, &b}, [a, b](std::span<const double> g) {
    if (a.requires_grad()) {
      auto ga = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

inline ValueTensor mul(const ValueTensor& a, const ValueTensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return ValueTensor::make_op(a.shape(), std::move(out), {&a, &b}, [a, b](std::span<const double> g) {
    if (a.requires_grad()) {
      auto ga = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
    }
  });
}

inline ValueTensor scale(const ValueTensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
  return ValueTensor::make_op(a.shape(), std::move(out), {&a}, [a, s](std::span<const double> g) {
    auto ga = a.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
}

inline ValueTensor sum(const ValueTensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return ValueTensor::make_op(Shape{1}, {s}, {&a}, [a](std::span<const double> g) {
    auto ga = a.grad_buffer();
    for (auto& v : ga) v += g[0];
  });
}

inline ValueTensor mean(const ValueTensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

inline ValueTensor mse_loss(const ValueTensor& pred, const ValueTensor& target) {
  auto d = sub(pred, target);
  return mean(mul(d, d));
}

// ---------------------------------------------------------------------------
// Linear algebra

// (m,k) x (k,n) -> (m,n)
inline ValueTensor matmul(const ValueTensor& a, const ValueTensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  using MMap = Eigen::Map<Mat>;
  const auto m = static_cast<Eigen::Index>(a.dim(0)), k = static_cast<Eigen::Index>(a.dim(1)),
             n = static_cast<Eigen::Index>(b.dim(1));
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  MMap(out.data(), m, n).noalias() = CMap(a.data().data(), m, k) * CMap(b.data().data(), k, n);
  return ValueTensor::make_op(Shape{a.dim(0), b.dim(1)}, std::move(out), {&a, &b},
                              [a, b, m, k, n](std::span<const double> g) {
                                CMap G(g.data(), m, n);
                                if (a.requires_grad())
                                  MMap(a.grad_buffer().data(), m, k).noalias() +=
                                      G * CMap(b.data().data(), k, n).transpose();
                                if (b.requires_grad())
                                  MMap(b.grad_buffer().data(), k, n).noalias() +=
                                      CMap(a.data().data(), m, k).transpose() * G;
                              });
}

// Adds bias (n,) to every row of x (..., n).
inline ValueTensor add_bias(const ValueTensor& x, const ValueTensor& bias) {
  const std::size_t n = bias.size();
  if (x.rank() == 0 || x.shape().back() != n)
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias[i % n];
  return ValueTensor::make_op(x.shape(), std::move(out), {&x, &bias}, [x, bias, n](std::span<const double> g) {
    if (x.requires_grad()) {
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (bias.requires_grad()) {
      auto gb = bias.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline ValueTensor reshape(const ValueTensor& x, Shape shape) {
  if (numel(shape) != x.size())
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<double> out(x.data().begin(), x.data().end());
  return ValueTensor::make_op(std::move(shape), std::move(out), {&x}, [x](std::span<const double> g) {
    auto gx = x.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

// Concatenates along `axis`; all other extents must agree.
inline ValueTensor concat(const ValueTensor& a, const ValueTensor& b, std::size_t axis) {
  if (a.rank() != b.rank() || axis >= a.rank())
    throw DimensionError("concat: incompatible ranks " + shape_str(a.shape()) + ", " + shape_str(b.shape()));
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (i != axis && a.dim(i) != b.dim(i))
      throw DimensionError("concat: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                           " disagree off axis " + std::to_string(axis));
  auto sa = detail::split_at(a.shape(), axis);
  auto sb = detail::split_at(b.shape(), axis);
  const std::size_t na = sa.n * sa.inner, nb = sb.n * sb.inner;
  Shape shape = a.shape();
  shape[axis] = sa.n + sb.n;
  std::vector<double> out(numel(shape));
  auto A = a.data();
  auto B = b.data();
  for (std::size_t o = 0; o < sa.outer; ++o) {
    std::copy_n(A.begin() + o * na, na, out.begin() + o * (na + nb));
    std::copy_n(B.begin() + o * nb, nb, out.begin() + o * (na + nb) + na);
  }
  return ValueTensor::make_op(std::move(shape), std::move(out), {&a, &b},
                              [a, b, na, nb, outer = sa.outer](std::span<const double> g) {
                                if (a.requires_grad()) {
                                  auto ga = a.grad_buffer();
                                  for (std::size_t o = 0; o < outer; ++o)
                                    for (std::size_t i = 0; i < na; ++i) ga[o * na + i] += g[o * (na + nb) + i];
                                }
                                if (b.requires_grad()) {
                                  auto gb = b.grad_buffer();
                                  for (std::size_t o = 0; o < outer; ++o)
                                    for (std::size_t i = 0; i < nb; ++i)
                                      gb[o * nb + i] += g[o * (na + nb) + na + i];
                                }
                              });
}

// Out[.., k, ..] = sum_j weights[j] * x[.., j, ..] collapsed over `axis`.
inline ValueTensor weighted_sum_axis(const ValueTensor& x, std::size_t axis, std::vector<double> weights) {
  if (axis >= x.rank()) throw DimensionError("weighted_sum_axis: axis out of range");
  auto s = detail::split_at(x.shape(), axis);
  if (weights.size() != s.n) throw DimensionError("weighted_sum_axis: weight count mismatch");
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto X = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.n; ++j) {
      const double w = weights[j];
      const double* src = X.data() + (o * s.n + j) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += w * src[i];
    }
  return ValueTensor::make_op(std::move(shape), std::move(out), {&x},
                              [x, s, w = std::move(weights)](std::span<const double> g) {
                                auto gx = x.grad_buffer();
                                for (std::size_t o = 0; o < s.outer; ++o)
                                  for (std::size_t j = 0; j < s.n; ++j)
                                    for (std::size_t i = 0; i < s.inner; ++i)
                                      gx[(o * s.n + j) * s.inner + i] += w[j] * g[o * s.inner + i];
                              });
}

inline ValueTensor mean_axis(const ValueTensor& x, std::size_t axis) {
  const std::size_t n = x.dim(axis);
  return weighted_sum_axis(x, axis, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

// Picks index `idx` along `axis`, dropping that axis.
inline ValueTensor select(const ValueTensor& x, std::size_t axis, std::size_t idx) {
  if (axis >= x.rank() || idx >= x.dim(axis)) throw DimensionError("select: index out of range");
  auto s = detail::split_at(x.shape(), axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(s.outer * s.inner);
  auto X = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(X.begin() + (o * s.n + idx) * s.inner, s.inner, out.begin() + o * s.inner);
  return ValueTensor::make_op(std::move(shape), std::move(out), {&x}, [x, s, idx](std::span<const double> g) {
    auto gx = x.grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) gx[(o * s.n + idx) * s.inner + i] += g[o * s.inner + i];
  });
}

// Inverse of select: stacks equally shaped tensors into a new `axis`.
inline ValueTensor stack(const std::vector<ValueTensor>& xs, std::size_t axis) {
  if (xs.empty()) throw ContractViolation("stack: empty input");
  const Shape& base = xs.front().shape();
  for (const auto& x : xs)
    if (x.shape() != base) throw DimensionError("stack: mismatched shape " + shape_str(x.shape()));
  if (axis > base.size()) throw DimensionError("stack: axis out of range");
  Shape shape = base;
  shape.insert(shape.begin() + static_cast<std::ptrdiff_t>(axis), xs.size());
  auto s = detail::split_at(shape, axis);
  std::vector<double> out(numel(shape));
  for (std::size_t j = 0; j < s.n; ++j) {
    auto X = xs[j].data();
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(X.begin() + o * s.inner, s.inner, out.begin() + (o * s.n + j) * s.inner);
  }
  return ValueTensor::make_op(std::move(shape), std::move(out), xs, [xs, s](std::span<const double> g) {
    for (std::size_t j = 0; j < s.n; ++j) {
      if (!xs[j].requires_grad()) continue;
      auto gx = xs[j].grad_buffer();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) gx[o * s.inner + i] += g[(o * s.n + j) * s.inner + i];
    }
  });
}

// Repeats a size-1 `axis` n times.
inline ValueTensor broadcast_axis(const ValueTensor& x, std::size_t axis, std::size_t n) {
  if (axis >= x.rank() || x.dim(axis) != 1)
    throw DimensionError("broadcast_axis: axis must have extent 1 in " + shape_str(x.shape()));
  auto s = detail::split_at(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = n;
  std::vector<double> out(s.outer * n * s.inner);
  auto X = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < n; ++j)
      std::copy_n(X.begin() + o * s.inner, s.inner, out.begin() + (o * n + j) * s.inner);
  return ValueTensor::make_op(std::move(shape), std::move(out), {&x}, [x, s, n](std::span<const double> g) {
    auto gx = x.grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < s.inner; ++i) gx[o * s.inner + i] += g[(o * n + j) * s.inner + i];
  });
}

// out[.., p, ..] = x[.., p - offset, ..] along `axis`, zero where p < offset.
inline ValueTensor shift_axis(const ValueTensor& x, std::size_t axis, std::size_t offset) {
  if (axis >= x.rank()) throw DimensionError("shift_axis: axis out of range");
  auto s = detail::split_at(x.shape(), axis);
  std::vector<double> out(x.size(), 0.0);
  auto X = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t p = offset; p < s.n; ++p)
      std::copy_n(X.begin() + (o * s.n + p - offset) * s.inner, s.inner, out.begin() + (o * s.n + p) * s.inner);
  return ValueTensor::make_op(x.shape(), std::move(out), {&x}, [x, s, offset](std::span<const double> g) {
    auto gx = x.grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t p = offset; p < s.n; ++p)
        for (std::size_t i = 0; i < s.inner; ++i)
          gx[(o * s.n + p - offset) * s.inner + i] += g[(o * s.n + p) * s.inner + i];
  });
}

// ---------------------------------------------------------------------------
// Spike payload

// Binary activations indexed (step, batch, position, feature). The wrapped
// ValueTensor keeps the surrogate-gradient path; arithmetic on spikes is not
// offered, only concatenation, shifting and broadcasting, which preserve
// binarity.
class SpikeTensor {
 public:
  SpikeTensor() = default;

  explicit SpikeTensor(ValueTensor values) : values_(std::move(values)) {
    if (values_.rank() != 4) throw DimensionError("SpikeTensor needs rank 4, got " + shape_str(values_.shape()));
    if (steps() == 0 || batch() == 0 || positions() == 0)
      throw DimensionError("SpikeTensor extents T, B, L must be >= 1, got " + shape_str(values_.shape()));
#ifndef NDEBUG
    assert(is_binary(values_.data()) && "SpikeTensor constructed from non-binary values");
#endif
  }

  // Throws instead of asserting; used at trust boundaries.
  static SpikeTensor checked(ValueTensor values) {
    if (!is_binary(values.data())) throw ContractViolation("SpikeTensor: value outside {0,1}");
    return SpikeTensor(std::move(values));
  }

  static SpikeTensor from_bits(Shape shape, std::span<const std::uint8_t> bits) {
    std::vector<double> v(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] > 1) throw ContractViolation("SpikeTensor: bit value > 1");
      v[i] = bits[i];
    }
    return SpikeTensor(ValueTensor(std::move(shape), std::move(v)));
  }

  static bool is_binary(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0 || x == 1.0; });
  }

  const Shape& shape() const { return values_.shape(); }
  std::size_t steps() const { return values_.dim(0); }
  std::size_t batch() const { return values_.dim(1); }
  std::size_t positions() const { return values_.dim(2); }
  std::size_t features() const { return values_.dim(3); }
  std::size_t size() const { return values_.size(); }

  std::uint8_t at(std::size_t s, std::size_t b, std::size_t p, std::size_t d) const {
    return static_cast<std::uint8_t>(
        values_[((s * batch() + b) * positions() + p) * features() + d]);
  }

  std::vector<std::uint8_t> bits() const {
    std::vector<std::uint8_t> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<std::uint8_t>(values_[i]);
    return out;
  }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(values_.data().begin(), values_.data().end(), 1.0));
  }

  // Read-only view for feeding into real-valued layers (Linear, readout).
  const ValueTensor& values() const { return values_; }

 private:
  ValueTensor values_;
};

// x ⊕ y along the feature axis; x occupies the leading features.
inline SpikeTensor concat_features(const SpikeTensor& x, const SpikeTensor& y) {
  if (x.steps() != y.steps() || x.batch() != y.batch() || x.positions() != y.positions())
    throw DimensionError("concat_features: leading shapes " + shape_str(x.shape()) + " and " +
                         shape_str(y.shape()) + " differ");
  if (y.features() == 0) return x;
  if (x.features() == 0) return y;
  return SpikeTensor(concat(x.values(), y.values(), 3));
}

// Causal shift along positions with zero fill.
inline SpikeTensor shift_positions(const SpikeTensor& x, std::size_t offset) {
  return SpikeTensor(shift_axis(x.values(), 2, offset));
}

// (T,1,L,D) -> (T,B,L,D)
inline SpikeTensor broadcast_batch(const SpikeTensor& x, std::size_t batch) {
  if (x.batch() == batch) return x;
  return SpikeTensor(broadcast_axis(x.values(), 1, batch));
}

// ---------------------------------------------------------------------------
// Initialization helpers

using Rng = std::mt19937_64;

inline ValueTensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return ValueTensor(std::move(shape), std::move(v), requires_grad);
}

inline ValueTensor normal_tensor(Shape shape, double mean_v, double stddev, Rng& rng, bool requires_grad = false) {
  std::normal_distribution<double> dist(mean_v, stddev);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return ValueTensor(std::move(shape), std::move(v), requires_grad);
}

}  // namespace cpgpe

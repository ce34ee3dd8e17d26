#pragma once

// Trainable building blocks: Linear, BatchNorm and the parameter registry
// shared by every model.

#include <cmath>
#include <string>
#include <vector>

#include "cpgpe/errors.hpp"
#include "cpgpe/tensor.hpp"

namespace cpgpe {

enum class ParamKind { linear, norm, buffer };

struct NamedParam {
  std::string name;
  ValueTensor* tensor;
  ParamKind kind;

  bool trainable() const { return kind != ParamKind::buffer; }
};

using ParamList = std::vector<NamedParam>;

inline std::size_t count_params(const ParamList& ps, ParamKind kind) {
  std::size_t n = 0;
  for (const auto& p : ps)
    if (p.kind == kind) n += p.tensor->size();
  return n;
}

inline std::size_t count_trainable(const ParamList& ps) {
  std::size_t n = 0;
  for (const auto& p : ps)
    if (p.trainable()) n += p.tensor->size();
  return n;
}

// y = x W + b over the last axis. Weights are stored (in, out).
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, bool bias = true) : in_(in), out_(out), has_bias_(bias) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    weight_ = uniform_tensor({in, out}, -bound, bound, rng, true);
    if (bias) bias_ = uniform_tensor({out}, -bound, bound, rng, true);
  }

  ValueTensor forward(const ValueTensor& x) const {
    if (x.rank() == 0 || x.shape().back() != in_)
      throw DimensionError("Linear expects last axis " + std::to_string(in_) + ", got " + shape_str(x.shape()));
    const std::size_t rows = x.size() / in_;
    auto y = matmul(x.rank() == 2 ? x : reshape(x, {rows, in_}), weight_);
    if (has_bias_) y = add_bias(y, bias_);
    Shape out_shape = x.shape();
    out_shape.back() = out_;
    return x.rank() == 2 ? y : reshape(y, out_shape);
  }

  void collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", &weight_, ParamKind::linear});
    if (has_bias_) out.push_back({prefix + ".bias", &bias_, ParamKind::linear});
  }

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  bool has_bias() const { return has_bias_; }
  ValueTensor& weight() { return weight_; }
  ValueTensor& bias() { return bias_; }
  const ValueTensor& weight() const { return weight_; }
  const ValueTensor& bias() const { return bias_; }

 private:
  std::size_t in_ = 0, out_ = 0;
  bool has_bias_ = true;
  ValueTensor weight_, bias_;
};

enum class Mode { train, eval };

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
};

// Normalizes over every leading axis, per feature (last axis).
//
// train: batch statistics (biased variance), running stats updated by EMA with
//        the unbiased variance.
// eval:  running statistics.
inline ValueTensor batch_norm(const ValueTensor& x, const ValueTensor& gamma, const ValueTensor& beta,
                              BatchNormState& state, Mode mode, double momentum = 0.1, double eps = 1e-5) {
  if (!(eps > 0.0)) throw ParameterError("batch_norm epsilon must be positive");
  const std::size_t n = gamma.size();
  if (x.rank() == 0 || x.shape().back() != n)
    throw DimensionError("batch_norm: feature axis " + std::to_string(n) + " vs input " + shape_str(x.shape()));
  const std::size_t m = x.size() / n;
  if (state.running_mean.size() != n) {
    state.running_mean.assign(n, 0.0);
    state.running_var.assign(n, 1.0);
  }
  auto X = x.data();
  std::vector<double> mu(n, 0.0), var(n, 0.0);
  if (mode == Mode::train) {
    if (m < 2) throw ContractViolation("batch_norm: degenerate batch of " + std::to_string(m) + " rows in train mode");
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t j = 0; j < n; ++j) mu[j] += X[r * n + j];
    for (auto& v : mu) v /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t j = 0; j < n; ++j) {
        const double d = X[r * n + j] - mu[j];
        var[j] += d * d;
      }
    for (std::size_t j = 0; j < n; ++j) {
      var[j] /= static_cast<double>(m);
      state.running_mean[j] = (1.0 - momentum) * state.running_mean[j] + momentum * mu[j];
      state.running_var[j] = (1.0 - momentum) * state.running_var[j] +
                             momentum * var[j] * static_cast<double>(m) / static_cast<double>(m - 1);
    }
  } else {
    mu = state.running_mean;
    var = state.running_var;
  }
  std::vector<double> inv_std(n), xhat(x.size()), out(x.size());
  for (std::size_t j = 0; j < n; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t k = r * n + j;
      xhat[k] = (X[k] - mu[j]) * inv_std[j];
      out[k] = gamma[j] * xhat[k] + beta[j];
    }
  const bool train = mode == Mode::train;
  return ValueTensor::make_op(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [x, gamma, beta, n, m, train, inv_std = std::move(inv_std), xhat = std::move(xhat)](std::span<const double> g) {
        if (gamma.requires_grad() || beta.requires_grad()) {
          auto gg = gamma.grad_buffer();
          auto gb = beta.grad_buffer();
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < n; ++j) {
              gg[j] += g[r * n + j] * xhat[r * n + j];
              gb[j] += g[r * n + j];
            }
        }
        if (!x.requires_grad()) return;
        auto gx = x.grad_buffer();
        if (!train) {
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += g[r * n + j] * gamma[j] * inv_std[j];
          return;
        }
        std::vector<double> sum_g(n, 0.0), sum_gx(n, 0.0);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < n; ++j) {
            sum_g[j] += g[r * n + j];
            sum_gx[j] += g[r * n + j] * xhat[r * n + j];
          }
        const double md = static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t k = r * n + j;
            gx[k] += gamma[j] * inv_std[j] / md * (md * g[k] - sum_g[j] - xhat[k] * sum_gx[j]);
          }
      });
}

class BatchNorm {
 public:
  BatchNorm() = default;
  explicit BatchNorm(std::size_t features)
      : gamma_(ValueTensor::full({features}, 1.0, true)),
        beta_(ValueTensor::zeros({features}, true)),
        running_mean_(ValueTensor::zeros({features})),
        running_var_(ValueTensor::full({features}, 1.0)) {}

  ValueTensor forward(const ValueTensor& x, Mode mode) {
    BatchNormState st{{running_mean_.data().begin(), running_mean_.data().end()},
                      {running_var_.data().begin(), running_var_.data().end()}};
    auto y = batch_norm(x, gamma_, beta_, st, mode, momentum, eps);
    if (mode == Mode::train) {
      std::copy(st.running_mean.begin(), st.running_mean.end(), running_mean_.mutable_data().begin());
      std::copy(st.running_var.begin(), st.running_var.end(), running_var_.mutable_data().begin());
    }
    return y;
  }

  void collect(ParamList& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", &gamma_, ParamKind::norm});
    out.push_back({prefix + ".beta", &beta_, ParamKind::norm});
    out.push_back({prefix + ".running_mean", &running_mean_, ParamKind::buffer});
    out.push_back({prefix + ".running_var", &running_var_, ParamKind::buffer});
  }

  ValueTensor& gamma() { return gamma_; }
  ValueTensor& beta() { return beta_; }

  double momentum = 0.1;
  double eps = 1e-5;

 private:
  ValueTensor gamma_, beta_, running_mean_, running_var_;
};

}  // namespace cpgpe

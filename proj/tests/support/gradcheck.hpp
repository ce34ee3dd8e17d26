#pragma once

// Central-difference gradient checks against the tape.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cpgpe/layers.hpp"
#include "cpgpe/tensor.hpp"

namespace gradcheck {

using cpgpe::ValueTensor;
using LossFn = std::function<ValueTensor(const std::vector<ValueTensor>&)>;

struct Result {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-3});
}

// Inputs are rebuilt as leaves each evaluation so the tape never mixes runs.
inline Result check(const std::vector<ValueTensor>& inputs, const LossFn& f, double h = 1e-4) {
  std::vector<ValueTensor> leaves;
  for (const auto& x : inputs)
    leaves.emplace_back(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
  auto loss = f(leaves);
  cpgpe::backward(loss);
  Result r;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    auto analytic = leaves[i].grad_or_zero();
    for (std::size_t k = 0; k < leaves[i].size(); ++k) {
      auto eval = [&](double delta) {
        cpgpe::NoGradGuard ng;
        std::vector<ValueTensor> xs;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          std::vector<double> v(inputs[j].data().begin(), inputs[j].data().end());
          if (j == i) v[k] += delta;
          xs.emplace_back(inputs[j].shape(), std::move(v));
        }
        return f(xs).item();
      };
      const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
      r.max_rel_error = std::max(r.max_rel_error, rel_error(analytic[k], numeric));
      ++r.checked;
    }
  }
  return r;
}

struct OpCase {
  std::string name;
  std::vector<ValueTensor> inputs;
  LossFn loss;
};

// Weighted sum keeps every output element in play.
inline ValueTensor probe(const ValueTensor& y) {
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.17 * static_cast<double>(i % 7) - 0.05 * static_cast<double>(i % 3);
  return cpgpe::sum(cpgpe::mul(y, ValueTensor(y.shape(), std::move(w))));
}

inline std::vector<OpCase> differentiable_ops(std::uint64_t seed = 11) {
  using namespace cpgpe;
  Rng rng(seed);
  auto r = [&](Shape s) { return normal_tensor(std::move(s), 0.0, 1.0, rng); };
  std::vector<OpCase> cs;
  cs.push_back({"add", {r({2, 3}), r({2, 3})}, [](auto& x) { return probe(add(x[0], x[1])); }});
  cs.push_back({"sub", {r({2, 3}), r({2, 3})}, [](auto& x) { return probe(sub(x[0], x[1])); }});
  cs.push_back({"mul", {r({2, 3}), r({2, 3})}, [](auto& x) { return probe(mul(x[0], x[1])); }});
  cs.push_back({"scale", {r({4})}, [](auto& x) { return probe(scale(x[0], -1.7)); }});
  cs.push_back({"sum", {r({3, 2})}, [](auto& x) { return sum(mul(x[0], x[0])); }});
  cs.push_back({"mean", {r({3, 2})}, [](auto& x) { return mean(mul(x[0], x[0])); }});
  cs.push_back({"mse_loss", {r({2, 3}), r({2, 3})}, [](auto& x) { return mse_loss(x[0], x[1]); }});
  cs.push_back({"matmul", {r({4, 3}), r({3, 2})}, [](auto& x) { return probe(matmul(x[0], x[1])); }});
  cs.push_back({"add_bias", {r({3, 4}), r({4})}, [](auto& x) { return probe(add_bias(x[0], x[1])); }});
  cs.push_back({"reshape", {r({2, 6})}, [](auto& x) { return probe(reshape(x[0], {3, 4})); }});
  cs.push_back({"concat", {r({2, 2, 3}), r({2, 1, 3})}, [](auto& x) { return probe(concat(x[0], x[1], 1)); }});
  cs.push_back({"weighted_sum_axis", {r({3, 2, 2})},
                [](auto& x) { return probe(weighted_sum_axis(x[0], 0, {0.5, -1.0, 2.0})); }});
  cs.push_back({"mean_axis", {r({2, 4, 3})}, [](auto& x) { return probe(mean_axis(x[0], 1)); }});
  cs.push_back({"select", {r({2, 3, 2})}, [](auto& x) { return probe(select(x[0], 1, 2)); }});
  cs.push_back({"stack", {r({2, 3}), r({2, 3})}, [](auto& x) { return probe(stack({x[0], x[1]}, 1)); }});
  cs.push_back({"broadcast_axis", {r({2, 1, 3})}, [](auto& x) { return probe(broadcast_axis(x[0], 1, 4)); }});
  cs.push_back({"shift_axis", {r({2, 5, 2})}, [](auto& x) { return probe(shift_axis(x[0], 1, 2)); }});
  for (auto mode : {Mode::train, Mode::eval}) {
    cs.push_back({std::string("batch_norm/") + (mode == Mode::train ? "train" : "eval"),
                  {r({8, 4}), r({4}), r({4})},
                  [mode](auto& x) {
                    BatchNormState st{{0.1, -0.2, 0.3, 0.0}, {1.5, 0.7, 1.0, 2.0}};
                    return probe(batch_norm(x[0], x[1], x[2], st, mode));
                  }});
  }
  cs.push_back({"two_layer_net", {r({5, 3}), r({3, 4}), r({4}), r({4, 2})}, [](auto& x) {
                  auto h = add_bias(matmul(x[0], x[1]), x[2]);
                  return mse_loss(matmul(mul(h, h), x[3]), ValueTensor::zeros({5, 2}));
                }});
  return cs;
}

}  // namespace gradcheck

#pragma once

// Surrogate-gradient BPTT training with early stopping on validation R^2.

#include <chrono>
#include <limits>
#include <cmath>
#include <numbers>
#include "json.hpp"
#include <ostream>
#include <string>
#include <vector>

#include "cpgpe/metrics.hpp"
#include "cpgpe/models.hpp"

namespace cpgpe {

enum class OptimizerKind { adam, sgd };

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ParameterError("unknown optimizer '" + s + "'");
}

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 3e-3;
  double momentum = 0.9;  // sgd
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  bool cosine = false;
  std::size_t epochs = 20;
  std::size_t batch = 32;
  std::size_t patience = 30;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(lr >= 0.0)) throw ParameterError("learning rate must be >= 0");
    if (batch < 2) throw ParameterError("batch size must be >= 2 (batch norm in train mode)");
    if (epochs < 1) throw ParameterError("epochs must be >= 1");
  }
};

class Optimizer {
 public:
  Optimizer(ParamList params, const TrainConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor->size(), 0.0);
      v_.emplace_back(p.tensor->size(), 0.0);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor->zero_grad();
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.trainable()) continue;
      auto g = p.tensor->grad();
      if (g.empty()) continue;
      auto w = p.tensor->mutable_data();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        if (cfg_.optimizer == OptimizerKind::adam) {
          m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
          v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
          w[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.adam_eps);
        } else {
          m[k] = cfg_.momentum * m[k] + g[k];
          w[k] -= lr * m[k];
        }
      }
    }
  }

 private:
  ParamList params_;
  TrainConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_r2 = 0.0;
  double wall_ms = 0.0;
};

inline nlohmann::json to_json(const EpochLog& e) {
  return {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"valid_R2", e.valid_r2}, {"wall_ms", e.wall_ms}};
}

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_valid_r2 = -std::numeric_limits<double>::infinity();
  bool stopped_early = false;
};

using ParamSnapshot = std::vector<std::vector<double>>;

inline ParamSnapshot snapshot(const ParamList& ps) {
  ParamSnapshot s;
  for (const auto& p : ps) s.emplace_back(p.tensor->data().begin(), p.tensor->data().end());
  return s;
}

inline void restore(ParamList& ps, const ParamSnapshot& s) {
  for (std::size_t i = 0; i < ps.size(); ++i) std::copy(s[i].begin(), s[i].end(), ps[i].tensor->mutable_data().begin());
}

// Pooled R^2 of the model on a window set, raw scale.
inline double validation_r2(SpikingForecaster& model, const Windows& w) {
  return compute_r2_pooled(model.predict(w.history), w.target).value;
}

// One optimizer step on a batch; returns the standardized MSE.
inline double train_step(SpikingForecaster& model, Optimizer& opt, const ValueTensor& history,
                         const ValueTensor& target, double lr) {
  opt.zero_grad();
  auto pred = model.forward(history, Mode::train);
  auto loss = mse_loss(pred, model.standardizer().apply(target));
  const double value = loss.item();
  if (!std::isfinite(value)) throw NumericError("training diverged: loss is " + std::to_string(value));
  backward(loss);
  opt.step(lr);
  return value;
}

// The model's standardizer is replaced by data.standardizer. If `jsonl` is
// given, one JSON object per epoch is written to it.
inline TrainResult train(SpikingForecaster& model, const SplitData& data, const TrainConfig& cfg,
                         std::ostream* jsonl = nullptr) {
  cfg.validate();
  model.standardizer() = data.standardizer;
  auto params = model.parameters();
  Optimizer opt(params, cfg);
  Rng rng(cfg.seed);
  const std::size_t n = data.train.count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainResult res;
  ParamSnapshot best = snapshot(params);
  std::size_t since_best = 0;
  const bool have_valid = data.valid.count() >= 2;
  const std::size_t total_steps = cfg.epochs * ((n + cfg.batch - 1) / cfg.batch);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += cfg.batch) {
      const std::size_t m = std::min(cfg.batch, n - b);
      if (m < 2) continue;
      const double lr = cfg.cosine ? 0.5 * cfg.lr * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                                                        static_cast<double>(total_steps)))
                                   : cfg.lr;
      ++step;
      auto batch = slice_windows(data.train, std::span<const std::size_t>(order.data() + b, m));
      loss_sum += train_step(model, opt, batch.history, batch.target, lr);
      ++batches;
    }
    EpochLog e;
    e.epoch = epoch;
    e.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    e.valid_r2 = have_valid ? validation_r2(model, data.valid) : -e.train_loss;
    e.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    res.log.push_back(e);
    if (jsonl) *jsonl << to_json(e).dump() << '\n';
    if (e.valid_r2 > res.best_valid_r2) {
      res.best_valid_r2 = e.valid_r2;
      res.best_epoch = epoch;
      best = snapshot(params);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      res.stopped_early = true;
      break;
    }
  }
  restore(params, best);
  return res;
}

}  // namespace cpgpe

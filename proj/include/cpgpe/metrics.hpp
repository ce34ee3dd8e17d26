#pragma once

// Forecast metrics over (M samples, L horizons, C channels).
//
//   compute_r2:        mean over m,c,l of 1 - (Y - Yhat)^2 / (Y - Ybar_cl)^2
//   compute_r2_pooled: mean over c,l of 1 - sum_m (Y - Yhat)^2 / sum_m (Y - Ybar_cl)^2
//   compute_rse:       sqrt(sum ||Y - Yhat||^2 / sum ||Y - Ybar||^2), Ybar the global mean

#include <cmath>
#include <vector>

#include "cpgpe/errors.hpp"
#include "cpgpe/tensor.hpp"

namespace cpgpe {

struct R2Result {
  double value = 0.0;
  std::size_t counted = 0;
  std::size_t excluded = 0;  // terms with a zero denominator
};

namespace detail {

inline void check_forecast_shapes(const ValueTensor& pred, const ValueTensor& target) {
  if (pred.shape() != target.shape() || target.rank() != 3)
    throw DimensionError("metrics need equal (M,L,C) shapes, got " + shape_str(pred.shape()) + " and " +
                         shape_str(target.shape()));
  if (target.dim(0) == 0) throw DimensionError("metrics need at least one sample");
}

// Per-(l,c) mean over samples.
inline std::vector<double> cell_means(const ValueTensor& y) {
  const std::size_t m = y.dim(0), cells = y.dim(1) * y.dim(2);
  std::vector<double> mean(cells, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < cells; ++k) mean[k] += y[i * cells + k];
  for (auto& v : mean) v /= static_cast<double>(m);
  return mean;
}

}  // namespace detail

inline R2Result compute_r2(const ValueTensor& pred, const ValueTensor& target) {
  detail::check_forecast_shapes(pred, target);
  const std::size_t m = target.dim(0), cells = target.dim(1) * target.dim(2);
  const auto mean = detail::cell_means(target);
  R2Result r;
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < cells; ++k) {
      const double y = target[i * cells + k];
      const double den = (y - mean[k]) * (y - mean[k]);
      if (den == 0.0) {
        ++r.excluded;
        continue;
      }
      const double e = y - pred[i * cells + k];
      acc += 1.0 - e * e / den;
      ++r.counted;
    }
  if (r.counted == 0) throw NumericError("compute_r2: every term has zero variance");
  r.value = acc / static_cast<double>(r.counted);
  return r;
}

inline R2Result compute_r2_pooled(const ValueTensor& pred, const ValueTensor& target) {
  detail::check_forecast_shapes(pred, target);
  const std::size_t m = target.dim(0), cells = target.dim(1) * target.dim(2);
  const auto mean = detail::cell_means(target);
  std::vector<double> num(cells, 0.0), den(cells, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < cells; ++k) {
      const double y = target[i * cells + k];
      const double e = y - pred[i * cells + k];
      num[k] += e * e;
      den[k] += (y - mean[k]) * (y - mean[k]);
    }
  R2Result r;
  double acc = 0.0;
  for (std::size_t k = 0; k < cells; ++k) {
    if (den[k] == 0.0) {
      ++r.excluded;
      continue;
    }
    acc += 1.0 - num[k] / den[k];
    ++r.counted;
  }
  if (r.counted == 0) throw NumericError("compute_r2_pooled: every cell has zero variance");
  r.value = acc / static_cast<double>(r.counted);
  return r;
}

inline double compute_rse(const ValueTensor& pred, const ValueTensor& target) {
  detail::check_forecast_shapes(pred, target);
  double mean = 0.0;
  for (double y : target.data()) mean += y;
  mean /= static_cast<double>(target.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    num += (target[i] - pred[i]) * (target[i] - pred[i]);
    den += (target[i] - mean) * (target[i] - mean);
  }
  if (den == 0.0) throw NumericError("compute_rse: constant target, RSE undefined");
  return std::sqrt(num / den);
}

struct HorizonMetrics {
  std::size_t horizon = 0;
  double r2 = 0.0;
  double r2_pooled = 0.0;
  double rse = 0.0;
};

struct MetricReport {
  double r2 = 0.0;
  double r2_pooled = 0.0;
  double rse = 0.0;
  std::size_t r2_excluded = 0;
  std::size_t n_samples = 0, n_channels = 0, pred_len = 0;
  std::vector<HorizonMetrics> per_horizon;
};

inline ValueTensor horizon_slice(const ValueTensor& x, std::size_t l) {
  const std::size_t m = x.dim(0), lp = x.dim(1), c = x.dim(2);
  std::vector<double> v(m * c);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < c; ++k) v[i * c + k] = x[(i * lp + l) * c + k];
  return ValueTensor({m, 1, c}, std::move(v));
}

inline MetricReport evaluate_forecast(const ValueTensor& pred, const ValueTensor& target) {
  auto r2 = compute_r2(pred, target);
  MetricReport rep;
  rep.r2 = r2.value;
  rep.r2_excluded = r2.excluded;
  rep.r2_pooled = compute_r2_pooled(pred, target).value;
  rep.rse = compute_rse(pred, target);
  rep.n_samples = target.dim(0);
  rep.pred_len = target.dim(1);
  rep.n_channels = target.dim(2);
  for (std::size_t l = 0; l < rep.pred_len; ++l) {
    auto p = horizon_slice(pred, l), y = horizon_slice(target, l);
    HorizonMetrics h{l + 1, 0.0, 0.0, 0.0};
    try {
      h.r2 = compute_r2(p, y).value;
      h.r2_pooled = compute_r2_pooled(p, y).value;
      h.rse = compute_rse(p, y);
    } catch (const NumericError&) {
      h.r2 = h.r2_pooled = h.rse = std::nan("");
    }
    rep.per_horizon.push_back(h);
  }
  return rep;
}

}  // namespace cpgpe

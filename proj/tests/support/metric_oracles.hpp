#pragma once

// Loop-by-loop forecasting metrics over Y[m][l][c], written from the
// definitions without the library's helpers.

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using Cube = std::vector<std::vector<std::vector<double>>>;  // [m][l][c]

inline Cube random_cube(std::size_t m, std::size_t l, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Cube y(m, std::vector<std::vector<double>>(l, std::vector<double>(c)));
  for (auto& a : y)
    for (auto& b : a)
      for (auto& v : b) v = n(rng);
  return y;
}

inline std::vector<double> flatten(const Cube& y) {
  std::vector<double> out;
  for (const auto& a : y)
    for (const auto& b : a) out.insert(out.end(), b.begin(), b.end());
  return out;
}

// 1/(MCL) sum_m sum_c sum_l [1 - (Y - Yhat)^2 / (Y - mean_m Y)^2]
inline double r2(const Cube& pred, const Cube& y) {
  const std::size_t M = y.size(), L = y[0].size(), C = y[0][0].size();
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t c = 0; c < C; ++c) {
        double mean = 0.0;
        for (std::size_t k = 0; k < M; ++k) mean += y[k][l][c];
        mean /= static_cast<double>(M);
        const double den = (y[m][l][c] - mean) * (y[m][l][c] - mean);
        if (den == 0.0) continue;
        total += 1.0 - (y[m][l][c] - pred[m][l][c]) * (y[m][l][c] - pred[m][l][c]) / den;
        ++n;
      }
  return total / static_cast<double>(n);
}

// Per (l, c): 1 - SSE / SST over samples, then averaged over cells.
inline double r2_pooled(const Cube& pred, const Cube& y) {
  const std::size_t M = y.size(), L = y[0].size(), C = y[0][0].size();
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t c = 0; c < C; ++c) {
      double mean = 0.0;
      for (std::size_t m = 0; m < M; ++m) mean += y[m][l][c];
      mean /= static_cast<double>(M);
      double sse = 0.0, sst = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        sse += (y[m][l][c] - pred[m][l][c]) * (y[m][l][c] - pred[m][l][c]);
        sst += (y[m][l][c] - mean) * (y[m][l][c] - mean);
      }
      if (sst == 0.0) continue;
      total += 1.0 - sse / sst;
      ++n;
    }
  return total / static_cast<double>(n);
}

// sqrt(sum ||Y - Yhat||^2 / sum ||Y - mean(Y)||^2), mean over every entry.
inline double rse(const Cube& pred, const Cube& y) {
  double mean = 0.0;
  std::size_t n = 0;
  for (const auto& a : y)
    for (const auto& b : a)
      for (double v : b) {
        mean += v;
        ++n;
      }
  mean /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t m = 0; m < y.size(); ++m)
    for (std::size_t l = 0; l < y[m].size(); ++l)
      for (std::size_t c = 0; c < y[m][l].size(); ++c) {
        num += (y[m][l][c] - pred[m][l][c]) * (y[m][l][c] - pred[m][l][c]);
        den += (y[m][l][c] - mean) * (y[m][l][c] - mean);
      }
  return std::sqrt(num / den);
}

inline bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace oracle

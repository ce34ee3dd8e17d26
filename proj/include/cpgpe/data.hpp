#pragma once

// Multivariate series: synthetic generation, CSV I/O, sliding windows and a
// chronological train/valid/test split.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cpgpe/errors.hpp"
#include "cpgpe/tensor.hpp"

namespace cpgpe {

// Row-major (length, channels).
struct Series {
  std::size_t length = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  double at(std::size_t t, std::size_t c) const { return values[t * channels + c]; }
};

struct SineComponent {
  double period = 50.0;
  double amplitude = 1.0;
  double phase = 0.0;
};

struct SyntheticSpec {
  std::size_t channels = 3;
  std::size_t length = 1600;
  // Per channel; empty means default_components(channels).
  std::vector<std::vector<SineComponent>> components;
  double noise = 0.1;
  std::uint64_t seed = 1;

  // Two incommensurate periods per channel, second at half amplitude,
  // channel c phase-shifted by c radians.
  static std::vector<std::vector<SineComponent>> default_components(std::size_t channels) {
    static const double periods[][2] = {{17, 41}, {23, 53}, {29, 67}, {31, 71}, {37, 73}, {43, 79}, {47, 83}, {59, 89}};
    std::vector<std::vector<SineComponent>> out;
    for (std::size_t c = 0; c < channels; ++c) {
      const auto& p = periods[c % 8];
      const double stretch = 1.0 + static_cast<double>(c / 8);
      out.push_back({{p[0] * stretch, 1.0, static_cast<double>(c)}, {p[1] * stretch, 0.5, static_cast<double>(c)}});
    }
    return out;
  }
};

inline Series gen_synthetic(const SyntheticSpec& spec) {
  if (spec.channels < 1 || spec.length < 2) throw ParameterError("synthetic series needs channels >= 1 and length >= 2");
  if (!(spec.noise >= 0.0)) throw ParameterError("synthetic noise must be >= 0");
  auto comps = spec.components.empty() ? SyntheticSpec::default_components(spec.channels) : spec.components;
  if (comps.size() != spec.channels) throw ParameterError("synthetic spec: component list per channel required");
  Series s{spec.length, spec.channels, std::vector<double>(spec.length * spec.channels, 0.0)};
  Rng rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t t = 0; t < spec.length; ++t)
    for (std::size_t c = 0; c < spec.channels; ++c) {
      double v = 0.0;
      for (const auto& k : comps[c]) {
        if (!(k.period > 0.0)) throw ParameterError("sine component period must be positive");
        v += k.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / k.period + k.phase);
      }
      s.values[t * spec.channels + c] = v;
    }
  if (spec.noise > 0.0)
    for (auto& v : s.values) v += spec.noise * noise(rng);
  return s;
}

inline void write_csv(std::ostream& os, const Series& s, bool header = true) {
  if (header) {
    for (std::size_t c = 0; c < s.channels; ++c) os << (c ? "," : "") << "x" << c;
    os << '\n';
  }
  char buf[64];
  for (std::size_t t = 0; t < s.length; ++t) {
    for (std::size_t c = 0; c < s.channels; ++c) {
      auto r = std::to_chars(buf, buf + sizeof buf, s.at(t, c));
      if (c) os << ',';
      os.write(buf, r.ptr - buf);
    }
    os << '\n';
  }
}

namespace detail {

inline std::string trim(std::string_view v) {
  const auto b = v.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = v.find_last_not_of(" \t\r");
  return std::string(v.substr(b, e - b + 1));
}

inline bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  auto r = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return r.ec == std::errc() && r.ptr == cell.data() + cell.size();
}

inline std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

}  // namespace detail

// One column per variable, one row per tick. A first row that does not parse
// as numbers is taken as a header. Blank lines are skipped.
inline Series load_csv(std::istream& is) {
  Series s;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_cells(line);
    std::vector<double> row(cells.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < cells.size() && numeric; ++i)
      if (!detail::parse_double(cells[i], row[i])) {
        numeric = false;
        bad = i;
      }
    if (first) {
      first = false;
      s.channels = cells.size();
      if (!numeric) continue;
    }
    if (cells.size() != s.channels)
      throw ParseError("ragged row: expected " + std::to_string(s.channels) + " columns, got " +
                           std::to_string(cells.size()),
                       lineno);
    if (!numeric) throw ParseError("non-numeric cell '" + cells[bad] + "' in column " + std::to_string(bad), lineno);
    for (double v : row)
      if (!std::isfinite(v)) throw ParseError("non-finite value", lineno);
    s.values.insert(s.values.end(), row.begin(), row.end());
    ++s.length;
  }
  if (s.length == 0) throw ParseError("no data rows", lineno);
  return s;
}

inline Series load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open '" + path + "'", 0);
  return load_csv(f);
}

struct SplitRatios {
  double train = 0.7;
  double valid = 0.2;
  double test = 0.1;

  void validate() const {
    if (train <= 0 || valid < 0 || test <= 0) throw ParameterError("split ratios must be positive");
    if (std::abs(train + valid + test - 1.0) > 1e-9) throw ParameterError("split ratios must sum to 1");
  }
};

struct WindowSpec {
  std::size_t obs_len = 48;
  std::size_t pred_len = 12;
  SplitRatios ratios;
};

// history (W, obs_len, C), target (W, pred_len, C); start[w] is the first tick
// of window w.
struct Windows {
  ValueTensor history;
  ValueTensor target;
  std::vector<std::size_t> start;

  std::size_t count() const { return start.size(); }
};

inline std::size_t window_count(std::size_t length, std::size_t obs_len, std::size_t pred_len) {
  return length + 1 < obs_len + pred_len + 1 ? 0 : length - obs_len - pred_len + 1;
}

inline Windows make_windows(const Series& s, std::size_t obs_len, std::size_t pred_len, std::size_t first,
                            std::size_t last) {
  if (obs_len < 1 || pred_len < 1) throw ParameterError("window lengths must be >= 1");
  const std::size_t n = last > first ? last - first : 0;
  const std::size_t c = s.channels;
  std::vector<double> h(n * obs_len * c), y(n * pred_len * c);
  Windows w;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t0 = first + k;
    std::copy_n(s.values.begin() + static_cast<std::ptrdiff_t>(t0 * c), obs_len * c, h.begin() + static_cast<std::ptrdiff_t>(k * obs_len * c));
    std::copy_n(s.values.begin() + static_cast<std::ptrdiff_t>((t0 + obs_len) * c), pred_len * c,
                y.begin() + static_cast<std::ptrdiff_t>(k * pred_len * c));
    w.start.push_back(t0);
  }
  w.history = ValueTensor({n, obs_len, c}, std::move(h));
  w.target = ValueTensor({n, pred_len, c}, std::move(y));
  return w;
}

inline Windows slice_windows(const Windows& w, std::span<const std::size_t> idx) {
  const std::size_t lo = w.history.dim(1), lp = w.target.dim(1), c = w.history.dim(2);
  std::vector<double> h(idx.size() * lo * c), y(idx.size() * lp * c);
  Windows out;
  auto H = w.history.data();
  auto Y = w.target.data();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::copy_n(H.begin() + static_cast<std::ptrdiff_t>(idx[k] * lo * c), lo * c, h.begin() + static_cast<std::ptrdiff_t>(k * lo * c));
    std::copy_n(Y.begin() + static_cast<std::ptrdiff_t>(idx[k] * lp * c), lp * c, y.begin() + static_cast<std::ptrdiff_t>(k * lp * c));
    out.start.push_back(w.start[idx[k]]);
  }
  out.history = ValueTensor({idx.size(), lo, c}, std::move(h));
  out.target = ValueTensor({idx.size(), lp, c}, std::move(y));
  return out;
}

// Per-channel affine map fitted on the training ticks.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
  double eps = 1e-8;

  static Standardizer fit(const Series& s, std::size_t rows) {
    if (rows < 1 || rows > s.length) throw ParameterError("standardizer: bad row count");
    Standardizer st;
    st.mean.assign(s.channels, 0.0);
    st.scale.assign(s.channels, 0.0);
    for (std::size_t t = 0; t < rows; ++t)
      for (std::size_t c = 0; c < s.channels; ++c) st.mean[c] += s.at(t, c);
    for (auto& m : st.mean) m /= static_cast<double>(rows);
    for (std::size_t t = 0; t < rows; ++t)
      for (std::size_t c = 0; c < s.channels; ++c) {
        const double d = s.at(t, c) - st.mean[c];
        st.scale[c] += d * d;
      }
    for (auto& v : st.scale) v = std::sqrt(v / static_cast<double>(rows) + st.eps);
    return st;
  }

  static Standardizer identity(std::size_t channels) {
    return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
  }

  std::size_t channels() const { return mean.size(); }

  // Works on any (..., C) tensor.
  ValueTensor apply(const ValueTensor& x) const {
    std::vector<double> v(x.data().begin(), x.data().end());
    const std::size_t c = mean.size();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - mean[i % c]) / scale[i % c];
    return ValueTensor(x.shape(), std::move(v));
  }

  ValueTensor invert(const ValueTensor& x) const {
    std::vector<double> v(x.data().begin(), x.data().end());
    const std::size_t c = mean.size();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] * scale[i % c] + mean[i % c];
    return ValueTensor(x.shape(), std::move(v));
  }
};

struct SplitData {
  Windows train, valid, test;
  std::size_t total_windows = 0;
  std::size_t purged = 0;  // windows dropped at each split boundary
  Standardizer standardizer;
};

// Windows are cut in chronological order by the ratios; then the first
// pred_len-1 windows of valid and of test are dropped so that no target
// tick belongs to two splits. The standardizer sees only training ticks.
inline SplitData split_chronological(const Series& s, const WindowSpec& spec) {
  spec.ratios.validate();
  const std::size_t total = window_count(s.length, spec.obs_len, spec.pred_len);
  if (total < 3) throw ParameterError("series too short for " + std::to_string(spec.obs_len) + "+" +
                                      std::to_string(spec.pred_len) + " windows");
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(total) * spec.ratios.train));
  const auto n_valid = static_cast<std::size_t>(std::floor(static_cast<double>(total) * spec.ratios.valid));
  const std::size_t gap = spec.pred_len - 1;
  SplitData d;
  d.total_windows = total;
  d.purged = gap;
  const std::size_t v0 = std::min(n_train + gap, n_train + n_valid);
  const std::size_t t0 = std::min(n_train + n_valid + gap, total);
  d.train = make_windows(s, spec.obs_len, spec.pred_len, 0, n_train);
  d.valid = make_windows(s, spec.obs_len, spec.pred_len, v0, n_train + n_valid);
  d.test = make_windows(s, spec.obs_len, spec.pred_len, t0, total);
  if (d.train.count() == 0 || d.test.count() == 0) throw ParameterError("split leaves an empty train or test set");
  d.standardizer = Standardizer::fit(s, n_train - 1 + spec.obs_len + spec.pred_len);
  return d;
}

}  // namespace cpgpe

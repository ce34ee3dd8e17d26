#pragma once

// Spike-form CPG positional codes, the float sinusoidal baseline and the
// random-spike baseline.

#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cpgpe/errors.hpp"
#include "cpgpe/tensor.hpp"

namespace cpgpe {

// How (step s, position p) map onto the flattened CPG time index.
enum class FlattenOrder {
  step_major,      // t = s * L + p
  position_major,  // t = p * T + s
};

inline std::string to_string(FlattenOrder o) { return o == FlattenOrder::step_major ? "step_major" : "position_major"; }

inline FlattenOrder flatten_order_from_string(const std::string& s) {
  if (s == "step_major" || s == "step-major") return FlattenOrder::step_major;
  if (s == "position_major" || s == "position-major") return FlattenOrder::position_major;
  throw ParameterError("unknown flatten order '" + s + "'");
}

struct CPGPEConfig {
  int n_pairs = 20;
  double tau = 10000.0;
  double eta = 1.0;
  double v_thres = 0.8;
  FlattenOrder order = FlattenOrder::step_major;

  std::size_t channels() const { return 2 * static_cast<std::size_t>(n_pairs); }

  void validate() const {
    if (n_pairs < 1) throw ParameterError("CPG-PE needs at least one neuron pair");
    if (!(tau > 1.0)) throw ParameterError("CPG-PE base period tau must exceed 1");
    if (!(eta > 0.0)) throw ParameterError("CPG-PE frequency scale eta must be positive");
    if (!(v_thres >= -1.0 && v_thres < 1.0)) throw ParameterError("CPG-PE threshold must lie in [-1, 1)");
  }

  // Continuous period of pair i (1-based).
  double period(int i) const { return 2.0 * std::acos(-1.0) * std::pow(tau, static_cast<double>(i) / n_pairs) / eta; }
};

using PECode = std::vector<std::uint8_t>;

inline std::size_t flatten_index(std::size_t step, std::size_t position, std::size_t steps, std::size_t length,
                                 FlattenOrder order) {
  return order == FlattenOrder::step_major ? step * length + position : position * steps + step;
}

// Channel 2i-2 thresholds cos, channel 2i-1 thresholds sin, for i = 1..N.
// A tie with the threshold spikes.
inline PECode cpg_pe_at(std::uint64_t t, const CPGPEConfig& cfg) {
  cfg.validate();
  PECode code(cfg.channels());
  const double td = static_cast<double>(t);
  for (int i = 1; i <= cfg.n_pairs; ++i) {
    const double angle = cfg.eta * td / std::pow(cfg.tau, static_cast<double>(i) / cfg.n_pairs);
    code[2 * i - 2] = std::cos(angle) - cfg.v_thres >= 0.0 ? 1 : 0;
    code[2 * i - 1] = std::sin(angle) - cfg.v_thres >= 0.0 ? 1 : 0;
  }
  return code;
}

// (T, 1, L, 2N); broadcast over batch by the caller.
inline SpikeTensor generate_pe(std::size_t steps, std::size_t length, const CPGPEConfig& cfg) {
  if (steps < 1 || length < 1) throw ParameterError("generate_pe needs T >= 1 and L >= 1");
  cfg.validate();
  const std::size_t width = cfg.channels();
  std::vector<std::uint8_t> bits(steps * length * width);
  for (std::size_t s = 0; s < steps; ++s)
    for (std::size_t p = 0; p < length; ++p) {
      auto code = cpg_pe_at(flatten_index(s, p, steps, length, cfg.order), cfg);
      std::copy(code.begin(), code.end(), bits.begin() + static_cast<std::ptrdiff_t>((s * length + p) * width));
    }
  return SpikeTensor::from_bits({steps, 1, length, width}, bits);
}

// Codes of a (T,1,L,W) PE tensor listed by flattened index.
inline std::vector<PECode> pe_codes(const SpikeTensor& pe, FlattenOrder order) {
  const std::size_t steps = pe.steps(), length = pe.positions(), width = pe.features();
  std::vector<PECode> codes(steps * length, PECode(width));
  for (std::size_t s = 0; s < steps; ++s)
    for (std::size_t p = 0; p < length; ++p) {
      auto& c = codes[flatten_index(s, p, steps, length, order)];
      for (std::size_t d = 0; d < width; ++d) c[d] = pe.at(s, 0, p, d);
    }
  return codes;
}

// Fraction of codes whose exact bit pattern appears at least twice.
inline double repetition_rate(std::span<const PECode> codes) {
  if (codes.empty()) throw ContractViolation("repetition_rate of an empty code list");
  std::map<PECode, std::size_t> counts;
  for (const auto& c : codes) ++counts[c];
  std::size_t repeated = 0;
  for (const auto& [code, n] : counts)
    if (n > 1) repeated += n;
  return static_cast<double>(repeated) / static_cast<double>(codes.size());
}

// PE[2i] = sin(pos / 10000^(2i/d)), PE[2i+1] = cos(...)
inline std::vector<double> float_pe(double pos, int d_model) {
  if (d_model <= 0 || d_model % 2 != 0) throw ParameterError("float_pe needs a positive even d_model");
  std::vector<double> pe(static_cast<std::size_t>(d_model));
  for (int i = 0; i < d_model / 2; ++i) {
    const double w = pos / std::pow(10000.0, 2.0 * i / static_cast<double>(d_model));
    pe[2 * i] = std::sin(w);
    pe[2 * i + 1] = std::cos(w);
  }
  return pe;
}

// (L, d_model) table for positions 0..L-1.
inline ValueTensor float_pe_table(std::size_t length, int d_model) {
  std::vector<double> v;
  v.reserve(length * static_cast<std::size_t>(d_model));
  for (std::size_t p = 0; p < length; ++p) {
    auto row = float_pe(static_cast<double>(p), d_model);
    v.insert(v.end(), row.begin(), row.end());
  }
  return ValueTensor({length, static_cast<std::size_t>(d_model)}, std::move(v));
}

// Seeded Bernoulli spike matrix of shape (1, 1, seq_len, width).
inline SpikeTensor random_pe(std::size_t seq_len, std::size_t width, double spike_prob, std::uint64_t seed) {
  if (!(spike_prob >= 0.0 && spike_prob <= 1.0)) throw ParameterError("random_pe spike probability must lie in [0,1]");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint8_t> bits(seq_len * width);
  for (auto& b : bits) b = u(rng) < spike_prob ? 1 : 0;
  return SpikeTensor::from_bits({1, 1, seq_len, width}, bits);
}

// Random codes laid out like generate_pe: (T, 1, L, width), row t = s*L + p.
inline SpikeTensor random_pe_grid(std::size_t steps, std::size_t length, std::size_t width, double spike_prob,
                                  std::uint64_t seed) {
  auto flat = random_pe(steps * length, width, spike_prob, seed);
  return SpikeTensor::from_bits({steps, 1, length, width}, flat.bits());
}

// Raster CSV: header "t,c0,c1,...", one row per flattened index.
inline void write_pe_csv(std::ostream& os, const SpikeTensor& pe, FlattenOrder order) {
  const auto codes = pe_codes(pe, order);
  os << 't';
  for (std::size_t d = 0; d < pe.features(); ++d) os << ",c" << d;
  os << '\n';
  for (std::size_t t = 0; t < codes.size(); ++t) {
    os << t;
    for (auto b : codes[t]) os << ',' << static_cast<int>(b);
    os << '\n';
  }
}

}  // namespace cpgpe

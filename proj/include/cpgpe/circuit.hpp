#pragma once

// Two-LIF realization of one CPG-PE channel: an emitter that rests R steps and
// bursts K spikes, and a resetter that ends the burst.
//
//   I_e(t) = I_c1 + S_e(t-1)(U_thr - I_c1 - V_reset) - S_r(t-1) U_thr
//   I_r(t) = S_e(t-1) I_c2 - S_r(t-1)(I_c2 + V_reset)
//   I_c1 = U_thr b(1-b)/(b - b^R),  I_c2 = U_thr b(1-b)/(b - b^(K-1))
//
// The simulator is templated on the scalar so the grid can run in exact
// rational arithmetic: the currents put U exactly on the threshold, and in
// double precision that tie is decided by rounding.

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cpgpe/errors.hpp"

namespace cpgpe {

using Rational = boost::multiprecision::cpp_rational;

inline double to_double(double v) { return v; }
inline double to_double(const Rational& v) { return v.convert_to<double>(); }

// Exact decimal -> rational (0.95 -> 19/20) so grid values are what they read as.
inline Rational rational_from_decimal(double v, int digits = 9) {
  const auto scale = static_cast<std::int64_t>(std::llround(std::pow(10.0, digits)));
  return Rational(std::llround(v * static_cast<double>(scale)), scale);
}

template <class S>
S int_pow(const S& b, int n) {
  S r = 1;
  for (int i = 0; i < n; ++i) r *= b;
  return r;
}

// How the base currents are obtained from (R, K).
enum class CurrentRule {
  stated,   // current formulas evaluated at (R, K)
  shifted,  // the same formulas evaluated at (R+1, K+1)
};

inline std::string to_string(CurrentRule r) { return r == CurrentRule::stated ? "stated" : "shifted"; }

inline CurrentRule current_rule_from_string(const std::string& s) {
  if (s == "stated") return CurrentRule::stated;
  if (s == "shifted") return CurrentRule::shifted;
  throw ParameterError("unknown current rule '" + s + "'");
}

template <class S>
struct Currents {
  S i_c1;
  S i_c2;
};

template <class S>
Currents<S> derive_currents(const S& beta, const S& u_thr, int R, int K) {
  if (!(beta > 0 && beta < 1)) throw ParameterError("circuit beta must lie in (0,1)");
  if (R < 2) throw ParameterError("R=" + std::to_string(R) + " gives beta - beta^R <= 0 in I_c1; need R >= 2");
  if (K < 3) throw ParameterError("K=" + std::to_string(K) + " gives beta - beta^(K-1) <= 0 in I_c2; need K >= 3");
  const S num = u_thr * beta * (1 - beta);
  return {num / (beta - int_pow(beta, R)), num / (beta - int_pow(beta, K - 1))};
}

template <class S>
struct CircuitParams {
  S beta = S(9) / 10;
  S u_thr = 1;
  S v_reset = 0;
  int R = 5;
  int K = 3;
  S i_c1 = 0;
  S i_c2 = 0;

  static CircuitParams make(const S& beta, const S& u_thr, const S& v_reset, int R, int K,
                            CurrentRule rule = CurrentRule::stated) {
    if (!(u_thr > v_reset)) throw ParameterError("circuit u_thr must exceed v_reset");
    const int shift = rule == CurrentRule::shifted ? 1 : 0;
    auto c = derive_currents(beta, u_thr, R + shift, K + shift);
    return {beta, u_thr, v_reset, R, K, c.i_c1, c.i_c2};
  }

  int period() const { return R + K; }
};

template <class S>
struct CircuitStep {
  S u_e, u_r;
  int s_e, s_r;
  S i_e, i_r;
};

template <class S>
using CircuitTrace = std::vector<CircuitStep<S>>;

// Steps 0..n_steps-1. Both neurons start in the post-reset state (previous
// spikes 1, H = V_reset) so the injected currents cancel and U(0) = 0.
template <class S>
CircuitTrace<S> simulate_circuit(const CircuitParams<S>& p, int n_steps) {
  if (n_steps < p.R + p.K)
    throw ParameterError("simulate_circuit needs at least R+K=" + std::to_string(p.R + p.K) + " steps");
  CircuitTrace<S> trace;
  trace.reserve(static_cast<std::size_t>(n_steps));
  S h_e = p.v_reset, h_r = p.v_reset;
  int s_e = 1, s_r = 1;
  for (int t = 0; t < n_steps; ++t) {
    const S i_e = p.i_c1 + s_e * (p.u_thr - p.i_c1 - p.v_reset) - s_r * p.u_thr;
    const S i_r = s_e * p.i_c2 - s_r * (p.i_c2 + p.v_reset);
    const S u_e = h_e + i_e;
    const S u_r = h_r + i_r;
    s_e = u_e >= p.u_thr ? 1 : 0;
    s_r = u_r >= p.u_thr ? 1 : 0;
    h_e = s_e ? p.v_reset : S(p.beta * u_e);
    h_r = s_r ? p.v_reset : S(p.beta * u_r);
    trace.push_back({u_e, u_r, s_e, s_r, i_e, i_r});
  }
  return trace;
}

template <class S>
std::string emitter_pattern(const CircuitTrace<S>& trace) {
  std::string s;
  s.reserve(trace.size());
  for (const auto& st : trace) s.push_back(st.s_e ? '1' : '0');
  return s;
}

struct PeriodReport {
  double beta = 0, u_thr = 0, v_reset = 0;
  int R = 0, K = 0, n_periods = 0;
  bool pattern_ok = false;
  bool state_ok = false;
  bool resetter_ok = false;
  int first_mismatch = -1;  // step index, -1 when the pattern matches
  double max_state_error = 0;
  std::string expected;
  std::string observed;

  bool passed() const { return pattern_ok && state_ok; }
};

template <class S>
PeriodReport verify_period(const CircuitParams<S>& p, int n_periods, double state_tol = 1e-9) {
  if (n_periods < 2) throw ParameterError("verify_period needs n_periods >= 2");
  const int period = p.period();
  auto trace = simulate_circuit(p, period * n_periods);
  PeriodReport r;
  r.beta = to_double(p.beta);
  r.u_thr = to_double(p.u_thr);
  r.v_reset = to_double(p.v_reset);
  r.R = p.R;
  r.K = p.K;
  r.n_periods = n_periods;
  for (int k = 0; k < n_periods; ++k) r.expected += std::string(static_cast<std::size_t>(p.R), '0') + std::string(static_cast<std::size_t>(p.K), '1');
  r.observed = emitter_pattern(trace);
  r.pattern_ok = r.observed == r.expected;
  for (std::size_t i = 0; i < r.expected.size() && r.first_mismatch < 0; ++i)
    if (r.observed[i] != r.expected[i]) r.first_mismatch = static_cast<int>(i);
  const auto& s0 = trace.front();
  for (int k = 1; k < n_periods; ++k) {
    const auto& sk = trace[static_cast<std::size_t>(k * period)];
    r.max_state_error = std::max({r.max_state_error, std::abs(to_double(S(sk.u_e - s0.u_e))),
                                  std::abs(to_double(S(sk.u_r - s0.u_r)))});
  }
  r.state_ok = r.max_state_error <= state_tol;
  r.resetter_ok = true;
  for (int t = 0; t < period * n_periods; ++t) {
    const int want = (t % period == period - 1) ? 1 : 0;
    if (trace[static_cast<std::size_t>(t)].s_r != want) r.resetter_ok = false;
  }
  return r;
}

// Closed-form first spike time for a neuron under constant current i_c:
// ceil(log_beta(beta - u_thr beta (1-beta) / i_c)). Values within `snap` of an
// integer are taken as that integer, and currents within a relative `snap` of
// the non-firing boundary u_thr (1 - beta) count as non-firing.
inline int closed_form_first_spike(double beta, double u_thr, double i_c, double snap = 1e-9) {
  if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("closed_form_first_spike: beta must lie in (0,1)");
  if (!(i_c > 0.0)) throw ParameterError("closed_form_first_spike: current must be positive");
  const double arg = beta * (i_c - u_thr * (1.0 - beta)) / i_c;
  if (!(arg > 0.0) || i_c - u_thr * (1.0 - beta) <= snap * i_c)
    throw NumericError("closed_form_first_spike: neuron never fires (log argument " + std::to_string(arg) + " <= 0)");
  const double k = std::log(arg) / std::log(beta);
  const double nearest = std::round(k);
  const double v = std::abs(k - nearest) < snap ? nearest : std::ceil(k);
  return std::max(1, static_cast<int>(v));
}

// 1-based step at which a neuron started from H = 0 first reaches u_thr under
// constant current, stepping U = H + I, H = beta U. Throws if it never does
// within max_steps.
inline int simulated_first_spike(double beta, double u_thr, double i_c, int max_steps = 100000) {
  double h = 0.0;
  for (int k = 1; k <= max_steps; ++k) {
    const double u = h + i_c;
    if (u >= u_thr) return k;
    h = beta * u;
  }
  throw NumericError("simulated_first_spike: no spike within " + std::to_string(max_steps) + " steps");
}

// Thresholded cosine channel with period P that is on for exactly K of every
// P integer steps, centered on t = 0 (mod P).
inline std::vector<int> cpg_channel_train(int period, int burst, int n) {
  const double pi = std::acos(-1.0);
  const double phase = burst % 2 == 0 ? 0.5 : 0.0;
  const double v = 0.5 * (std::cos(pi * (burst - 1) / period) + std::cos(pi * (burst + 1) / period));
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) out[static_cast<std::size_t>(t)] = std::cos(2.0 * pi * (t + phase) / period) >= v ? 1 : 0;
  return out;
}

// max over lags of sum_t a[t] b[(t + lag) mod n] over the first `period` entries.
inline int circular_xcorr_peak(const std::vector<int>& a, const std::vector<int>& b, int period) {
  if (a.size() < static_cast<std::size_t>(period) || b.size() < static_cast<std::size_t>(period))
    throw DimensionError("circular_xcorr_peak: trains shorter than one period");
  int best = 0;
  for (int lag = 0; lag < period; ++lag) {
    int s = 0;
    for (int t = 0; t < period; ++t) s += a[static_cast<std::size_t>(t)] * b[static_cast<std::size_t>((t + lag) % period)];
    best = std::max(best, s);
  }
  return best;
}

template <class S>
void write_trace_csv(std::ostream& os, const CircuitTrace<S>& trace) {
  os << "step,U_e,S_e,U_r,S_r,I_e,I_r\n";
  os.precision(17);
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const auto& s = trace[t];
    os << t << ',' << to_double(s.u_e) << ',' << s.s_e << ',' << to_double(s.u_r) << ',' << s.s_r << ','
       << to_double(s.i_e) << ',' << to_double(s.i_r) << '\n';
  }
}

}  // namespace cpgpe

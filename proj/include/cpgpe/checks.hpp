#pragma once

// Self-contained verification runs shared by the CLI and the acceptance suite.

#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cpgpe/circuit.hpp"
#include "cpgpe/encoder.hpp"
#include "cpgpe/oscillator.hpp"
#include "json.hpp"

namespace cpgpe {

// ---------------------------------------------------------------------------
// Positional code uniqueness

struct PEAnalysis {
  std::size_t steps = 0, length = 0;
  CPGPEConfig cfg;
  std::size_t n_codes = 0;
  std::size_t n_distinct = 0;
  double repetition_rate = 0.0;
  // Codes taken per position: the T x 2N raster of position p.
  double position_repetition_rate = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> collisions;  // first few colliding index pairs
  double mean_firing_rate = 0.0;
};

inline std::vector<PECode> position_codes(const SpikeTensor& pe) {
  std::vector<PECode> codes(pe.positions());
  for (std::size_t p = 0; p < pe.positions(); ++p)
    for (std::size_t s = 0; s < pe.steps(); ++s)
      for (std::size_t d = 0; d < pe.features(); ++d) codes[p].push_back(pe.at(s, 0, p, d));
  return codes;
}

inline PEAnalysis analyze_pe(std::size_t steps, std::size_t length, const CPGPEConfig& cfg) {
  auto pe = generate_pe(steps, length, cfg);
  auto codes = pe_codes(pe, cfg.order);
  PEAnalysis a;
  a.steps = steps;
  a.length = length;
  a.cfg = cfg;
  a.n_codes = codes.size();
  a.repetition_rate = repetition_rate(codes);
  std::map<PECode, std::size_t> first;
  for (std::size_t t = 0; t < codes.size(); ++t) {
    auto [it, fresh] = first.emplace(codes[t], t);
    if (!fresh && a.collisions.size() < 16) a.collisions.emplace_back(it->second, t);
  }
  a.n_distinct = first.size();
  a.position_repetition_rate = repetition_rate(position_codes(pe));
  a.mean_firing_rate = static_cast<double>(pe.count()) / static_cast<double>(pe.size());
  return a;
}

inline nlohmann::json to_json(const PEAnalysis& a) {
  return {{"t_steps", a.steps},
          {"seq_len", a.length},
          {"n_pairs", a.cfg.n_pairs},
          {"tau", a.cfg.tau},
          {"eta", a.cfg.eta},
          {"v_thres", a.cfg.v_thres},
          {"order", to_string(a.cfg.order)},
          {"n_codes", a.n_codes},
          {"n_distinct", a.n_distinct},
          {"repetition_rate", a.repetition_rate},
          {"position_repetition_rate", a.position_repetition_rate},
          {"collisions", a.collisions},
          {"mean_firing_rate", a.mean_firing_rate}};
}

// ---------------------------------------------------------------------------
// Circuit period grid

struct CircuitGridSpec {
  std::vector<double> betas{0.5, 0.8, 0.9, 0.95};
  std::vector<int> rests{2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<int> bursts{3, 4, 5, 6};
  std::vector<double> resets{0.0, -0.2};
  double u_thr = 1.0;
  int n_periods = 5;
  CurrentRule rule = CurrentRule::stated;
  bool exact = true;
};

struct CircuitGridResult {
  CircuitGridSpec spec;
  std::vector<PeriodReport> reports;
  std::size_t passed = 0;
  std::size_t resetter_ok = 0;

  bool all_passed() const { return passed == reports.size(); }
};

inline CircuitGridResult run_circuit_grid(const CircuitGridSpec& spec) {
  CircuitGridResult res;
  res.spec = spec;
  for (double b : spec.betas)
    for (int r : spec.rests)
      for (int k : spec.bursts)
        for (double v : spec.resets) {
          PeriodReport rep;
          if (spec.exact) {
            auto p = CircuitParams<Rational>::make(rational_from_decimal(b), rational_from_decimal(spec.u_thr),
                                                   rational_from_decimal(v), r, k, spec.rule);
            rep = verify_period(p, spec.n_periods);
          } else {
            rep = verify_period(CircuitParams<double>::make(b, spec.u_thr, v, r, k, spec.rule), spec.n_periods);
          }
          res.passed += rep.passed() ? 1 : 0;
          res.resetter_ok += rep.resetter_ok ? 1 : 0;
          res.reports.push_back(std::move(rep));
        }
  return res;
}

inline nlohmann::json to_json(const PeriodReport& r) {
  return {{"beta", r.beta},       {"u_thr", r.u_thr},
          {"v_reset", r.v_reset}, {"R", r.R},
          {"K", r.K},             {"n_periods", r.n_periods},
          {"passed", r.passed()}, {"pattern_ok", r.pattern_ok},
          {"state_ok", r.state_ok}, {"resetter_ok", r.resetter_ok},
          {"first_mismatch", r.first_mismatch}, {"max_state_error", r.max_state_error},
          {"expected", r.expected}, {"observed", r.observed}};
}

inline nlohmann::json to_json(const CircuitGridResult& g) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& r : g.reports) cases.push_back(to_json(r));
  return {{"currents", to_string(g.spec.rule)},
          {"arithmetic", g.spec.exact ? "exact" : "double"},
          {"n_periods", g.spec.n_periods},
          {"n_cases", g.reports.size()},
          {"n_passed", g.passed},
          {"n_resetter_ok", g.resetter_ok},
          {"all_passed", g.all_passed()},
          {"cases", cases}};
}

// ---------------------------------------------------------------------------
// Oscillator checks

struct OdeCheckSpec {
  int n_draws = 100;
  double t_end = 10.0;
  double dt = 1e-3;
  double tol = 1e-6;
  std::uint64_t seed = 7;
  int d_model = 512;
  std::vector<int> pe_pairs{0, 1, 255};
  double fd_step = 1e-4;
};

struct OdeDraw {
  OscillatorParams params;
  double k1 = 0, k2 = 0;
  double max_error = 0;
};

struct OdeCheckResult {
  OdeCheckSpec spec;
  std::vector<OdeDraw> draws;
  double worst_closed_form_error = 0;
  std::vector<PeResidualReport> pe_reports;
  std::vector<PeResidualReport> negative_controls;
  double worst_pe_residual = 0;

  bool closed_form_ok() const { return worst_closed_form_error < spec.tol; }
  bool pe_ok() const { return worst_pe_residual < spec.tol; }
  bool controls_ok() const {
    for (const auto& c : negative_controls)
      if (!(c.max_residual > 0.5 * c.omega)) return false;
    return true;
  }
  bool all_passed() const { return closed_form_ok() && pe_ok() && controls_ok(); }
};

inline OdeCheckResult run_ode_checks(const OdeCheckSpec& spec) {
  OdeCheckResult res;
  res.spec = spec;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> ac(0.1, 10.0), bd(-5.0, 5.0), k(-2.0, 2.0);
  for (int i = 0; i < spec.n_draws; ++i) {
    OdeDraw d;
    d.params.a = ac(rng);
    d.params.c = ac(rng);
    d.params.b = bd(rng);
    d.params.d = bd(rng);
    d.k1 = k(rng);
    d.k2 = k(rng);
    const double x0 = d.k1 + d.params.d / d.params.c, y0 = d.k2 - d.params.b / d.params.a;
    d.max_error = max_closed_form_error(d.params, x0, y0, spec.t_end, spec.dt);
    res.worst_closed_form_error = std::max(res.worst_closed_form_error, d.max_error);
    res.draws.push_back(d);
  }
  for (int pair : spec.pe_pairs) {
    auto r = verify_sinusoidal_pe_is_solution(spec.d_model, pair, spec.fd_step);
    res.worst_pe_residual = std::max(res.worst_pe_residual, r.max_residual);
    res.pe_reports.push_back(r);
    res.negative_controls.push_back(
        verify_sinusoidal_pe_is_solution(spec.d_model, pair, spec.fd_step, 2001, PePairing::cos_cos));
  }
  return res;
}

inline nlohmann::json to_json(const PeResidualReport& r) {
  return {{"d_model", r.d_model},
          {"pair", r.pair},
          {"omega", r.omega},
          {"a", r.params.a},
          {"b", r.params.b},
          {"c", r.params.c},
          {"d", r.params.d},
          {"fd_step", r.fd_step},
          {"t_max", r.t_max},
          {"grid_points", r.grid_points},
          {"max_residual", r.max_residual}};
}

inline nlohmann::json to_json(const OdeCheckResult& r) {
  nlohmann::json draws = nlohmann::json::array();
  for (const auto& d : r.draws)
    draws.push_back({{"a", d.params.a}, {"b", d.params.b}, {"c", d.params.c}, {"d", d.params.d},
                     {"k1", d.k1}, {"k2", d.k2}, {"max_error", d.max_error}});
  nlohmann::json pe = nlohmann::json::array(), neg = nlohmann::json::array();
  for (const auto& x : r.pe_reports) pe.push_back(to_json(x));
  for (const auto& x : r.negative_controls) neg.push_back(to_json(x));
  return {{"t_end", r.spec.t_end},
          {"dt", r.spec.dt},
          {"tolerance", r.spec.tol},
          {"worst_closed_form_error", r.worst_closed_form_error},
          {"closed_form_ok", r.closed_form_ok()},
          {"worst_pe_residual", r.worst_pe_residual},
          {"pe_ok", r.pe_ok()},
          {"negative_controls_ok", r.controls_ok()},
          {"draws", draws},
          {"pe_residuals", pe},
          {"cos_cos_controls", neg}};
}

}  // namespace cpgpe

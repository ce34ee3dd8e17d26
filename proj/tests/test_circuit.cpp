#include <gtest/gtest.h>

#include <sstream>

#include "cpgpe/checks.hpp"
#include "cpgpe/circuit.hpp"

using namespace cpgpe;

namespace {

// Straight-line reimplementation of the two-neuron recurrence, written
// independently of simulate_circuit.
std::string reference_pattern(const Rational& beta, const Rational& u_thr, const Rational& v_reset, const Rational& c1,
                              const Rational& c2, int n) {
  Rational he = v_reset, hr = v_reset;
  bool fired_e = true, fired_r = true;
  std::string out;
  for (int t = 0; t < n; ++t) {
    Rational ie = c1, ir = 0;
    if (fired_e) {
      ie += u_thr - c1 - v_reset;
      ir += c2;
    }
    if (fired_r) {
      ie -= u_thr;
      ir -= c2 + v_reset;
    }
    const Rational ue = he + ie, ur = hr + ir;
    fired_e = ue >= u_thr;
    fired_r = ur >= u_thr;
    he = fired_e ? v_reset : Rational(beta * ue);
    hr = fired_r ? v_reset : Rational(beta * ur);
    out += fired_e ? '1' : '0';
  }
  return out;
}

std::string repeat(const std::string& s, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out += s;
  return out;
}

const Rational kBeta(9, 10);

}  // namespace

TEST(Currents, WorkedValues) {
  auto c = derive_currents(0.9, 1.0, 5, 4);
  EXPECT_NEAR(c.i_c1, 0.09 / (0.9 - 0.59049), 1e-15);
  EXPECT_NEAR(c.i_c1, 0.290783, 1e-6);
  EXPECT_NEAR(c.i_c2, 0.09 / (0.9 - 0.729), 1e-15);
  EXPECT_NEAR(c.i_c2, 0.526316, 1e-6);
  auto exact = derive_currents(kBeta, Rational(1), 5, 3);
  EXPECT_EQ(exact.i_c1, Rational(1000, 3439));
  EXPECT_EQ(exact.i_c2, Rational(1));
}

TEST(Currents, DegenerateRangesNameTheDenominator) {
  try {
    derive_currents(0.9, 1.0, 5, 2);
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("K=2"), std::string::npos);
  }
  EXPECT_THROW(derive_currents(0.9, 1.0, 1, 3), ParameterError);
  EXPECT_THROW(derive_currents(1.0, 1.0, 5, 3), ParameterError);
  EXPECT_THROW(CircuitParams<double>::make(0.9, 1.0, 1.0, 5, 3), ParameterError);
}

TEST(Currents, PositiveOverGrid) {
  for (double b : {0.5, 0.8, 0.9, 0.95})
    for (int r = 2; r <= 10; ++r)
      for (int k = 3; k <= 6; ++k) {
        auto c = derive_currents(b, 1.0, r, k);
        EXPECT_GT(c.i_c1, 0.0);
        EXPECT_GT(c.i_c2, 0.0);
        EXPECT_TRUE(std::isfinite(c.i_c1) && std::isfinite(c.i_c2));
      }
}

TEST(FirstSpike, ClosedFormAgainstSimulation) {
  // Brute-force recurrence U_k = beta U_{k-1} + I from U_0 = 0, exact.
  auto brute = [](const Rational& beta, const Rational& i_c) {
    Rational u = 0;
    for (int k = 1; k < 10000; ++k) {
      u = beta * u + i_c;
      if (u >= 1) return k;
    }
    return -1;
  };
  const auto i_c1 = derive_currents(kBeta, Rational(1), 5, 3).i_c1;
  EXPECT_EQ(brute(kBeta, i_c1), 4);
  // With the derived current U reaches u_thr exactly at step R-1; the closed
  // form counts one step later than the recurrence.
  EXPECT_EQ(closed_form_first_spike(0.9, 1.0, to_double(i_c1)), 5);
  for (double b : {0.5, 0.8, 0.9, 0.95})
    for (int r = 2; r <= 10; ++r) {
      const auto rb = rational_from_decimal(b);
      const auto i = derive_currents(rb, Rational(1), r, 3).i_c1;
      EXPECT_EQ(brute(rb, i), r - 1) << b << " " << r;
      EXPECT_EQ(closed_form_first_spike(b, 1.0, to_double(i)), r) << b << " " << r;
    }
}

TEST(FirstSpike, OffsetHoldsAwayFromTies) {
  Rng rng(3);
  std::uniform_real_distribution<double> ub(0.3, 0.97), ui(1.05, 40.0);
  for (int n = 0; n < 500; ++n) {
    const double b = ub(rng), i = ui(rng) * (1.0 - b);
    int brute = 0;
    double u = 0.0;
    for (int k = 1; k < 100000 && !brute; ++k) {
      u = b * u + i;
      if (u >= 1.0) brute = k;
    }
    // Skip draws that land within rounding of the threshold.
    const double margin = std::abs(i * (1 - std::pow(b, brute)) / (1 - b) - 1.0);
    if (margin < 1e-9) continue;
    EXPECT_EQ(simulated_first_spike(b, 1.0, i), brute);
    EXPECT_EQ(closed_form_first_spike(b, 1.0, i), brute + 1) << b << " " << i;
  }
}

TEST(FirstSpike, LargeCurrentAndNeverFires) {
  EXPECT_EQ(simulated_first_spike(0.9, 1.0, 1e6), 1);
  EXPECT_EQ(closed_form_first_spike(0.9, 1.0, 1e6), 2);
  EXPECT_THROW(closed_form_first_spike(0.9, 1.0, 0.1), NumericError);  // i_c = u_thr (1 - beta)
  EXPECT_THROW(closed_form_first_spike(0.9, 1.0, 0.05), NumericError);
  EXPECT_THROW(simulated_first_spike(0.9, 1.0, 0.05), NumericError);
  EXPECT_THROW(closed_form_first_spike(0.9, 1.0, -1.0), ParameterError);
}

TEST(Simulation, StatedCurrentsGiveShortenedPattern) {
  auto p = CircuitParams<Rational>::make(kBeta, 1, 0, 5, 3, CurrentRule::stated);
  auto trace = simulate_circuit(p, 40);
  const auto pattern = emitter_pattern(trace);
  EXPECT_EQ(pattern, reference_pattern(kBeta, 1, 0, p.i_c1, p.i_c2, 40));
  // 0^(R-1) 1^(K-1), period R+K-2.
  EXPECT_EQ(pattern, repeat("000011", 7).substr(0, 40));
  auto rep = verify_period(p, 5);
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.first_mismatch, 4);
}

TEST(Simulation, ShiftedCurrentsGiveRestThenBurst) {
  auto p = CircuitParams<Rational>::make(kBeta, 1, 0, 5, 3, CurrentRule::shifted);
  auto trace = simulate_circuit(p, 40);
  EXPECT_EQ(emitter_pattern(trace), repeat("00000111", 5));
  EXPECT_EQ(emitter_pattern(trace), reference_pattern(kBeta, 1, 0, p.i_c1, p.i_c2, 40));
  for (int t = 0; t < 5; ++t) {
    EXPECT_EQ(trace[static_cast<std::size_t>(t)].s_e, 0);
    EXPECT_EQ(trace[static_cast<std::size_t>(t)].s_r, 0);
  }
  auto rep = verify_period(p, 5);
  EXPECT_TRUE(rep.passed());
  EXPECT_TRUE(rep.resetter_ok);
  EXPECT_EQ(rep.max_state_error, 0.0);
}

TEST(Simulation, NonzeroResetShifted) {
  const Rational vr(-1, 5);
  auto p = CircuitParams<Rational>::make(kBeta, 1, vr, 5, 3, CurrentRule::shifted);
  EXPECT_EQ(emitter_pattern(simulate_circuit(p, 40)), repeat("00000111", 5));
  EXPECT_EQ(emitter_pattern(simulate_circuit(p, 40)), reference_pattern(kBeta, 1, vr, p.i_c1, p.i_c2, 40));
  EXPECT_TRUE(verify_period(p, 5).passed());
}

TEST(Simulation, PerturbedCurrentIsCaught) {
  auto p = CircuitParams<Rational>::make(kBeta, 1, 0, 5, 3, CurrentRule::shifted);
  p.i_c1 *= Rational(3, 2);
  auto rep = verify_period(p, 5);
  EXPECT_FALSE(rep.passed());
  EXPECT_GE(rep.first_mismatch, 0);
  EXPECT_LT(rep.first_mismatch, 5);
  EXPECT_NE(rep.observed, rep.expected);
}

TEST(Simulation, ArgumentChecks) {
  auto p = CircuitParams<double>::make(0.9, 1.0, 0.0, 5, 3);
  EXPECT_THROW(simulate_circuit(p, 7), ParameterError);
  EXPECT_THROW(verify_period(p, 1), ParameterError);
}

TEST(Simulation, DoubleAgreesWithExactOnShiftedGrid) {
  for (double b : {0.5, 0.9})
    for (int r = 2; r <= 6; ++r)
      for (int k = 3; k <= 5; ++k) {
        auto pd = CircuitParams<double>::make(b, 1.0, 0.0, r, k, CurrentRule::shifted);
        auto pr = CircuitParams<Rational>::make(rational_from_decimal(b), 1, 0, r, k, CurrentRule::shifted);
        const int n = 5 * (r + k);
        EXPECT_EQ(emitter_pattern(simulate_circuit(pd, n)), emitter_pattern(simulate_circuit(pr, n)));
      }
}

TEST(Grid, ShiftedRulePassesEverywhere) {
  CircuitGridSpec spec;
  spec.rule = CurrentRule::shifted;
  auto g = run_circuit_grid(spec);
  EXPECT_EQ(g.reports.size(), 4u * 9u * 4u * 2u);
  EXPECT_TRUE(g.all_passed());
  EXPECT_EQ(g.resetter_ok, g.reports.size());
}

TEST(Grid, StatedRuleFailsEverywhere) {
  auto g = run_circuit_grid(CircuitGridSpec{});
  EXPECT_EQ(g.passed, 0u);
  for (const auto& r : g.reports) {
    std::string want;
    for (int i = 0; i < 5; ++i) want += std::string(static_cast<std::size_t>(r.R - 1), '0') + std::string(static_cast<std::size_t>(r.K - 1), '1');
    EXPECT_EQ(r.observed.substr(0, want.size()), want) << r.beta << " " << r.R << " " << r.K << " " << r.v_reset;
  }
}

TEST(Equivalence, EmitterMatchesThresholdedCosine) {
  for (int r = 2; r <= 10; ++r)
    for (int k = 3; k <= 6; ++k) {
      const int period = r + k;
      auto p = CircuitParams<Rational>::make(kBeta, 1, 0, r, k, CurrentRule::shifted);
      auto trace = simulate_circuit(p, 2 * period);
      std::vector<int> emitter;
      for (const auto& s : trace) emitter.push_back(s.s_e);
      auto channel = cpg_channel_train(period, k, 2 * period);
      int ones = 0;
      for (int t = 0; t < period; ++t) ones += channel[static_cast<std::size_t>(t)];
      ASSERT_EQ(ones, k) << r << " " << k;
      EXPECT_EQ(circular_xcorr_peak(emitter, channel, period), k) << r << " " << k;
    }
}

TEST(Trace, CsvHeaderAndRows) {
  std::ostringstream os;
  write_trace_csv(os, simulate_circuit(CircuitParams<double>::make(0.9, 1.0, 0.0, 5, 3), 8));
  const auto s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "step,U_e,S_e,U_r,S_r,I_e,I_r");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 9);
}

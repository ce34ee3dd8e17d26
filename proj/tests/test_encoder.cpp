#include <gtest/gtest.h>

#include <numbers>
#include <map>
#include <set>
#include <sstream>

#include "cpgpe/checks.hpp"
#include "cpgpe/encoder.hpp"

using namespace cpgpe;

namespace {

CPGPEConfig single_pair(double tau, double eta, double v) {
  CPGPEConfig c;
  c.n_pairs = 1;
  c.tau = tau;
  c.eta = eta;
  c.v_thres = v;
  return c;
}

}  // namespace

TEST(CpgCode, OriginPattern) {
  // cos 0 = 1 fires, sin 0 = 0 stays silent.
  auto code = cpg_pe_at(0, CPGPEConfig{});
  ASSERT_EQ(code.size(), 40u);
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(code[2 * i], 1) << i;
    EXPECT_EQ(code[2 * i + 1], 0) << i;
  }
}

TEST(CpgCode, CosineOnsetBoundary) {
  const auto cfg = single_pair(10000, 1, 0.8);
  const auto last = static_cast<std::uint64_t>(std::floor(10000 * std::acos(0.8)));
  ASSERT_EQ(last, 6435u);
  for (std::uint64_t t : {0ull, 1ull, 3000ull, 6434ull, 6435ull}) EXPECT_EQ(cpg_pe_at(t, cfg)[0], 1) << t;
  for (std::uint64_t t : {6436ull, 7000ull, 15000ull}) EXPECT_EQ(cpg_pe_at(t, cfg)[0], 0) << t;
}

TEST(CpgCode, DutyCycleOverOnePeriod) {
  const auto cfg = single_pair(10000, 1, 0.8);
  const auto period = static_cast<std::uint64_t>(std::round(cfg.period(1)));
  std::size_t on_cos = 0, on_sin = 0;
  for (std::uint64_t t = 0; t < period; ++t) {
    auto c = cpg_pe_at(t, cfg);
    on_cos += c[0];
    on_sin += c[1];
  }
  const double duty = std::acos(0.8) / std::numbers::pi;
  EXPECT_NEAR(duty, 0.2048, 1e-4);
  EXPECT_NEAR(static_cast<double>(on_cos) / period, duty, 1e-4);
  EXPECT_NEAR(static_cast<double>(on_sin) / period, duty, 1e-4);
}

TEST(CpgCode, ThresholdNearOneOnlyPeaksFire) {
  const auto cfg = single_pair(100, 2 * std::numbers::pi * 100 / 8, 1.0 - 1e-12);
  // Angle 2*pi*t/8: cos peaks at t = 0 mod 8, sin at t = 2 mod 8.
  for (std::uint64_t t = 0; t < 32; ++t) {
    auto c = cpg_pe_at(t, cfg);
    EXPECT_EQ(c[0], t % 8 == 0 ? 1 : 0) << t;
    EXPECT_EQ(c[1], t % 8 == 2 ? 1 : 0) << t;
  }
}

TEST(CpgCode, ValidatesConfig) {
  CPGPEConfig c;
  c.n_pairs = 0;
  EXPECT_THROW(cpg_pe_at(0, c), ParameterError);
  c = {};
  c.tau = 1.0;
  EXPECT_THROW(cpg_pe_at(0, c), ParameterError);
  c = {};
  c.v_thres = 1.0;
  EXPECT_THROW(cpg_pe_at(0, c), ParameterError);
  c = {};
  c.eta = 0.0;
  EXPECT_THROW(cpg_pe_at(0, c), ParameterError);
}

TEST(GeneratePe, ShapeAndSingleStep) {
  auto pe = generate_pe(1, 5, CPGPEConfig{});
  EXPECT_EQ(pe.shape(), (Shape{1, 1, 5, 40}));
  for (std::size_t p = 0; p < 5; ++p) {
    auto code = cpg_pe_at(p, CPGPEConfig{});
    for (std::size_t d = 0; d < 40; ++d) EXPECT_EQ(pe.at(0, 0, p, d), code[d]);
  }
  EXPECT_THROW(generate_pe(0, 5, CPGPEConfig{}), ParameterError);
}

TEST(GeneratePe, StepMajorFlattening) {
  // Step 1, position 0 carries code index L.
  const std::size_t steps = 4, length = 7;
  CPGPEConfig cfg;
  auto pe = generate_pe(steps, length, cfg);
  auto code = cpg_pe_at(length, cfg);
  for (std::size_t d = 0; d < 40; ++d) EXPECT_EQ(pe.at(1, 0, 0, d), code[d]);
  cfg.order = FlattenOrder::position_major;
  auto pm = generate_pe(steps, length, cfg);
  auto code1 = cpg_pe_at(1, cfg);
  for (std::size_t d = 0; d < 40; ++d) EXPECT_EQ(pm.at(1, 0, 0, d), code1[d]);
}

TEST(GeneratePe, MatchesDirectEvaluation) {
  CPGPEConfig cfg;
  cfg.eta = 2 * std::numbers::pi;
  auto pe = generate_pe(3, 11, cfg);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t p = 0; p < 11; ++p) {
      const double t = static_cast<double>(s * 11 + p);
      for (int i = 1; i <= 20; ++i) {
        const double ang = cfg.eta * t / std::pow(cfg.tau, i / 20.0);
        EXPECT_EQ(pe.at(s, 0, p, 2 * i - 2), std::cos(ang) >= 0.8 ? 1 : 0);
        EXPECT_EQ(pe.at(s, 0, p, 2 * i - 1), std::sin(ang) >= 0.8 ? 1 : 0);
      }
    }
}

TEST(RepetitionRate, HandCases) {
  std::vector<PECode> a{{0, 1}, {1, 0}, {0, 1}, {1, 1}};
  EXPECT_DOUBLE_EQ(repetition_rate(a), 0.5);
  std::vector<PECode> b{{0}, {0}, {0}};
  EXPECT_DOUBLE_EQ(repetition_rate(b), 1.0);
  std::vector<PECode> c{{0, 0}, {0, 1}, {1, 0}};
  EXPECT_DOUBLE_EQ(repetition_rate(c), 0.0);
  EXPECT_THROW(repetition_rate(std::vector<PECode>{}), ContractViolation);
}

TEST(RepetitionRate, SixHundredFortyFlattenedCodes) {
  // Frozen from an independent evaluation of the threshold formula: indices
  // 42/43, 249/250, 464/465 and 526/527 share codes.
  CPGPEConfig cfg;
  cfg.eta = 2 * std::numbers::pi;
  auto a = analyze_pe(4, 160, cfg);
  EXPECT_EQ(a.n_codes, 640u);
  std::map<PECode, std::vector<std::size_t>> groups;
  const auto codes = pe_codes(generate_pe(4, 160, cfg), cfg.order);
  for (std::size_t t = 0; t < codes.size(); ++t) groups[codes[t]].push_back(t);
  std::vector<std::vector<std::size_t>> dup;
  for (const auto& [c, ts] : groups)
    if (ts.size() > 1) dup.push_back(ts);
  std::sort(dup.begin(), dup.end());
  EXPECT_EQ(dup, (std::vector<std::vector<std::size_t>>{{42, 43}, {249, 250}, {464, 465}, {526, 527}}));
  EXPECT_EQ(a.n_distinct, 636u);
  EXPECT_DOUBLE_EQ(a.repetition_rate, 8.0 / 640.0);
  EXPECT_EQ(a.collisions.size(), 4u);
}

TEST(RepetitionRate, PerPositionRastersAreDistinct) {
  CPGPEConfig cfg;
  cfg.eta = 2 * std::numbers::pi;
  auto pe = generate_pe(4, 160, cfg);
  std::set<PECode> s;
  for (std::size_t p = 0; p < 160; ++p) {
    PECode c;
    for (std::size_t st = 0; st < 4; ++st)
      for (std::size_t d = 0; d < 40; ++d) c.push_back(pe.at(st, 0, p, d));
    s.insert(c);
  }
  EXPECT_EQ(s.size(), 160u);
  EXPECT_EQ(analyze_pe(4, 160, cfg).position_repetition_rate, 0.0);
}

TEST(RepetitionRate, FewPairsCollide) {
  CPGPEConfig cfg;
  cfg.n_pairs = 2;
  EXPECT_GT(analyze_pe(4, 160, cfg).repetition_rate, 0.0);
}

TEST(Property, IntegerPeriodRepeatsExactly) {
  for (int period : {5, 8, 12, 30}) {
    for (double tau : {50.0, 1000.0}) {
      // eta chosen so that 2*pi*tau/eta = period.
      const auto cfg = single_pair(tau, 2 * std::numbers::pi * tau / period, 0.8);
      ASSERT_NEAR(cfg.period(1), period, 1e-9);
      for (std::uint64_t t = 0; t < 200; ++t)
        ASSERT_EQ(cpg_pe_at(t, cfg), cpg_pe_at(t + static_cast<std::uint64_t>(period), cfg)) << period << " " << t;
    }
  }
}

TEST(Property, NonIntegerPeriodDoesNotRepeatAtRoundedPeriod) {
  const auto cfg = single_pair(10000, 1000, 0.8);  // period 62.83...
  bool differs = false;
  for (std::uint64_t t = 0; t < 2000 && !differs; ++t) differs = cpg_pe_at(t, cfg) != cpg_pe_at(t + 63, cfg);
  EXPECT_TRUE(differs);
}

TEST(Property, PeriodsAndOnsetWindowsGrowWithPairIndex) {
  CPGPEConfig cfg;
  for (int i = 2; i <= cfg.n_pairs; ++i) EXPECT_GT(cfg.period(i), cfg.period(i - 1));
  // Length of the first cosine burst (starting at t = 0) per pair.
  std::vector<std::size_t> burst(static_cast<std::size_t>(cfg.n_pairs), 0);
  std::vector<bool> open(static_cast<std::size_t>(cfg.n_pairs), true);
  for (std::uint64_t t = 0; t < 70000; ++t) {
    auto c = cpg_pe_at(t, cfg);
    bool any = false;
    for (int i = 0; i < cfg.n_pairs; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (open[k] && c[2 * k]) ++burst[k];
      else open[k] = false;
      any = any || open[k];
    }
    if (!any) break;
  }
  for (std::size_t k = 1; k < burst.size(); ++k) EXPECT_GE(burst[k], burst[k - 1]) << k;
  EXPECT_GT(burst.back(), 10 * burst.front());
}

TEST(FloatPe, KnownValues) {
  auto pe = float_pe(0.0, 8);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(pe[2 * i], 0.0);
    EXPECT_EQ(pe[2 * i + 1], 1.0);
  }
  auto p1 = float_pe(1.0, 4);
  EXPECT_DOUBLE_EQ(p1[0], std::sin(1.0));
  EXPECT_DOUBLE_EQ(p1[1], std::cos(1.0));
  EXPECT_DOUBLE_EQ(p1[2], std::sin(0.01));
  EXPECT_DOUBLE_EQ(p1[3], std::cos(0.01));
  EXPECT_THROW(float_pe(0.0, 3), ParameterError);
  auto table = float_pe_table(3, 4);
  EXPECT_EQ(table.shape(), (Shape{3, 4}));
  EXPECT_DOUBLE_EQ(table[4], std::sin(1.0));
}

TEST(RandomPe, RateSeedAndEdges) {
  auto a = random_pe(500, 40, 0.2, 3), b = random_pe(500, 40, 0.2, 3), c = random_pe(500, 40, 0.2, 4);
  EXPECT_EQ(a.shape(), (Shape{1, 1, 500, 40}));
  EXPECT_EQ(a.bits(), b.bits());
  EXPECT_NE(a.bits(), c.bits());
  // 20000 Bernoulli(0.2) draws: sd of the rate is about 0.0028.
  EXPECT_NEAR(static_cast<double>(a.count()) / a.size(), 0.2, 0.015);
  EXPECT_EQ(random_pe(10, 10, 0.0, 1).count(), 0u);
  EXPECT_EQ(random_pe(10, 10, 1.0, 1).count(), 100u);
  EXPECT_THROW(random_pe(10, 10, 1.5, 1), ParameterError);
  auto g = random_pe_grid(4, 25, 40, 0.2, 9);
  EXPECT_EQ(g.shape(), (Shape{4, 1, 25, 40}));
  EXPECT_EQ(g.bits(), random_pe(100, 40, 0.2, 9).bits());
}

TEST(Raster, CsvLayout) {
  std::ostringstream os;
  CPGPEConfig cfg;
  cfg.n_pairs = 1;
  write_pe_csv(os, generate_pe(2, 2, cfg), cfg.order);
  EXPECT_EQ(os.str().substr(0, 14), "t,c0,c1\n0,1,0\n");
  std::size_t lines = 0;
  for (char ch : os.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 5u);
}

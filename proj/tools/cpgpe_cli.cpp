// cpgpe: data generation, training, evaluation and the verification checks.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include "CLI11.hpp"
#include "cpgpe/checks.hpp"
#include "cpgpe/cpgpe.hpp"

namespace fs = std::filesystem;
using namespace cpgpe;
using nlohmann::json;

namespace {

void write_json(const fs::path& p, const json& j) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << j.dump(2) << '\n';
}

fs::path ensure_dir(const std::string& d) {
  fs::create_directories(d);
  return fs::path(d);
}

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_experiment(path);
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Spiking positional encoding toolkit"};
  app.require_subcommand(1);

  std::string config, out = "out", pe, checkpoint;
  std::int64_t seed = -1;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write the configured synthetic series as CSV");
  gen->add_option("--config", config, "experiment config (JSON)");
  gen->add_option("--seed", seed, "noise seed");
  gen->add_option("--out", out, "output directory");

  // train
  auto* tr = app.add_subcommand("train", "train every (PE mode, seed) of a config and test it");
  tr->add_option("--config", config, "experiment config (JSON)");
  tr->add_option("--seed", seed, "run only this seed");
  tr->add_option("--pe", pe, "run only this PE mode")->check(CLI::IsMember({"none", "cpg", "float", "random"}));
  tr->add_option("--out", out, "output directory");
  double min_gap = std::numeric_limits<double>::quiet_NaN();
  tr->add_option("--require-cpg-gain", min_gap, "fail unless mean pooled R2(cpg) - R2(none) >= this");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split of a config");
  ev->add_option("--config", config, "experiment config (JSON)");
  ev->add_option("--checkpoint", checkpoint, "checkpoint base path (without .bin/.json)")->required();
  ev->add_option("--seed", seed, "dataset seed (synthetic)");
  ev->add_option("--pe", pe, "PE mode the checkpoint was trained with")->check(CLI::IsMember({"none", "cpg", "float", "random"}));
  ev->add_option("--out", out, "output directory");

  // pe-analyze
  auto* pa = app.add_subcommand("pe-analyze", "repetition rate and raster of the CPG positional code");
  std::size_t t_steps = 4, seq_len = 160;
  CPGPEConfig cpg;
  cpg.eta = 2.0 * std::numbers::pi;
  std::string order = "step_major";
  bool require_unique = false;
  pa->add_option("--config", config, "take the CPG settings from this experiment config");
  pa->add_option("--t-steps", t_steps, "time steps T");
  pa->add_option("--seq-len", seq_len, "sequence length L");
  pa->add_option("--pairs", cpg.n_pairs, "neuron pairs N");
  pa->add_option("--tau", cpg.tau, "base period");
  pa->add_option("--eta", cpg.eta, "frequency scale (default 2*pi)");
  pa->add_option("--v-thres", cpg.v_thres, "spike threshold");
  pa->add_option("--order", order, "step_major or position_major");
  pa->add_option("--out", out, "output directory");
  pa->add_flag("--require-unique", require_unique, "exit 1 unless every code is distinct");

  // circuit-verify
  auto* cv = app.add_subcommand("circuit-verify", "period check of the emitter/resetter LIF circuit over a grid");
  std::string currents = "stated", arith = "exact";
  int periods = 5;
  cv->add_option("--currents", currents, "stated or shifted")->check(CLI::IsMember({"stated", "shifted"}));
  cv->add_option("--arith", arith, "exact or double")->check(CLI::IsMember({"exact", "double"}));
  cv->add_option("--periods", periods, "periods simulated per case");
  cv->add_option("--out", out, "output directory");

  // ode-verify
  auto* ov = app.add_subcommand("ode-verify", "closed form vs RK4, and sinusoidal PE as an oscillator solution");
  int draws = 100;
  ov->add_option("--seed", seed, "parameter draw seed");
  ov->add_option("--draws", draws, "random parameter sets");
  ov->add_option("--out", out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto dir = ensure_dir(out);

    if (gen->parsed()) {
      auto e = config_or_default(config);
      auto spec = e.dataset.synthetic;
      if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
      auto s = gen_synthetic(spec);
      std::ofstream f(dir / "series.csv");
      write_csv(f, s);
      std::cout << "wrote " << (dir / "series.csv").string() << " (" << s.length << " x " << s.channels << ")\n";
      return 0;
    }

    if (tr->parsed()) {
      auto e = config_or_default(config);
      if (seed >= 0) e.seeds = {static_cast<std::uint64_t>(seed)};
      if (!pe.empty()) e.pe_modes = {pe_mode_from_string(pe)};
      const auto t0 = std::chrono::steady_clock::now();
      ExperimentResult res;
      res.name = e.name;
      for (auto mode : e.pe_modes)
        for (auto s : e.seeds) {
          const std::string tag = to_string(mode) + "_seed" + std::to_string(s);
          std::ofstream log(dir / ("train_" + tag + ".jsonl"));
          auto r = run_single(e, s, mode, &log, (dir / ("model_" + tag)).string());
          std::cout << tag << ": ";
          if (r.ok)
            std::cout << "test R2 " << r.test.r2_pooled << " (per-element " << r.test.r2 << "), RSE " << r.test.rse
                      << ", " << r.wall_s << " s\n";
          else
            std::cout << "FAILED: " << r.error << "\n";
          res.runs.push_back(std::move(r));
        }
      res.aggregate = aggregate_runs(res.runs, e.pe_modes);
      write_json(dir / "results.json", to_json(res));
      bool ok = std::all_of(res.runs.begin(), res.runs.end(), [](const RunRecord& r) { return r.ok; });
      for (const auto& a : res.aggregate)
        std::cout << "mean[" << to_string(a.pe_mode) << "] R2 " << a.r2_pooled << " RSE " << a.rse << " over "
                  << a.n_ok << " seeds\n";
      if (!std::isnan(min_gap)) {
        const double gap = res.mode(PEMode::cpg).r2_pooled - res.mode(PEMode::none).r2_pooled;
        std::cout << "cpg - none = " << gap << " (required " << min_gap << ")\n";
        ok = ok && gap >= min_gap;
      }
      std::cout << "total " << ms_since(t0) / 1000.0 << " s\n";
      return ok ? 0 : 1;
    }

    if (ev->parsed()) {
      auto e = config_or_default(config);
      const auto meta = read_manifest(checkpoint).at("meta");
      const auto mode = pe.empty() ? pe_mode_from_string(meta.at("model").at("pe").get<std::string>()) : pe_mode_from_string(pe);
      const std::uint64_t run_seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : meta.at("model").at("seed").get<std::uint64_t>();
      auto series = load_series(e.dataset, run_seed);
      auto data = split_chronological(series, e.dataset.windows);
      auto mc = parse_model(meta.at("model"));
      mc.pe_mode = mode;
      SpikingForecaster model(mc);
      auto ps = model.parameters();
      load_checkpoint(ps, checkpoint);
      model.standardizer().mean = meta.at("standardizer").at("mean").get<std::vector<double>>();
      model.standardizer().scale = meta.at("standardizer").at("scale").get<std::vector<double>>();
      auto rep = evaluate_forecast(model.predict(data.test.history), data.test.target);
      write_json(dir / "eval.json", to_json(rep));
      std::cout << "test R2 " << rep.r2_pooled << " (per-element " << rep.r2 << ", " << rep.r2_excluded
                << " excluded), RSE " << rep.rse << "\n";
      return 0;
    }

    if (pa->parsed()) {
      if (!config.empty()) {
        auto e = load_experiment(config);
        cpg = e.model.cpg;
        t_steps = e.model.t_steps;
        seq_len = e.dataset.windows.obs_len;
      } else {
        cpg.order = flatten_order_from_string(order);
      }
      const auto t0 = std::chrono::steady_clock::now();
      auto a = analyze_pe(t_steps, seq_len, cpg);
      const double ms = ms_since(t0);
      std::ofstream raster(dir / "pe_raster.csv");
      write_pe_csv(raster, generate_pe(t_steps, seq_len, cpg), cpg.order);
      auto j = to_json(a);
      j["runtime_ms"] = ms;
      write_json(dir / "pe_report.json", j);
      std::printf("codes %zu, distinct %zu, repetition rate %.2f%% (per position %.2f%%, %.1f ms)\n", a.n_codes,
                  a.n_distinct, 100.0 * a.repetition_rate, 100.0 * a.position_repetition_rate, ms);
      for (auto [i, j] : a.collisions) std::printf("  code %zu repeats code %zu\n", j, i);
      return require_unique && a.repetition_rate > 0.0 ? 1 : 0;
    }

    if (cv->parsed()) {
      CircuitGridSpec spec;
      spec.rule = current_rule_from_string(currents);
      spec.exact = arith == "exact";
      spec.n_periods = periods;
      const auto t0 = std::chrono::steady_clock::now();
      auto g = run_circuit_grid(spec);
      const double ms = ms_since(t0);
      auto j = to_json(g);
      j["runtime_ms"] = ms;
      write_json(dir / "circuit_grid.json", j);
      auto p = CircuitParams<double>::make(0.9, 1.0, 0.0, 5, 3, spec.rule);
      std::ofstream trace(dir / "circuit_trace.csv");
      write_trace_csv(trace, simulate_circuit(p, 8 * spec.n_periods));
      std::printf("%zu/%zu cases pass (currents %s, %s arithmetic, %.0f ms)\n", g.passed, g.reports.size(),
                  currents.c_str(), arith.c_str(), ms);
      for (const auto& r : g.reports)
        if (!r.passed()) {
          std::printf("first failure: beta=%g R=%d K=%d v_reset=%g at step %d: expected %s, got %s\n", r.beta, r.R, r.K,
                      r.v_reset, r.first_mismatch, r.expected.substr(0, static_cast<std::size_t>(r.R + r.K) * 2).c_str(),
                      r.observed.substr(0, static_cast<std::size_t>(r.R + r.K) * 2).c_str());
          break;
        }
      return g.all_passed() ? 0 : 1;
    }

    if (ov->parsed()) {
      OdeCheckSpec spec;
      spec.n_draws = draws;
      if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
      const auto t0 = std::chrono::steady_clock::now();
      auto r = run_ode_checks(spec);
      const double ms = ms_since(t0);
      auto j = to_json(r);
      j["runtime_ms"] = ms;
      write_json(dir / "ode_report.json", j);
      std::printf("closed form vs RK4: worst %.3e over %d draws; PE residual: worst %.3e; cos/cos controls %s (%.0f ms)\n",
                  r.worst_closed_form_error, spec.n_draws, r.worst_pe_residual, r.controls_ok() ? "rejected" : "NOT rejected",
                  ms);
      return r.all_passed() ? 0 : 1;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}

#pragma once

// JSON experiment configs and the seeds x PE-modes driver.

#include <fstream>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "cpgpe/checkpoint.hpp"
#include "cpgpe/train.hpp"
#include "json.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace cpgpe {

using nlohmann::json;

// Large tape buffers are allocated and freed every step; keep them on the heap
// instead of round-tripping through mmap.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 1 << 28);
#endif
}

struct DatasetConfig {
  std::string source = "synthetic";  // synthetic | csv
  SyntheticSpec synthetic;
  bool seed_from_run = true;  // synthetic noise seed = run seed
  std::string path;
  WindowSpec windows;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<PEMode> pe_modes{PEMode::none, PEMode::cpg};
  bool parallel_seeds = false;
};

namespace detail {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ParseError("unknown key '" + it.key() + "' in " + where, 0);
  }
}

}  // namespace detail

inline LIFParams parse_lif(const json& j) {
  detail::reject_unknown(j, {"beta", "u_thr", "v_reset", "alpha"}, "lif");
  LIFParams p;
  detail::read_opt(j, "beta", p.beta);
  detail::read_opt(j, "u_thr", p.u_thr);
  detail::read_opt(j, "v_reset", p.v_reset);
  detail::read_opt(j, "alpha", p.alpha);
  p.validate();
  return p;
}

inline CPGPEConfig parse_cpg(const json& j) {
  detail::reject_unknown(j, {"n_pairs", "tau", "eta", "v_thres", "order"}, "cpg");
  CPGPEConfig c;
  detail::read_opt(j, "n_pairs", c.n_pairs);
  detail::read_opt(j, "tau", c.tau);
  detail::read_opt(j, "eta", c.eta);
  detail::read_opt(j, "v_thres", c.v_thres);
  if (j.contains("order")) c.order = flatten_order_from_string(j.at("order").get<std::string>());
  c.validate();
  return c;
}

inline json to_json(const CPGPEConfig& c) {
  return {{"n_pairs", c.n_pairs}, {"tau", c.tau}, {"eta", c.eta}, {"v_thres", c.v_thres}, {"order", to_string(c.order)}};
}

inline json to_json(const LIFParams& p) {
  return {{"beta", p.beta}, {"u_thr", p.u_thr}, {"v_reset", p.v_reset}, {"alpha", p.alpha}};
}

inline json to_json(const ModelConfig& m) {
  return {{"backbone", to_string(m.backbone)},
          {"channels", m.channels},
          {"obs_len", m.obs_len},
          {"pred_len", m.pred_len},
          {"hidden", m.hidden},
          {"layers", m.n_layers},
          {"t_steps", m.t_steps},
          {"kernel", m.kernel_size},
          {"pe", to_string(m.pe_mode)},
          {"pe_per_layer", m.pe_per_layer},
          {"random_pe", {{"spike_prob", m.random_pe.spike_prob}, {"resample", m.random_pe.resample}}},
          {"lif", to_json(m.lif)},
          {"cpg", to_json(m.cpg)},
          {"readout", to_string(m.readout)},
          {"pooling", to_string(m.pooling)},
          {"seed", m.seed}};
}

// Reads the "model" object; channels and window lengths come from the dataset.
inline ModelConfig parse_model(const json& j) {
  detail::reject_unknown(j,
                         {"backbone", "hidden", "layers", "t_steps", "kernel", "pe", "pe_per_layer", "random_pe", "lif",
                          "cpg", "readout", "pooling", "channels", "obs_len", "pred_len", "seed"},
                         "model");
  ModelConfig m;
  if (j.contains("backbone")) m.backbone = backbone_from_string(j.at("backbone").get<std::string>());
  detail::read_opt(j, "hidden", m.hidden);
  detail::read_opt(j, "layers", m.n_layers);
  detail::read_opt(j, "t_steps", m.t_steps);
  detail::read_opt(j, "kernel", m.kernel_size);
  detail::read_opt(j, "channels", m.channels);
  detail::read_opt(j, "obs_len", m.obs_len);
  detail::read_opt(j, "pred_len", m.pred_len);
  detail::read_opt(j, "seed", m.seed);
  if (j.contains("pe")) m.pe_mode = pe_mode_from_string(j.at("pe").get<std::string>());
  detail::read_opt(j, "pe_per_layer", m.pe_per_layer);
  if (j.contains("random_pe")) {
    const auto& r = j.at("random_pe");
    detail::reject_unknown(r, {"spike_prob", "resample"}, "model.random_pe");
    detail::read_opt(r, "spike_prob", m.random_pe.spike_prob);
    detail::read_opt(r, "resample", m.random_pe.resample);
  }
  if (j.contains("lif")) m.lif = parse_lif(j.at("lif"));
  if (j.contains("cpg")) m.cpg = parse_cpg(j.at("cpg"));
  if (j.contains("readout")) m.readout = readout_from_string(j.at("readout").get<std::string>());
  if (j.contains("pooling")) m.pooling = pooling_from_string(j.at("pooling").get<std::string>());
  return m;
}

inline TrainConfig parse_train(const json& j) {
  detail::reject_unknown(j, {"optimizer", "lr", "momentum", "cosine", "epochs", "batch", "patience"}, "train");
  TrainConfig t;
  if (j.contains("optimizer")) t.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  detail::read_opt(j, "lr", t.lr);
  detail::read_opt(j, "momentum", t.momentum);
  detail::read_opt(j, "cosine", t.cosine);
  detail::read_opt(j, "epochs", t.epochs);
  detail::read_opt(j, "batch", t.batch);
  detail::read_opt(j, "patience", t.patience);
  t.validate();
  return t;
}

inline DatasetConfig parse_dataset(const json& j) {
  detail::reject_unknown(j,
                         {"source", "channels", "length", "noise", "seed", "seed_from_run", "components", "path",
                          "obs_len", "pred_len", "ratios"},
                         "dataset");
  DatasetConfig d;
  detail::read_opt(j, "source", d.source);
  if (d.source != "synthetic" && d.source != "csv") throw ParseError("dataset.source must be synthetic or csv", 0);
  detail::read_opt(j, "channels", d.synthetic.channels);
  detail::read_opt(j, "length", d.synthetic.length);
  detail::read_opt(j, "noise", d.synthetic.noise);
  if (j.contains("seed")) {
    d.synthetic.seed = j.at("seed").get<std::uint64_t>();
    d.seed_from_run = false;
  }
  detail::read_opt(j, "seed_from_run", d.seed_from_run);
  if (j.contains("components"))
    for (const auto& ch : j.at("components")) {
      std::vector<SineComponent> comps;
      for (const auto& c : ch) comps.push_back({c.at("period").get<double>(), c.value("amplitude", 1.0), c.value("phase", 0.0)});
      d.synthetic.components.push_back(std::move(comps));
    }
  detail::read_opt(j, "path", d.path);
  if (d.source == "csv" && d.path.empty()) throw ParseError("dataset.path required for csv source", 0);
  detail::read_opt(j, "obs_len", d.windows.obs_len);
  detail::read_opt(j, "pred_len", d.windows.pred_len);
  if (j.contains("ratios")) {
    auto r = j.at("ratios").get<std::vector<double>>();
    if (r.size() != 3) throw ParseError("dataset.ratios needs [train, valid, test]", 0);
    d.windows.ratios = {r[0], r[1], r[2]};
  }
  d.windows.ratios.validate();
  return d;
}

inline ExperimentConfig parse_experiment(const json& j) {
  detail::reject_unknown(j, {"name", "dataset", "model", "train", "seeds", "pe_modes", "parallel_seeds"}, "config");
  ExperimentConfig e;
  detail::read_opt(j, "name", e.name);
  if (j.contains("dataset")) e.dataset = parse_dataset(j.at("dataset"));
  if (j.contains("model")) e.model = parse_model(j.at("model"));
  if (j.contains("train")) e.train = parse_train(j.at("train"));
  detail::read_opt(j, "seeds", e.seeds);
  if (e.seeds.empty()) throw ParseError("seeds must not be empty", 0);
  if (j.contains("pe_modes")) {
    e.pe_modes.clear();
    for (const auto& m : j.at("pe_modes")) e.pe_modes.push_back(pe_mode_from_string(m.get<std::string>()));
  }
  detail::read_opt(j, "parallel_seeds", e.parallel_seeds);
  return e;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open config '" + path + "'", 0);
  try {
    return parse_experiment(json::parse(f, nullptr, true, true));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config '") + path + "': " + e.what(), 0);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config '") + path + "': " + e.what(), 0);
  }
}

inline Series load_series(const DatasetConfig& d, std::uint64_t run_seed) {
  if (d.source == "csv") return load_csv(d.path);
  auto spec = d.synthetic;
  if (d.seed_from_run) spec.seed = run_seed;
  return gen_synthetic(spec);
}

// Model config with dataset-derived shapes, a PE mode and a seed filled in.
inline ModelConfig resolve_model(const ExperimentConfig& e, const Series& s, PEMode mode, std::uint64_t seed) {
  auto m = e.model;
  m.channels = s.channels;
  m.obs_len = e.dataset.windows.obs_len;
  m.pred_len = e.dataset.windows.pred_len;
  m.pe_mode = mode;
  m.seed = seed;
  m.validate();
  return m;
}

inline json to_json(const MetricReport& r) {
  json h = json::array();
  for (const auto& x : r.per_horizon) h.push_back({{"horizon", x.horizon}, {"r2", x.r2}, {"r2_pooled", x.r2_pooled}, {"rse", x.rse}});
  return {{"r2", r.r2},
          {"r2_pooled", r.r2_pooled},
          {"rse", r.rse},
          {"r2_excluded", r.r2_excluded},
          {"n_samples", r.n_samples},
          {"n_channels", r.n_channels},
          {"pred_len", r.pred_len},
          {"per_horizon", h}};
}

struct RunRecord {
  std::uint64_t seed = 0;
  PEMode pe_mode = PEMode::none;
  bool ok = false;
  std::string error;
  MetricReport test;
  TrainResult train;
  std::size_t n_params = 0;
  double wall_s = 0.0;
};

struct ModeAggregate {
  PEMode pe_mode = PEMode::none;
  std::size_t n_ok = 0;
  double r2 = 0.0, r2_pooled = 0.0, rse = 0.0;
};

struct ExperimentResult {
  std::string name;
  std::vector<RunRecord> runs;
  std::vector<ModeAggregate> aggregate;

  const ModeAggregate& mode(PEMode m) const {
    for (const auto& a : aggregate)
      if (a.pe_mode == m) return a;
    throw ContractViolation("no aggregate for PE mode " + to_string(m));
  }
};

// Trains and tests one (seed, mode). Failures land in the record.
inline RunRecord run_single(const ExperimentConfig& e, std::uint64_t seed, PEMode mode,
                            std::ostream* jsonl = nullptr, const std::string& checkpoint_base = {}) {
  RunRecord r;
  r.seed = seed;
  r.pe_mode = mode;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto series = load_series(e.dataset, seed);
    const auto data = split_chronological(series, e.dataset.windows);
    SpikingForecaster model(resolve_model(e, series, mode, seed));
    auto tc = e.train;
    tc.seed = seed;
    r.train = train(model, data, tc, jsonl);
    r.test = evaluate_forecast(model.predict(data.test.history), data.test.target);
    r.n_params = count_trainable(model.parameters());
    if (!checkpoint_base.empty())
      save_checkpoint(model.parameters(), checkpoint_base,
                      {{"model", to_json(model.config())},
                       {"standardizer", {{"mean", model.standardizer().mean}, {"scale", model.standardizer().scale}}}});
    r.ok = true;
  } catch (const std::exception& ex) {
    r.error = ex.what();
  }
  r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline std::vector<ModeAggregate> aggregate_runs(const std::vector<RunRecord>& runs, const std::vector<PEMode>& modes) {
  std::vector<ModeAggregate> out;
  for (auto m : modes) {
    ModeAggregate a;
    a.pe_mode = m;
    for (const auto& r : runs)
      if (r.pe_mode == m && r.ok) {
        ++a.n_ok;
        a.r2 += r.test.r2;
        a.r2_pooled += r.test.r2_pooled;
        a.rse += r.test.rse;
      }
    if (a.n_ok) {
      a.r2 /= static_cast<double>(a.n_ok);
      a.r2_pooled /= static_cast<double>(a.n_ok);
      a.rse /= static_cast<double>(a.n_ok);
    }
    out.push_back(a);
  }
  return out;
}

// Runs every (mode, seed) pair. `log_dir`, when set, receives one JSONL
// training log per run.
inline ExperimentResult run_experiment(const ExperimentConfig& e, const std::string& log_dir = {}) {
  ExperimentResult res;
  res.name = e.name;
  for (auto mode : e.pe_modes) {
    auto one = [&](std::uint64_t seed) {
      std::ofstream log;
      if (!log_dir.empty()) log.open(log_dir + "/train_" + to_string(mode) + "_seed" + std::to_string(seed) + ".jsonl");
      return run_single(e, seed, mode, log.is_open() ? &log : nullptr);
    };
    if (e.parallel_seeds) {
      std::vector<std::future<RunRecord>> fs;
      for (auto s : e.seeds) fs.push_back(std::async(std::launch::async, one, s));
      for (auto& f : fs) res.runs.push_back(f.get());
    } else {
      for (auto s : e.seeds) res.runs.push_back(one(s));
    }
  }
  res.aggregate = aggregate_runs(res.runs, e.pe_modes);
  return res;
}

// Deterministic content only; timings are left out.
inline json to_json(const ExperimentResult& r) {
  json runs = json::array();
  for (const auto& x : r.runs) {
    json j{{"seed", x.seed}, {"pe", to_string(x.pe_mode)}, {"ok", x.ok}};
    if (x.ok) {
      j["test"] = to_json(x.test);
      j["best_epoch"] = x.train.best_epoch;
      j["best_valid_r2_pooled"] = x.train.best_valid_r2;
      j["n_params"] = x.n_params;
    } else {
      j["error"] = x.error;
    }
    runs.push_back(j);
  }
  json agg = json::array();
  for (const auto& a : r.aggregate)
    agg.push_back({{"pe", to_string(a.pe_mode)}, {"n_ok", a.n_ok}, {"r2", a.r2}, {"r2_pooled", a.r2_pooled}, {"rse", a.rse}});
  return {{"name", r.name}, {"runs", runs}, {"aggregate", agg}};
}

}  // namespace cpgpe

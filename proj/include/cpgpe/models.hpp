#pragma once

// Spiking forecasters: encoder -> [PE] -> backbone (RNN or causal TCN) ->
// readout head. Everything between the encoder's spiking layer and the head
// travels as SpikeTensor.

#include <optional>
#include <string>
#include <vector>

#include "cpgpe/blocks.hpp"
#include "cpgpe/data.hpp"

namespace cpgpe {

enum class Backbone { rnn, tcn };
enum class PEMode { none, cpg, float_pe, random };
enum class Readout { rate, membrane };
enum class Pooling { mean, last, flatten };

inline std::string to_string(Backbone b) { return b == Backbone::rnn ? "rnn" : "tcn"; }
inline std::string to_string(PEMode m) {
  switch (m) {
    case PEMode::none: return "none";
    case PEMode::cpg: return "cpg";
    case PEMode::float_pe: return "float";
    case PEMode::random: return "random";
  }
  return "?";
}
inline std::string to_string(Readout r) { return r == Readout::rate ? "rate" : "membrane"; }
inline std::string to_string(Pooling p) { return p == Pooling::mean ? "mean" : p == Pooling::last ? "last" : "flatten"; }

inline Backbone backbone_from_string(const std::string& s) {
  if (s == "rnn") return Backbone::rnn;
  if (s == "tcn") return Backbone::tcn;
  throw ParameterError("unknown backbone '" + s + "'");
}
inline PEMode pe_mode_from_string(const std::string& s) {
  if (s == "none") return PEMode::none;
  if (s == "cpg") return PEMode::cpg;
  if (s == "float") return PEMode::float_pe;
  if (s == "random") return PEMode::random;
  throw ParameterError("unknown PE mode '" + s + "' (none, cpg, float, random)");
}
inline Readout readout_from_string(const std::string& s) {
  if (s == "rate") return Readout::rate;
  if (s == "membrane") return Readout::membrane;
  throw ParameterError("unknown readout '" + s + "'");
}
inline Pooling pooling_from_string(const std::string& s) {
  if (s == "mean") return Pooling::mean;
  if (s == "last") return Pooling::last;
  if (s == "flatten") return Pooling::flatten;
  throw ParameterError("unknown pooling '" + s + "'");
}

struct ModelConfig {
  Backbone backbone = Backbone::tcn;
  std::size_t channels = 3;
  std::size_t obs_len = 48;
  std::size_t pred_len = 12;
  std::size_t hidden = 32;
  std::size_t n_layers = 2;
  std::size_t t_steps = 4;
  std::size_t kernel_size = 3;
  PEMode pe_mode = PEMode::none;
  bool pe_per_layer = false;
  RandomPEOptions random_pe;
  LIFParams lif;
  CPGPEConfig cpg;
  Readout readout = Readout::rate;
  Pooling pooling = Pooling::mean;
  std::uint64_t seed = 1;

  void validate() const {
    if (channels < 1 || obs_len < 1 || pred_len < 1) throw ParameterError("model needs C, L_obs, L_pred >= 1");
    if (hidden < 1 || n_layers < 1 || t_steps < 1) throw ParameterError("model needs D, layers, T >= 1");
    if (backbone == Backbone::tcn && kernel_size < 1) throw ParameterError("TCN kernel size must be >= 1");
    if (pe_mode == PEMode::float_pe && hidden % 2 != 0) throw ParameterError("float PE needs an even hidden width");
    lif.validate();
    if (pe_mode == PEMode::cpg) cpg.validate();
  }
};

// Recurrence over positions: I_p = W_in x_p + W_rec s_{p-1}. Membrane state
// runs along the step axis within each position.
class SpikeRNNLayer {
 public:
  SpikeRNNLayer() = default;
  // The input bias starts at u_thr/2 on top of the usual uniform draw; with
  // no normalization in the cell, units otherwise start out silent.
  SpikeRNNLayer(std::size_t d_in, std::size_t d, LIFParams lif, Rng& rng)
      : w_in_(d_in, d, rng), w_rec_(d, d, rng, false), lif_(lif) {
    for (auto& b : w_in_.bias().mutable_data()) b += 0.5 * lif_.u_thr;
  }

  SpikeTensor forward(const SpikeTensor& x) const {
    check_spike_features(x, w_in_.in_features(), "spike RNN");
    const std::size_t length = x.positions();
    auto drive = w_in_.forward(x.values());  // (T,B,L,D)
    std::vector<ValueTensor> outs;
    outs.reserve(length);
    std::optional<ValueTensor> prev;
    for (std::size_t p = 0; p < length; ++p) {
      auto cur = select(drive, 2, p);  // (T,B,D)
      if (prev) cur = add(cur, w_rec_.forward(*prev));
      auto s = lif_sequence(cur, lif_);
      outs.push_back(s);
      prev = s;
    }
    return SpikeTensor(stack(outs, 2));
  }

  void collect(ParamList& out, const std::string& prefix) {
    w_in_.collect(out, prefix + ".w_in");
    w_rec_.collect(out, prefix + ".w_rec");
  }

  Linear& w_in() { return w_in_; }
  Linear& w_rec() { return w_rec_; }

 private:
  Linear w_in_, w_rec_;
  LIFParams lif_;
};

// Causal dilated convolution over positions, then BN and SN.
class SpikeTCNLayer {
 public:
  SpikeTCNLayer() = default;
  SpikeTCNLayer(std::size_t d_in, std::size_t d, std::size_t kernel, std::size_t dilation, LIFParams lif, Rng& rng)
      : d_in_(d_in), kernel_(kernel), dilation_(dilation), conv_(kernel * d_in, d, rng), bn_(d), lif_(lif) {}

  SpikeTensor forward(const SpikeTensor& x, Mode mode) {
    check_spike_features(x, d_in_, "spike TCN");
    if ((kernel_ - 1) * dilation_ >= x.positions())
      throw ParameterError("TCN kernel " + std::to_string(kernel_) + " at dilation " + std::to_string(dilation_) +
                           " spans past the " + std::to_string(x.positions()) + " available positions");
    SpikeTensor taps = x;
    for (std::size_t k = 1; k < kernel_; ++k) taps = concat_features(taps, shift_positions(x, k * dilation_));
    return spiking_layer_forward(bn_.forward(conv_.forward(taps.values()), mode), lif_);
  }

  void collect(ParamList& out, const std::string& prefix) {
    conv_.collect(out, prefix + ".conv");
    bn_.collect(out, prefix + ".bn");
  }

  std::size_t span() const { return (kernel_ - 1) * dilation_; }
  Linear& conv() { return conv_; }
  BatchNorm& bn() { return bn_; }

 private:
  std::size_t d_in_ = 0, kernel_ = 1, dilation_ = 1;
  Linear conv_;
  BatchNorm bn_;
  LIFParams lif_;
};

// Intermediate spike tensors of one forward pass.
struct ForwardTrace {
  std::vector<SpikeTensor> spikes;
};

class SpikingForecaster {
 public:
  explicit SpikingForecaster(const ModelConfig& cfg) : cfg_(cfg), standardizer_(Standardizer::identity(cfg.channels)) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    const std::size_t d = cfg_.hidden;
    encoder_ = Linear(cfg_.channels, d, rng);
    const std::size_t n_pe = cfg_.pe_per_layer ? cfg_.n_layers : 1;
    if (cfg_.pe_mode == PEMode::cpg || cfg_.pe_mode == PEMode::random)
      for (std::size_t i = 0; i < n_pe; ++i) {
        PEProvider pe = cfg_.pe_mode == PEMode::cpg ? PEProvider(cfg_.cpg) : [&] {
          auto opt = cfg_.random_pe;
          opt.seed = cfg_.seed * 1000003ULL + opt.seed + i;
          return PEProvider(cfg_.cpg.channels(), opt);
        }();
        pe_blocks_.emplace_back(d, std::move(pe), cfg_.lif, rng);
      }
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      if (cfg_.backbone == Backbone::rnn)
        rnn_.emplace_back(d, d, cfg_.lif, rng);
      else
        tcn_.emplace_back(d, d, cfg_.kernel_size, std::size_t{1} << l, cfg_.lif, rng);
    }
    const std::size_t pooled = cfg_.pooling == Pooling::flatten ? d * cfg_.obs_len : d;
    head_ = Linear(pooled, cfg_.pred_len * cfg_.channels, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  Standardizer& standardizer() { return standardizer_; }
  const Standardizer& standardizer() const { return standardizer_; }

  std::size_t receptive_field() const {
    if (cfg_.backbone != Backbone::tcn) return cfg_.obs_len;
    std::size_t rf = 1;
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) rf += (cfg_.kernel_size - 1) << l;
    return rf;
  }

  // Standardized (B,L,C) window -> (T,B,L,D) spikes.
  SpikeTensor encode_input(const ValueTensor& z) const {
    if (z.rank() != 3 || z.dim(1) != cfg_.obs_len || z.dim(2) != cfg_.channels)
      throw DimensionError("history must be (B," + std::to_string(cfg_.obs_len) + "," + std::to_string(cfg_.channels) +
                           "), got " + shape_str(z.shape()));
    for (double v : z.data())
      if (!std::isfinite(v)) throw NumericError("encode_input: non-finite history value");
    auto cur = encoder_.forward(z);
    if (cfg_.pe_mode == PEMode::float_pe) cur = float_pe_block_forward(cur);
    Shape s1{1, z.dim(0), cfg_.obs_len, cfg_.hidden};
    auto rep = broadcast_axis(reshape(cur, s1), 0, cfg_.t_steps);
    return spiking_layer_forward(rep, cfg_.lif);
  }

  SpikeTensor backbone_forward(SpikeTensor x, Mode mode, ForwardTrace* trace = nullptr) {
    for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
      if (l < pe_blocks_.size()) {
        x = pe_blocks_[l].forward(x, mode);
        if (trace) trace->spikes.push_back(x);
      }
      x = cfg_.backbone == Backbone::rnn ? rnn_[l].forward(x) : tcn_[l].forward(x, mode);
      if (trace) trace->spikes.push_back(x);
    }
    return x;
  }

  // (T,B,L,D) spikes -> (B, L_pred, C) on the standardized scale.
  ValueTensor readout(const SpikeTensor& x) const {
    const std::size_t t = x.steps(), b = x.batch();
    std::vector<double> w(t);
    if (cfg_.readout == Readout::rate) {
      std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(t));
    } else {
      for (std::size_t s = 0; s < t; ++s) w[s] = std::pow(cfg_.lif.beta, static_cast<double>(t - 1 - s));
    }
    auto r = weighted_sum_axis(x.values(), 0, std::move(w));  // (B,L,D)
    ValueTensor pooled;
    switch (cfg_.pooling) {
      case Pooling::mean: pooled = mean_axis(r, 1); break;
      case Pooling::last: pooled = select(r, 1, r.dim(1) - 1); break;
      case Pooling::flatten: pooled = reshape(r, {b, r.dim(1) * r.dim(2)}); break;
    }
    return reshape(head_.forward(pooled), {b, cfg_.pred_len, cfg_.channels});
  }

  ValueTensor forward_standardized(const ValueTensor& z, Mode mode, ForwardTrace* trace = nullptr) {
    auto x = encode_input(z);
    if (trace) trace->spikes.push_back(x);
    return readout(backbone_forward(x, mode, trace));
  }

  // Raw (B,L,C) history -> standardized predictions.
  ValueTensor forward(const ValueTensor& history, Mode mode, ForwardTrace* trace = nullptr) {
    return forward_standardized(standardizer_.apply(history), mode, trace);
  }

  // Raw history -> raw-scale predictions, no tape.
  ValueTensor predict(const ValueTensor& history, std::size_t batch = 256) {
    NoGradGuard ng;
    const std::size_t n = history.dim(0);
    std::vector<double> out;
    out.reserve(n * cfg_.pred_len * cfg_.channels);
    const std::size_t row = cfg_.obs_len * cfg_.channels;
    for (std::size_t i = 0; i < n; i += batch) {
      const std::size_t m = std::min(batch, n - i);
      ValueTensor chunk({m, cfg_.obs_len, cfg_.channels},
                        std::vector<double>(history.data().begin() + static_cast<std::ptrdiff_t>(i * row),
                                            history.data().begin() + static_cast<std::ptrdiff_t>((i + m) * row)));
      auto y = standardizer_.invert(forward(chunk, Mode::eval));
      out.insert(out.end(), y.data().begin(), y.data().end());
    }
    return ValueTensor({n, cfg_.pred_len, cfg_.channels}, std::move(out));
  }

  ParamList parameters() {
    ParamList ps;
    encoder_.collect(ps, "encoder");
    for (std::size_t i = 0; i < pe_blocks_.size(); ++i) pe_blocks_[i].collect(ps, "pe" + std::to_string(i));
    for (std::size_t l = 0; l < rnn_.size(); ++l) rnn_[l].collect(ps, "rnn" + std::to_string(l));
    for (std::size_t l = 0; l < tcn_.size(); ++l) tcn_[l].collect(ps, "tcn" + std::to_string(l));
    head_.collect(ps, "head");
    return ps;
  }

  Linear& encoder() { return encoder_; }
  Linear& head() { return head_; }
  std::vector<CPGPEBlock>& pe_blocks() { return pe_blocks_; }
  std::vector<SpikeRNNLayer>& rnn_layers() { return rnn_; }
  std::vector<SpikeTCNLayer>& tcn_layers() { return tcn_; }

 private:
  ModelConfig cfg_;
  Standardizer standardizer_;
  Linear encoder_;
  std::vector<CPGPEBlock> pe_blocks_;
  std::vector<SpikeRNNLayer> rnn_;
  std::vector<SpikeTCNLayer> tcn_;
  Linear head_;
};

}  // namespace cpgpe

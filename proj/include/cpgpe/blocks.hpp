#pragma once

// Positional-encoding injection for spiking paths.
//
//   CPGPEBlock:     SN(BN(Linear([X ; X'])))          (D+2N -> D)
//   CPGLinearLayer: SN(BN(Linear1(X) + Linear2(X')))  (D_in -> D_out)
//   float_pe_block_forward: real-valued x + sinusoidal PE, before any spiking layer
//
// Spikes are never added to spikes; X' reaches the network by concatenation
// or through a real-valued projection.

#include <map>
#include <optional>
#include <utility>

#include "cpgpe/encoder.hpp"
#include "cpgpe/layers.hpp"
#include "cpgpe/lif.hpp"

namespace cpgpe {

enum class PESource { cpg, random };

struct RandomPEOptions {
  double spike_prob = 0.2;
  bool resample = true;  // fresh draw on every training forward
  std::uint64_t seed = 0;
};

// Supplies the (T,1,L,W) positional spikes, cached per (T, L).
class PEProvider {
 public:
  PEProvider() = default;
  explicit PEProvider(CPGPEConfig cfg) : source_(PESource::cpg), cfg_(cfg) { cfg_.validate(); }
  PEProvider(std::size_t width, RandomPEOptions opt)
      : source_(PESource::random), width_(width), random_(opt), rng_(opt.seed) {
    if (!(opt.spike_prob >= 0.0 && opt.spike_prob <= 1.0))
      throw ParameterError("random PE spike probability must lie in [0,1]");
  }

  PESource source() const { return source_; }
  std::size_t width() const { return source_ == PESource::cpg ? cfg_.channels() : width_; }
  const CPGPEConfig& config() const { return cfg_; }
  const RandomPEOptions& random_options() const { return random_; }

  SpikeTensor get(std::size_t steps, std::size_t length, Mode mode) {
    if (source_ == PESource::random && random_.resample && mode == Mode::train)
      return random_pe_grid(steps, length, width_, random_.spike_prob, rng_());
    auto key = std::make_pair(steps, length);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    SpikeTensor pe = source_ == PESource::cpg ? generate_pe(steps, length, cfg_)
                                              : random_pe_grid(steps, length, width_, random_.spike_prob, random_.seed);
    cache_.emplace(key, pe);
    return pe;
  }

 private:
  PESource source_ = PESource::cpg;
  CPGPEConfig cfg_;
  std::size_t width_ = 0;
  RandomPEOptions random_;
  Rng rng_;
  std::map<std::pair<std::size_t, std::size_t>, SpikeTensor> cache_;
};

inline void check_spike_features(const SpikeTensor& x, std::size_t d, const char* who) {
  if (x.features() != d)
    throw DimensionError(std::string(who) + ": expected " + std::to_string(d) + " features, got input " +
                         shape_str(x.shape()));
}

class CPGPEBlock {
 public:
  CPGPEBlock() = default;
  CPGPEBlock(std::size_t d, PEProvider pe, LIFParams lif, Rng& rng)
      : d_(d), pe_(std::move(pe)), linear_(d + pe_.width(), d, rng), bn_(d), lif_(lif) {
    lif_.validate();
  }
  CPGPEBlock(std::size_t d, const CPGPEConfig& cfg, LIFParams lif, Rng& rng)
      : CPGPEBlock(d, PEProvider(cfg), lif, rng) {}

  // Pre-spike current SN sees, (T,B,L,D).
  ValueTensor current(const SpikeTensor& x, Mode mode) {
    check_spike_features(x, d_, "CPG-PE block");
    auto pe = broadcast_batch(pe_.get(x.steps(), x.positions(), mode), x.batch());
    auto x1 = concat_features(x, pe);
    return bn_.forward(linear_.forward(x1.values()), mode);
  }

  SpikeTensor forward(const SpikeTensor& x, Mode mode) { return spiking_layer_forward(current(x, mode), lif_); }

  void collect(ParamList& out, const std::string& prefix) {
    linear_.collect(out, prefix + ".linear");
    bn_.collect(out, prefix + ".bn");
  }

  std::size_t features() const { return d_; }
  PEProvider& pe() { return pe_; }
  Linear& linear() { return linear_; }
  BatchNorm& bn() { return bn_; }
  const LIFParams& lif() const { return lif_; }

 private:
  std::size_t d_ = 0;
  PEProvider pe_;
  Linear linear_;
  BatchNorm bn_;
  LIFParams lif_;
};

class CPGLinearLayer {
 public:
  CPGLinearLayer() = default;
  CPGLinearLayer(std::size_t d_in, std::size_t d_out, const CPGPEConfig& cfg, LIFParams lif, Rng& rng)
      : d_in_(d_in),
        pe_(cfg),
        linear1_(d_in, d_out, rng),
        linear2_(cfg.channels(), d_out, rng, false),
        bn_(d_out),
        lif_(lif) {
    lif_.validate();
  }

  ValueTensor current(const SpikeTensor& x, Mode mode) {
    check_spike_features(x, d_in_, "CPG-Linear");
    auto x1 = linear1_.forward(x.values());
    auto pe = pe_.get(x.steps(), x.positions(), mode);
    auto x2 = broadcast_axis(linear2_.forward(pe.values()), 1, x.batch());
    return bn_.forward(add(x1, x2), mode);
  }

  SpikeTensor forward(const SpikeTensor& x, Mode mode) { return spiking_layer_forward(current(x, mode), lif_); }

  void collect(ParamList& out, const std::string& prefix) {
    linear1_.collect(out, prefix + ".linear1");
    linear2_.collect(out, prefix + ".linear2");
    bn_.collect(out, prefix + ".bn");
  }

  Linear& linear1() { return linear1_; }
  Linear& linear2() { return linear2_; }
  BatchNorm& bn() { return bn_; }

 private:
  std::size_t d_in_ = 0;
  PEProvider pe_;
  Linear linear1_, linear2_;
  BatchNorm bn_;
  LIFParams lif_;
};

// x (..., L, D) + PE table (L, D) broadcast over the leading axes. The result
// is real-valued and must pass through a spiking layer before use.
inline ValueTensor float_pe_block_forward(const ValueTensor& x) {
  if (x.rank() < 2) throw DimensionError("float PE needs (..., L, D), got " + shape_str(x.shape()));
  const std::size_t d = x.shape().back(), length = x.shape()[x.rank() - 2];
  auto table = float_pe_table(length, static_cast<int>(d));
  const std::size_t lead = x.size() / (length * d);
  Shape s{1, length, d};
  auto pe = broadcast_axis(reshape(table, s), 0, lead);
  return add(x, reshape(pe, x.shape()));
}

}  // namespace cpgpe

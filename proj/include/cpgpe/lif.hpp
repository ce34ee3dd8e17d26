#pragma once

// Discrete-time leaky integrate-and-fire neuron with an arctangent surrogate
// gradient.
//
//   U(t) = H(t-1) + I(t)
//   S(t) = 1 if U(t) >= u_thr else 0
//   H(t) = v_reset * S(t) + (1 - S(t)) * beta * U(t)
//
// In the backward pass dS/dU is replaced by
//   (alpha/2) / (1 + (pi/2 * alpha * (U - u_thr))^2)
// and the reset branch is detached, so dH/dU = (1 - S) * beta.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "cpgpe/errors.hpp"
#include "cpgpe/tensor.hpp"

namespace cpgpe {

struct LIFParams {
  double beta = 0.9;
  double u_thr = 1.0;
  double v_reset = 0.0;
  double alpha = 2.0;

  void validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("LIF beta must lie in (0,1), got " + std::to_string(beta));
    if (!(u_thr > v_reset)) throw ParameterError("LIF u_thr must exceed v_reset");
    if (!(alpha > 0.0)) throw ParameterError("LIF surrogate alpha must be positive");
  }
};

struct LifUpdate {
  double u;
  bool spike;
  double h;
};

inline LifUpdate lif_update(double h_prev, double current, const LIFParams& p) {
  const double u = h_prev + current;
  const bool s = u >= p.u_thr;
  return {u, s, s ? p.v_reset : p.beta * u};
}

inline double surrogate_grad(double u, double alpha) {
  const double z = std::numbers::pi / 2.0 * alpha * u;
  return alpha / 2.0 / (1.0 + z * z);
}

// Elementwise surrogate values; not part of the tape.
inline ValueTensor surrogate_grad(const ValueTensor& u, double alpha) {
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = surrogate_grad(u[i], alpha);
  return ValueTensor(u.shape(), std::move(out));
}

struct MembraneState {
  std::vector<double> h;
  std::size_t step = 0;

  static MembraneState rest(std::size_t n) { return {std::vector<double>(n, 0.0), 0}; }
};

struct LifStepResult {
  std::vector<std::uint8_t> spikes;
  std::vector<double> membrane;  // U(t) before reset
  MembraneState state;
};

inline LifStepResult lif_step(const MembraneState& state, std::span<const double> current, const LIFParams& p) {
  if (current.size() != state.h.size())
    throw DimensionError("lif_step: current has " + std::to_string(current.size()) + " entries, state has " +
                         std::to_string(state.h.size()));
  LifStepResult r;
  r.spikes.resize(current.size());
  r.membrane.resize(current.size());
  r.state.h.resize(current.size());
  r.state.step = state.step + 1;
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (!std::isfinite(current[i]) || !std::isfinite(state.h[i]))
      throw NumericError("lif_step: non-finite input at neuron " + std::to_string(i));
    auto up = lif_update(state.h[i], current[i], p);
    r.spikes[i] = up.spike ? 1 : 0;
    r.membrane[i] = up.u;
    r.state.h[i] = up.h;
  }
  return r;
}

// Runs the neuron over axis 0 of `x` (steps first, any trailing shape),
// starting from H = 0. Output has the same shape and holds {0,1}.
inline ValueTensor lif_sequence(const ValueTensor& x, const LIFParams& p) {
  if (x.rank() < 1) throw DimensionError("lif_sequence: need a step axis");
  const std::size_t steps = x.dim(0);
  const std::size_t width = steps ? x.size() / steps : 0;
  std::vector<double> spikes(x.size());
  std::vector<double> membrane(x.size());
  std::vector<double> h(width, 0.0);
  auto X = x.data();
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < width; ++i) {
      const std::size_t k = s * width + i;
      if (!std::isfinite(X[k])) throw NumericError("spiking layer: non-finite input current");
      auto up = lif_update(h[i], X[k], p);
      membrane[k] = up.u;
      spikes[k] = up.spike ? 1.0 : 0.0;
      h[i] = up.h;
    }
  }
  auto out_spikes = spikes;
  return ValueTensor::make_op(
      x.shape(), std::move(out_spikes), {&x},
      [x, p, steps, width, membrane = std::move(membrane), spikes = std::move(spikes)](std::span<const double> g) {
        auto gx = x.grad_buffer();
        std::vector<double> g_h(width, 0.0);
        for (std::size_t s = steps; s-- > 0;) {
          for (std::size_t i = 0; i < width; ++i) {
            const std::size_t k = s * width + i;
            const double g_u = g[k] * surrogate_grad(membrane[k] - p.u_thr, p.alpha) +
                               g_h[i] * (1.0 - spikes[k]) * p.beta;
            gx[k] += g_u;
            g_h[i] = g_u;
          }
        }
      });
}

// Spiking layer over a (T,B,L,D) current tensor.
inline SpikeTensor spiking_layer_forward(const ValueTensor& x_seq, const LIFParams& p) {
  if (x_seq.rank() != 4) throw DimensionError("spiking_layer_forward expects (T,B,L,D), got " + shape_str(x_seq.shape()));
  return SpikeTensor(lif_sequence(x_seq, p));
}

}  // namespace cpgpe

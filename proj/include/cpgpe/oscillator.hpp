#pragma once

// Linear two-neuron CPG:  x' = a*y + b,  y' = -c*x + d.
//
// With w = sqrt(a*c) the general solution is
//   x(t) =  k1 cos(wt) + k2 sqrt(a/c) sin(wt) + d/c
//   y(t) = -k1 sqrt(c/a) sin(wt) + k2 cos(wt) - b/a
// and a phase shift of t turns it into A1 sin(wt') + d/c, A2 cos(wt') - b/a.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cpgpe/errors.hpp"

namespace cpgpe {

struct OscillatorParams {
  double a = 1.0;
  double b = 0.0;
  double c = 1.0;
  double d = 0.0;

  void validate() const {
    if (!(a > 0.0) || !(c > 0.0))
      throw ParameterError("oscillator requires a > 0 and c > 0 (got a=" + std::to_string(a) +
                           ", c=" + std::to_string(c) + ")");
  }
  // Both neurons self-excite; advisory only, the solver accepts any real b, d.
  bool autonomic() const { return b > 0.0 && d > 0.0; }
  double omega() const { return std::sqrt(a * c); }
};

struct OscillatorState {
  double x = 0.0;
  double y = 0.0;
};

struct OscillatorSolution {
  double k1 = 0.0, k2 = 0.0;
  double amplitude_x = 0.0, amplitude_y = 0.0;
  double omega = 0.0;
  double offset_x = 0.0, offset_y = 0.0;
  // t' - t such that x(t) = amplitude_x * sin(omega * t') + offset_x.
  double time_shift = 0.0;

  static OscillatorSolution from_constants(const OscillatorParams& p, double k1, double k2) {
    p.validate();
    OscillatorSolution s;
    s.k1 = k1;
    s.k2 = k2;
    s.omega = p.omega();
    s.amplitude_x = std::sqrt(k1 * k1 + p.a / p.c * k2 * k2);
    s.amplitude_y = std::sqrt(p.c / p.a * k1 * k1 + k2 * k2);
    s.offset_x = p.d / p.c;
    s.offset_y = -p.b / p.a;
    // atan2 covers k2 <= 0; at k2 = 0 it yields sign(k1)*pi/2.
    s.time_shift = std::atan2(k1, k2 * std::sqrt(p.a / p.c)) / s.omega;
    return s;
  }

  static OscillatorSolution from_initial(const OscillatorParams& p, double x0, double y0) {
    p.validate();
    return from_constants(p, x0 - p.d / p.c, y0 + p.b / p.a);
  }

  // Amplitude/phase form evaluated at the shifted time t'.
  OscillatorState at_shifted(double t_prime) const {
    return {amplitude_x * std::sin(omega * t_prime) + offset_x, amplitude_y * std::cos(omega * t_prime) + offset_y};
  }
};

inline OscillatorState closed_form(const OscillatorParams& p, double k1, double k2, double t) {
  p.validate();
  const double w = p.omega();
  const double cw = std::cos(w * t), sw = std::sin(w * t);
  return {k1 * cw + k2 * std::sqrt(p.a / p.c) * sw + p.d / p.c,
          -k1 * std::sqrt(p.c / p.a) * sw + k2 * cw - p.b / p.a};
}

inline OscillatorState derivative(const OscillatorParams& p, const OscillatorState& s) {
  return {p.a * s.y + p.b, -p.c * s.x + p.d};
}

struct TrajectoryPoint {
  double t;
  double x;
  double y;
};

// Classical fixed-step RK4. The returned trajectory starts at t = 0.
inline std::vector<TrajectoryPoint> integrate_rk4(const OscillatorParams& p, double x0, double y0, double t_end,
                                                  double dt) {
  p.validate();
  if (!(dt > 0.0) || !(t_end > 0.0)) throw ParameterError("integrate_rk4 requires dt > 0 and t_end > 0");
  const auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  std::vector<TrajectoryPoint> out;
  out.reserve(steps + 1);
  OscillatorState s{x0, y0};
  out.push_back({0.0, s.x, s.y});
  for (std::size_t n = 0; n < steps; ++n) {
    auto k1 = derivative(p, s);
    auto k2 = derivative(p, {s.x + 0.5 * dt * k1.x, s.y + 0.5 * dt * k1.y});
    auto k3 = derivative(p, {s.x + 0.5 * dt * k2.x, s.y + 0.5 * dt * k2.y});
    auto k4 = derivative(p, {s.x + dt * k3.x, s.y + dt * k3.y});
    s.x += dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    s.y += dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
    out.push_back({static_cast<double>(n + 1) * dt, s.x, s.y});
  }
  return out;
}

// Max |RK4 - closed form| over the trajectory, both started from (x0, y0).
inline double max_closed_form_error(const OscillatorParams& p, double x0, double y0, double t_end, double dt) {
  auto sol = OscillatorSolution::from_initial(p, x0, y0);
  double err = 0.0;
  for (const auto& pt : integrate_rk4(p, x0, y0, t_end, dt)) {
    auto cf = closed_form(p, sol.k1, sol.k2, pt.t);
    err = std::max({err, std::abs(cf.x - pt.x), std::abs(cf.y - pt.y)});
  }
  return err;
}

// Mean spacing of upward crossings of x through its offset d/c.
inline double measured_period(const std::vector<TrajectoryPoint>& traj, double offset) {
  std::vector<double> crossings;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const double prev = traj[i - 1].x - offset, cur = traj[i].x - offset;
    if (prev < 0.0 && cur >= 0.0) {
      const double frac = prev / (prev - cur);
      crossings.push_back(traj[i - 1].t + frac * (traj[i].t - traj[i - 1].t));
    }
  }
  if (crossings.size() < 2) throw NumericError("measured_period: fewer than two upward crossings");
  return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

// Residual of the sinusoidal positional encoding pair (sin(wt), cos(wt)) with
// w = 1/10000^(2i/d_model) against the oscillator with a = c = w, b = d = 0.
struct PeResidualReport {
  int d_model = 0;
  int pair = 0;
  double omega = 0.0;
  OscillatorParams params;
  double fd_step = 0.0;
  double t_max = 0.0;
  int grid_points = 0;
  double max_residual = 0.0;
};

enum class PePairing { sin_cos, cos_cos };

inline PeResidualReport verify_sinusoidal_pe_is_solution(int d_model, int pair, double fd_step = 1e-4,
                                                         int grid_points = 2001,
                                                         PePairing pairing = PePairing::sin_cos) {
  if (d_model <= 0 || d_model % 2 != 0) throw ParameterError("d_model must be a positive even integer");
  if (pair < 0 || pair >= d_model / 2) throw ParameterError("PE pair index out of range");
  PeResidualReport r;
  r.d_model = d_model;
  r.pair = pair;
  r.omega = 1.0 / std::pow(10000.0, 2.0 * pair / static_cast<double>(d_model));
  r.params = {r.omega, 0.0, r.omega, 0.0};
  r.fd_step = fd_step;
  // One full period of the pair.
  r.t_max = 2.0 * std::numbers::pi / r.omega;
  r.grid_points = grid_points;
  const double w = r.omega;
  auto x = [&](double t) { return pairing == PePairing::sin_cos ? std::sin(w * t) : std::cos(w * t); };
  auto y = [&](double t) { return std::cos(w * t); };
  for (int g = 0; g < grid_points; ++g) {
    const double t = r.t_max * g / (grid_points - 1);
    const double dx = (x(t + fd_step) - x(t - fd_step)) / (2.0 * fd_step);
    const double dy = (y(t + fd_step) - y(t - fd_step)) / (2.0 * fd_step);
    const auto rhs = derivative(r.params, {x(t), y(t)});
    r.max_residual = std::max({r.max_residual, std::abs(dx - rhs.x), std::abs(dy - rhs.y)});
  }
  return r;
}

}  // namespace cpgpe

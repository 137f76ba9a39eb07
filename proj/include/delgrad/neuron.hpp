#pragma once
#include <cassert>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "delgrad/math.hpp"

// Leaky integrate-and-fire neuron with exponential synaptic current, solved
// in closed form for the two supported time-constant ratios:
//   equal:  tau_m == tau_s      (membrane kernel (dt/tau_s) exp(-dt/tau_s))
//   twice:  tau_m == 2 * tau_s  (kernel exp(-dt/tau_m) - exp(-dt/tau_s))
// Spike times and their exact derivatives w.r.t. input weights and times are
// obtained from the crossing equations, no integration involved.

namespace delgrad {

constexpr double kNoSpike = std::numeric_limits<double>::infinity();

enum class TauRatio { equal, twice };

struct NeuronConfig {
  double tau_s = 1.0;
  TauRatio ratio = TauRatio::twice;
  double g_leak = 0.5;
  double threshold = 1.0;
  double v_reset = 0.0;
  double tau_ref = kNoSpike;  // infinite refractory period: at most one spike

  double tau_m() const { return ratio == TauRatio::equal ? tau_s : 2.0 * tau_s; }
};

// Exponential sums over a causal input set. With x(t) = exp(-t/(2 tau_s)) the
// twice-ratio membrane is g_leak * u = a2 x - a1 x^2; the equal-ratio membrane
// is g_leak * u = exp(-t/tau_s) * ((t/tau_s) a1 - b).
struct Coefficients {
  double a1 = 0.0;  // sum w_i exp(t_i / tau_s)
  double a2 = 0.0;  // sum w_i exp(t_i / (2 tau_s))
  double b = 0.0;   // sum w_i (t_i / tau_s) exp(t_i / tau_s)
};

inline Coefficients coefficients(const std::vector<double>& times,
                                 const std::vector<double>& weights,
                                 int causal_count, const NeuronConfig& cfg)
{
  assert(causal_count <= static_cast<int>(times.size()));
  Coefficients c;
  for (int i = 0; i < causal_count; ++i) {
    const double e1 = std::exp(times[i] / cfg.tau_s);
    c.a1 += weights[i] * e1;
    c.a2 += weights[i] * std::exp(times[i] / (2.0 * cfg.tau_s));
    c.b += weights[i] * (times[i] / cfg.tau_s) * e1;
  }
  return c;
}

// Threshold crossing for tau_m == 2 tau_s: the first root in time of
// a1 x^2 - a2 x + g_leak * threshold = 0, x = exp(-T/(2 tau_s)).
// A discriminant in (-1e-12, 0) counts as tangency and is clamped to zero.
inline std::optional<double> spike_time_double_tau(double a1, double a2,
                                                   const NeuronConfig& cfg)
{
  if (a1 <= 0.0) return std::nullopt;
  const double c = cfg.g_leak * cfg.threshold;
  double disc = a2 * a2 - 4.0 * a1 * c;
  if (disc < 0.0) {
    if (disc <= -1e-12) return std::nullopt;
    disc = 0.0;
  }
  const double x = (a2 + std::sqrt(disc)) / (2.0 * a1);
  if (x <= 0.0) return std::nullopt;
  return -2.0 * cfg.tau_s * std::log(x);
}

// Threshold crossing for tau_m == tau_s:
// T = tau_s * (b/a1 - W0(-(g_leak*threshold/a1) * exp(b/a1))).
// An argument below -1/e means the membrane peak stays under threshold.
inline std::optional<double> spike_time_equal_tau(double a1, double b,
                                                  const NeuronConfig& cfg)
{
  if (a1 <= 0.0) return std::nullopt;
  const double r = b / a1;
  double z = -(cfg.g_leak * cfg.threshold / a1) * std::exp(r);
  constexpr double e_inv = 1.0 / std::numbers::e;
  if (z < -e_inv) {
    if (z <= -e_inv - 1e-12) return std::nullopt;
    z = -e_inv;
  }
  return cfg.tau_s * (r - lambert_w0(z));
}

// First threshold crossing plus exact local derivatives. The causal set C
// holds exactly the inputs with t_i < T; an input arriving exactly at T is
// excluded. dt_dw/dt_dt are aligned with `causal` and vanish outside C.
struct SpikeResult {
  double time = kNoSpike;
  std::vector<int> causal;
  std::vector<double> dt_dw;
  std::vector<double> dt_dt;

  bool fired() const { return time != kNoSpike; }
};

namespace detail {

// Derivatives of the crossing time w.r.t. the exponential sums.
// twice: dT/da1 = 2 tau_s x / D, dT/da2 = -2 tau_s / D with
//        D = sqrt(a2^2 - 4 a1 g_leak threshold), x = exp(-T/(2 tau_s)).
// equal: dT/db = tau_s / (a1 (1+W)),
//        dT/da1 = tau_s (-b/a1^2 + W (1 + b/a1) / (a1 (1+W))),
//        with W the Lambert value at the solution.
// Both diverge at tangency (D -> 0, W -> -1); that is a property of the
// spike time itself, not of this formulation.
struct CrossingGrads {
  double da1 = 0.0, da2 = 0.0, db = 0.0;
};

inline CrossingGrads crossing_grads_double_tau(double a1, double a2, double T,
                                               const NeuronConfig& cfg)
{
  CrossingGrads g;
  const double disc =
      std::max(a2 * a2 - 4.0 * a1 * cfg.g_leak * cfg.threshold, 0.0);
  const double d = std::sqrt(disc);
  const double x = std::exp(-T / (2.0 * cfg.tau_s));
  g.da1 = 2.0 * cfg.tau_s * x / d;
  g.da2 = -2.0 * cfg.tau_s / d;
  return g;
}

inline CrossingGrads crossing_grads_equal_tau(double a1, double b, double T,
                                              const NeuronConfig& cfg)
{
  CrossingGrads g;
  const double r = b / a1;
  const double w = r - T / cfg.tau_s;  // Lambert value, recovered from T
  g.db = cfg.tau_s / (a1 * (1.0 + w));
  g.da1 = cfg.tau_s * (-b / (a1 * a1) + w * (1.0 + r) / (a1 * (1.0 + w)));
  return g;
}

}  // namespace detail

// Scans causal-set prefixes of the (time-sorted) inputs and accepts the first
// candidate T with t_k < T <= t_{k+1}. Inputs must be finite and ascending.
inline SpikeResult first_spike(const std::vector<double>& times,
                               const std::vector<double>& weights,
                               const NeuronConfig& cfg)
{
  const int n = static_cast<int>(times.size());
  assert(weights.size() == times.size());
  SpikeResult out;
  const double ts = cfg.tau_s;
  const bool twice = cfg.ratio == TauRatio::twice;

  double a1 = 0.0, a2 = 0.0, b = 0.0;
  int causal_count = 0;
  for (int k = 0; k < n; ++k) {
    assert(k == 0 || times[k] >= times[k - 1]);
    const double e1 = std::exp(times[k] / ts);
    a1 += weights[k] * e1;
    if (twice)
      a2 += weights[k] * std::exp(times[k] / (2.0 * ts));
    else
      b += weights[k] * (times[k] / ts) * e1;
    const double next = (k + 1 < n) ? times[k + 1] : kNoSpike;
    if (next == times[k]) continue;  // finish the tie group before solving
    const std::optional<double> cand =
        twice ? spike_time_double_tau(a1, a2, cfg)
              : spike_time_equal_tau(a1, b, cfg);
    if (cand && *cand > times[k] && *cand <= next) {
      out.time = *cand;
      causal_count = k + 1;
      break;
    }
  }
  if (!out.fired()) return out;

  const detail::CrossingGrads cg =
      twice ? detail::crossing_grads_double_tau(a1, a2, out.time, cfg)
            : detail::crossing_grads_equal_tau(a1, b, out.time, cfg);
  out.causal.reserve(causal_count);
  out.dt_dw.reserve(causal_count);
  out.dt_dt.reserve(causal_count);
  for (int i = 0; i < causal_count; ++i) {
    const double e1 = std::exp(times[i] / ts);
    double dw, dt;
    if (twice) {
      const double e2 = std::exp(times[i] / (2.0 * ts));
      dw = cg.da1 * e1 + cg.da2 * e2;
      dt = cg.da1 * (weights[i] / ts) * e1 +
           cg.da2 * (weights[i] / (2.0 * ts)) * e2;
    } else {
      dw = cg.da1 * e1 + cg.db * (times[i] / ts) * e1;
      dt = cg.da1 * (weights[i] / ts) * e1 +
           cg.db * (weights[i] / ts) * (1.0 + times[i] / ts) * e1;
    }
    out.causal.push_back(i);
    out.dt_dw.push_back(dw);
    out.dt_dt.push_back(dt);
  }
  return out;
}

// Free membrane potential (no reset) at time t.
inline double membrane_voltage(const std::vector<double>& times,
                               const std::vector<double>& weights, double t,
                               const NeuronConfig& cfg)
{
  double u = 0.0;
  const double ts = cfg.tau_s;
  for (size_t i = 0; i < times.size(); ++i) {
    const double dt = t - times[i];
    if (dt <= 0.0) continue;
    if (cfg.ratio == TauRatio::equal)
      u += (weights[i] / cfg.g_leak) * (dt / ts) * std::exp(-dt / ts);
    else
      u += (weights[i] / cfg.g_leak) *
           (std::exp(-dt / (2.0 * ts)) - std::exp(-dt / ts));
  }
  return u;
}

}  // namespace delgrad

#pragma once
#include <algorithm>
#include <cassert>
#include <cmath>
#include <optional>
#include <vector>

#include "delgrad/neuron.hpp"

// Closed-form continuation of the neuron dynamics past a reset. After a spike
// at T the membrane is clamped to v_reset for tau_ref while the synaptic
// current keeps integrating arrivals; from the release time t0 = T + tau_ref
// onward the dynamics restart from (u0 = v_reset, i0 = residual current).
// Folding (t0, u0, i0) into shifted exponential sums reduces the next
// crossing to the same solvers used for the first spike.

namespace delgrad {

// Synaptic current just before t: sum over t_i < t of w_i exp(-(t-t_i)/tau_s).
inline double residual_current(const std::vector<double>& times,
                               const std::vector<double>& weights, double t,
                               const NeuronConfig& cfg)
{
  double i0 = 0.0;
  for (size_t k = 0; k < times.size() && times[k] < t; ++k)
    i0 += weights[k] * std::exp(-(t - times[k]) / cfg.tau_s);
  return i0;
}

// Crossing after a restart, with derivatives. Inputs strictly before t0 act
// only through i0; the window holds inputs with t0 <= t_i < T.
struct WindowSpike {
  double time = kNoSpike;
  int window_begin = 0;          // first input index inside the window
  std::vector<int> causal;       // input indices, window_begin <= idx
  std::vector<double> dt_dw;
  std::vector<double> dt_dt;
  double dt_di0 = 0.0;           // residual current held at t0
  double dt_dt0 = 0.0;           // restart time, i0 held fixed

  bool fired() const { return time != kNoSpike; }
};

// Shifted sums: restarting from (t0, u0, i0) is equivalent to first-spike
// coefficients
//   twice: a1' = a1 + i0 e^{t0/ts},  a2' = a2 + (i0 + g_leak u0) e^{t0/(2 ts)}
//   equal: a1' = a1 + i0 e^{t0/ts},  b'  = b + (i0 t0/ts - g_leak u0) e^{t0/ts}
// over the window inputs alone.
inline WindowSpike next_spike(const std::vector<double>& times,
                              const std::vector<double>& weights, double t0,
                              double u0, double i0, const NeuronConfig& cfg)
{
  const int n = static_cast<int>(times.size());
  WindowSpike out;
  const double ts = cfg.tau_s;
  const bool twice = cfg.ratio == TauRatio::twice;

  int first = 0;
  while (first < n && times[first] < t0) ++first;
  out.window_begin = first;

  const double e1_0 = std::exp(t0 / ts);
  const double e2_0 = std::exp(t0 / (2.0 * ts));
  const double res_a1 = i0 * e1_0;
  const double res_a2 = (i0 + cfg.g_leak * u0) * e2_0;
  const double res_b = (i0 * (t0 / ts) - cfg.g_leak * u0) * e1_0;

  double a1 = res_a1, a2 = res_a2, b = res_b;
  int causal_end = first;
  // k == first-1 probes the residual-only window before any further input.
  for (int k = first - 1; k < n; ++k) {
    if (k >= first) {
      assert(k == first || times[k] >= times[k - 1]);
      const double e1 = std::exp(times[k] / ts);
      a1 += weights[k] * e1;
      if (twice)
        a2 += weights[k] * std::exp(times[k] / (2.0 * ts));
      else
        b += weights[k] * (times[k] / ts) * e1;
    }
    const double lo = (k >= first) ? times[k] : t0;
    const double next = (k + 1 < n) ? times[k + 1] : kNoSpike;
    if (next == lo) continue;
    const std::optional<double> cand =
        twice ? spike_time_double_tau(a1, a2, cfg)
              : spike_time_equal_tau(a1, b, cfg);
    if (cand && *cand > lo && *cand <= next) {
      out.time = *cand;
      causal_end = k + 1;
      break;
    }
  }
  if (!out.fired()) return out;

  const detail::CrossingGrads cg =
      twice ? detail::crossing_grads_double_tau(a1, a2, out.time, cfg)
            : detail::crossing_grads_equal_tau(a1, b, out.time, cfg);
  for (int i = first; i < causal_end; ++i) {
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
  if (twice) {
    out.dt_di0 = cg.da1 * e1_0 + cg.da2 * e2_0;
    out.dt_dt0 = cg.da1 * (i0 / ts) * e1_0 +
                 cg.da2 * ((i0 + cfg.g_leak * u0) / (2.0 * ts)) * e2_0;
  } else {
    out.dt_di0 = cg.da1 * e1_0 + cg.db * (t0 / ts) * e1_0;
    out.dt_dt0 = cg.da1 * (i0 / ts) * e1_0 +
                 cg.db * (e1_0 / ts) *
                     (i0 * (1.0 + t0 / ts) - cfg.g_leak * u0);
  }
  return out;
}

// Full spike train with reset/refractory, plus total derivatives of every
// spike time w.r.t. every input weight and time (dense, chained through the
// restart state). Requires a finite tau_ref for more than one spike.
struct SpikeTrain {
  std::vector<double> times;
  std::vector<std::vector<double>> dt_dw;  // [spike][input]
  std::vector<std::vector<double>> dt_dt;  // [spike][input]
  bool truncated = false;
};

inline SpikeTrain spike_train(const std::vector<double>& times,
                              const std::vector<double>& weights,
                              const NeuronConfig& cfg, int max_spikes = 16)
{
  const int n = static_cast<int>(times.size());
  SpikeTrain out;

  const SpikeResult head = first_spike(times, weights, cfg);
  if (!head.fired()) return out;
  std::vector<double> dw(n, 0.0), dt(n, 0.0);
  for (size_t c = 0; c < head.causal.size(); ++c) {
    dw[head.causal[c]] = head.dt_dw[c];
    dt[head.causal[c]] = head.dt_dt[c];
  }
  out.times.push_back(head.time);
  out.dt_dw.push_back(dw);
  out.dt_dt.push_back(dt);

  if (cfg.tau_ref == kNoSpike) return out;

  while (static_cast<int>(out.times.size()) < max_spikes) {
    const double t0 = out.times.back() + cfg.tau_ref;
    const double i0 = residual_current(times, weights, t0, cfg);
    const WindowSpike ws =
        next_spike(times, weights, t0, cfg.v_reset, i0, cfg);
    if (!ws.fired()) return out;

    // d t0/dX = d T_prev/dX; d i0/dX adds the explicit pre-window terms and
    // the decay -i0/ts carried by t0.
    const std::vector<double>& pw = out.dt_dw.back();
    const std::vector<double>& pt = out.dt_dt.back();
    const double chain = ws.dt_dt0 + ws.dt_di0 * (-i0 / cfg.tau_s);
    std::vector<double> cw(n, 0.0), ct(n, 0.0);
    for (int j = 0; j < n; ++j) {
      cw[j] = chain * pw[j];
      ct[j] = chain * pt[j];
      if (times[j] < t0) {
        const double decay = std::exp(-(t0 - times[j]) / cfg.tau_s);
        cw[j] += ws.dt_di0 * decay;
        ct[j] += ws.dt_di0 * (weights[j] / cfg.tau_s) * decay;
      }
    }
    for (size_t c = 0; c < ws.causal.size(); ++c) {
      cw[ws.causal[c]] += ws.dt_dw[c];
      ct[ws.causal[c]] += ws.dt_dt[c];
    }
    out.times.push_back(ws.time);
    out.dt_dw.push_back(std::move(cw));
    out.dt_dt.push_back(std::move(ct));
  }
  out.truncated =
      next_spike(times, weights, out.times.back() + cfg.tau_ref, cfg.v_reset,
                 residual_current(times, weights,
                                  out.times.back() + cfg.tau_ref, cfg),
                 cfg)
          .fired();
  return out;
}

}  // namespace delgrad

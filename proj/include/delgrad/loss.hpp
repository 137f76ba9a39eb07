#pragma once
#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

#include "delgrad/neuron.hpp"

namespace delgrad {

struct LossConfig {
  double delta_t = 0.2;      // target separation of wrong-class spike times
  double a_scale = 1.0;      // softmax scale for the max-over-time loss
  double silent_time = 3.0;  // surrogate spike time for silent label neurons
  double horizon = -1.0;     // membrane search end; < 0: last input + 3 tau_m
};

struct LossGrad {
  double loss = 0.0;
  std::vector<double> d_times;  // d loss / d output spike time
};

// L = 1/2 sum_{n != label} ((t_n - t_label) - delta_t)^2. Silent entries are
// read as silent_time; their gradient entries are reported but die in the
// backward pass (a constant surrogate has no parents).
inline LossGrad delta_mse(const std::vector<double>& out_times, int label,
                          const LossConfig& lc)
{
  const int n = static_cast<int>(out_times.size());
  assert(label >= 0 && label < n);
  LossGrad r;
  r.d_times.assign(n, 0.0);
  const double t_label =
      out_times[label] == kNoSpike ? lc.silent_time : out_times[label];
  for (int k = 0; k < n; ++k) {
    if (k == label) continue;
    const double t_k = out_times[k] == kNoSpike ? lc.silent_time : out_times[k];
    const double d = (t_k - t_label) - lc.delta_t;
    r.loss += 0.5 * d * d;
    r.d_times[k] = d;
    r.d_times[label] -= d;
  }
  return r;
}

// Earliest output spike wins; silent counts as +inf; ties (including the
// all-silent case) resolve to the lowest index.
inline int ttfs_decode(const std::vector<double>& out_times)
{
  int best = 0;
  for (int k = 1; k < static_cast<int>(out_times.size()); ++k)
    if (out_times[k] < out_times[best]) best = k;
  return best;
}

// ---------------------------------------------------------------------------
// Max-over-time membrane loss. Label neurons never spike; the read-out is the
// maximum of the free membrane over [0, horizon], fed through a softmax.
// The maximum sits either at an interior critical point (du/dt = 0), at a
// kink where an input arrives (typically capped by an inhibitory arrival), or
// at a domain boundary. Only the kink case propagates a du/dt != 0 term into
// the capping input's time.

struct VmaxNeuron {
  double u_max = 0.0;
  double t_max = 0.0;
  bool capped = false;     // max at an input arrival
  int cap_index = -1;      // which input caps it
  bool degenerate = false; // two distinct maxima within 1e-9
  double second_gap = std::numeric_limits<double>::infinity();
  // ^ margin to the best distinct-time runner-up; small values flag
  //   near-ties where the max location is about to switch branches
  std::vector<double> du_dw;  // d u_max / d input weight
  std::vector<double> du_dt;  // d u_max / d input time
};

// Inputs must be sorted ascending and finite.
inline VmaxNeuron vmax_membrane(const std::vector<double>& times,
                                const std::vector<double>& weights,
                                const NeuronConfig& cfg, double horizon)
{
  const int n = static_cast<int>(times.size());
  VmaxNeuron out;
  out.du_dw.assign(n, 0.0);
  out.du_dt.assign(n, 0.0);
  if (n == 0) return out;

  const double ts = cfg.tau_s;
  const bool twice = cfg.ratio == TauRatio::twice;
  if (horizon < 0.0) horizon = times[n - 1] + 3.0 * cfg.tau_m();

  struct Candidate {
    double t, u;
    int prefix;    // inputs in scope
    int kink = -1; // input index when the candidate is an arrival time
  };
  std::vector<Candidate> cands;
  // left boundary: membrane is zero until the first arrival
  cands.push_back({std::min(0.0, times[0]), 0.0, 0, -1});

  double a1 = 0.0, a2 = 0.0, b = 0.0;
  auto u_at = [&](double t) {
    if (twice) {
      const double x = std::exp(-t / (2.0 * ts));
      return (a2 * x - a1 * x * x) / cfg.g_leak;
    }
    const double x = std::exp(-t / ts);
    return x * ((t / ts) * a1 - b) / cfg.g_leak;
  };

  for (int k = 0; k < n && times[k] < horizon; ++k) {
    const double e1 = std::exp(times[k] / ts);
    a1 += weights[k] * e1;
    if (twice)
      a2 += weights[k] * std::exp(times[k] / (2.0 * ts));
    else
      b += weights[k] * (times[k] / ts) * e1;
    const double lo = times[k];
    const double hi =
        (k + 1 < n) ? std::min(times[k + 1], horizon) : horizon;
    if (hi <= lo) continue;
    // interior critical point of the prefix membrane
    if (twice) {
      if (a1 != 0.0 && a2 / (2.0 * a1) > 0.0) {
        const double tc = -2.0 * ts * std::log(a2 / (2.0 * a1));
        if (tc > lo && tc < hi) cands.push_back({tc, u_at(tc), k + 1, -1});
      }
    } else {
      if (a1 != 0.0) {
        const double tc = ts * (1.0 + b / a1);
        if (tc > lo && tc < hi) cands.push_back({tc, u_at(tc), k + 1, -1});
      }
    }
    // right edge: next arrival (kink) or the horizon
    const bool at_kink = (k + 1 < n) && times[k + 1] <= horizon;
    cands.push_back({hi, u_at(hi), k + 1, at_kink ? k + 1 : -1});
  }

  int best = 0;
  for (size_t c = 1; c < cands.size(); ++c)
    if (cands[c].u > cands[best].u) best = c;
  for (size_t c = 0; c < cands.size(); ++c) {
    if (static_cast<int>(c) == best ||
        std::fabs(cands[c].t - cands[best].t) <= 1e-9)
      continue;
    if (std::fabs(cands[c].u - cands[best].u) <= 1e-9) out.degenerate = true;
    out.second_gap = std::min(out.second_gap, cands[best].u - cands[c].u);
  }

  const Candidate& m = cands[best];
  out.u_max = m.u;
  out.t_max = m.t;
  out.capped = m.kink >= 0;
  out.cap_index = m.kink;
  if (m.prefix == 0) return out;  // baseline max, all grads zero

  // partial derivatives at fixed t_max over the prefix inputs
  for (int i = 0; i < m.prefix; ++i) {
    const double dt = m.t - times[i];
    if (dt <= 0.0) continue;
    if (twice) {
      const double em = std::exp(-dt / (2.0 * ts));
      const double es = std::exp(-dt / ts);
      out.du_dw[i] = (em - es) / cfg.g_leak;
      out.du_dt[i] =
          (weights[i] / cfg.g_leak) * (em / (2.0 * ts) - es / ts);
    } else {
      const double es = std::exp(-dt / ts);
      out.du_dw[i] = (dt / ts) * es / cfg.g_leak;
      out.du_dt[i] = (weights[i] / cfg.g_leak) * (dt - ts) / (ts * ts) * es;
    }
  }
  // kink case: moving the capping arrival moves the cut-off point, picking up
  // the (nonzero) left slope of the membrane there
  if (out.capped) {
    double a1p = 0.0, a2p = 0.0, bp = 0.0;
    for (int i = 0; i < m.kink; ++i) {
      const double e1 = std::exp(times[i] / ts);
      a1p += weights[i] * e1;
      if (twice)
        a2p += weights[i] * std::exp(times[i] / (2.0 * ts));
      else
        bp += weights[i] * (times[i] / ts) * e1;
    }
    double slope;
    if (twice) {
      const double x = std::exp(-m.t / (2.0 * ts));
      slope = -(x / (2.0 * ts * cfg.g_leak)) * (a2p - 2.0 * a1p * x);
    } else {
      const double x = std::exp(-m.t / ts);
      slope = (x / (cfg.g_leak * ts)) * (a1p - ((m.t / ts) * a1p - bp));
    }
    out.du_dt[m.kink] += slope;
  }
  return out;
}

struct VmaxLoss {
  double loss = 0.0;
  bool degenerate = false;
  std::vector<double> u_max;
  std::vector<double> d_u;  // d loss / d u_max, per neuron
  std::vector<VmaxNeuron> neurons;
};

// Softmax cross-entropy over per-neuron membrane maxima. Each entry of `ins`
// is one label neuron's (sorted) effective input times and weights.
inline VmaxLoss vmax_loss(const std::vector<std::vector<double>>& in_times,
                          const std::vector<std::vector<double>>& in_weights,
                          int label, const LossConfig& lc,
                          const NeuronConfig& cfg)
{
  const int n = static_cast<int>(in_times.size());
  assert(label >= 0 && label < n);
  VmaxLoss out;
  out.u_max.resize(n);
  out.d_u.assign(n, 0.0);
  out.neurons.resize(n);
  for (int k = 0; k < n; ++k) {
    out.neurons[k] = vmax_membrane(in_times[k], in_weights[k], cfg, lc.horizon);
    out.u_max[k] = out.neurons[k].u_max;
    out.degenerate |= out.neurons[k].degenerate;
  }
  double mx = out.u_max[0];
  for (int k = 1; k < n; ++k) mx = std::max(mx, out.u_max[k]);
  double z = 0.0;
  std::vector<double> p(n);
  for (int k = 0; k < n; ++k) {
    p[k] = std::exp(lc.a_scale * (out.u_max[k] - mx));
    z += p[k];
  }
  for (int k = 0; k < n; ++k) p[k] /= z;
  out.loss = -std::log(p[label]);
  for (int k = 0; k < n; ++k)
    out.d_u[k] = lc.a_scale * (p[k] - (k == label ? 1.0 : 0.0));
  return out;
}

}  // namespace delgrad

#pragma once
#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "delgrad/layers.hpp"
#include "delgrad/rng.hpp"

// Hardware-aware noise pipeline layered over the ideal engine: weight
// quantization with a straight-through gradient, static per-neuron threshold
// offsets (fixed-pattern), per-batch threshold offsets (trial-to-trial),
// forward-only delay jitter, and input channel multiplexing. Plus the
// calibration math of a single-input "parrot" neuron whose firing latency
// realizes a configurable delay.

namespace delgrad {

struct NoiseModel {
  bool quantize = false;
  double quant_max = 2.1;
  double quant_step = 1.0 / 30.0;
  bool fixed_pattern = false;
  double fp_mean = 0.13;  // threshold offset, in units of the threshold
  double fp_std = 0.08;
  bool trial_to_trial = false;
  double t2t_std = 0.04;
  bool delay_jitter = false;
  double jitter_std = 0.01;  // in units of tau_s
  int multiplex = 1;

  bool any_threshold_noise() const { return fixed_pattern || trial_to_trial; }
  bool any() const
  {
    return quantize || fixed_pattern || trial_to_trial || delay_jitter;
  }
};

// Clamp to [-quant_max, quant_max], round to the nearest multiple of
// quant_step. Training runs on the quantized forward; the gradient passes
// straight through inside the clamp range and is zeroed outside.
inline double quantize_weight(double w, const NoiseModel& m)
{
  const double c = std::clamp(w, -m.quant_max, m.quant_max);
  return m.quant_step * std::round(c / m.quant_step);
}

inline std::vector<std::vector<double>> quantize_network(const Network& net,
                                                         const NoiseModel& m)
{
  std::vector<std::vector<double>> q(net.stages.size());
  for (size_t s = 0; s < net.stages.size(); ++s) {
    q[s] = net.stages[s].neurons.weights;
    for (double& w : q[s]) w = quantize_weight(w, m);
  }
  return q;
}

// Static threshold multipliers, drawn once per run: 1 + N(fp_mean, fp_std).
inline std::vector<std::vector<double>> fixed_pattern_offsets(
    const Network& net, uint64_t seed, const NoiseModel& m)
{
  std::vector<std::vector<double>> scale(net.stages.size());
  for (size_t s = 0; s < net.stages.size(); ++s) {
    Rng rng(seed, Stream::fixed_pattern, s);
    scale[s].resize(net.stages[s].neurons.n_post);
    for (double& v : scale[s])
      v = 1.0 + (m.fixed_pattern ? rng.normal(m.fp_mean, m.fp_std) : 0.0);
  }
  return scale;
}

// Per-batch threshold drift N(0, t2t_std), added onto the fixed pattern.
inline void apply_trial_to_trial(std::vector<std::vector<double>>& scale,
                                 const std::vector<std::vector<double>>& fp,
                                 uint64_t seed, uint64_t epoch, uint64_t batch,
                                 const NoiseModel& m)
{
  scale.resize(fp.size());
  for (size_t s = 0; s < fp.size(); ++s) {
    Rng rng(seed, Stream::trial_noise, s, epoch * 1000003ull + batch);
    scale[s].resize(fp[s].size());
    for (size_t j = 0; j < fp[s].size(); ++j)
      scale[s][j] =
          fp[s][j] + (m.trial_to_trial ? rng.normal(0.0, m.t2t_std) : 0.0);
  }
}

// Additive Gaussian on delay-element output spike times, one draw per element
// output: per pre channel (axonal), per connection (dendritic/synaptic).
// Forward only; the backward pass runs off the jittered tape, which is
// exactly differentiation at the nominal delay.
inline void draw_delay_jitter(std::vector<std::vector<double>>& jit,
                              const Network& net, uint64_t seed, uint64_t epoch,
                              uint64_t sample, const NoiseModel& m)
{
  jit.resize(net.stages.size());
  for (size_t s = 0; s < net.stages.size(); ++s) {
    const DelayLayer& dl = net.stages[s].delay;
    size_t n = 0;
    if (dl.kind == DelayKind::axonal)
      n = dl.n_pre;
    else if (dl.kind == DelayKind::dendritic || dl.kind == DelayKind::synaptic)
      n = static_cast<size_t>(dl.n_pre) * dl.n_post;
    jit[s].resize(n);
    if (n == 0) continue;
    Rng rng(seed, Stream::delay_jitter, s, epoch * 2000003ull + sample);
    for (double& v : jit[s])
      v = rng.normal(0.0, m.jitter_std * net.cfg.tau_s);
  }
}

// Input replication: each feature spikes on `multiplex` adjacent channels.
// Copies get independent weights downstream but share one delay parameter
// (DelayLayer group_size).
inline std::vector<double> multiplex_inputs(const std::vector<double>& enc,
                                            int multiplex)
{
  assert(multiplex >= 1);
  std::vector<double> out;
  out.reserve(enc.size() * multiplex);
  for (double t : enc)
    for (int c = 0; c < multiplex; ++c) out.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Parrot calibration: a single-input neuron tuned so its spike lags the input
// by exactly d.

struct ParrotConfig {
  double tau_s = 1.0;
  double tau_m = 2.0;
  double g_leak = 1.0;
  double threshold = 1.0;
};

// Latest realizable delay: the membrane kernel peaks at
// t = tau_m tau_s / (tau_m - tau_s) * log(tau_m / tau_s), or tau_s when the
// constants coincide.
inline double parrot_max_delay(const ParrotConfig& c)
{
  if (c.tau_m == c.tau_s) return c.tau_s;
  return c.tau_m * c.tau_s / (c.tau_m - c.tau_s) * std::log(c.tau_m / c.tau_s);
}

// Unique weight making the parrot fire d after a single input spike:
//   w = g_leak * threshold * (tau_m - tau_s) / tau_s
//       / (exp(-d/tau_m) - exp(-d/tau_s)),
// with the tau_m -> tau_s limit w = (g_leak * threshold * tau_s / d) e^{d/tau_s}.
inline double parrot_weight_of_delay(double d, const ParrotConfig& c)
{
  if (!(d > 0.0)) throw std::domain_error("parrot: delay must be positive");
  if (d > parrot_max_delay(c))
    throw std::domain_error("parrot: delay beyond the kernel peak");
  const double gt = c.g_leak * c.threshold;
  if (c.tau_m == c.tau_s)
    return gt * c.tau_s / d * std::exp(d / c.tau_s);
  return gt * (c.tau_m - c.tau_s) / c.tau_s /
         (std::exp(-d / c.tau_m) - std::exp(-d / c.tau_s));
}

// ---------------------------------------------------------------------------
// Exponential delay-vs-weight fit d(w) = alpha + beta * exp(gamma * (w +
// delta)). beta and delta are jointly unidentifiable (only beta * e^{gamma
// delta} enters the model), so the fit pins delta and recovers (alpha, beta,
// gamma) by profiling gamma over a closed-form inner least squares.

struct DelayCurveFit {
  double alpha = 0.0, beta = 0.0, gamma = 0.0, delta = 0.0;
  double residual = 0.0;  // root mean squared

  double eval(double w) const
  {
    return alpha + beta * std::exp(gamma * (w + delta));
  }
  // Inverse map, for calibration lookups.
  double weight_of_delay(double d) const
  {
    return std::log((d - alpha) / beta) / gamma - delta;
  }
};

inline DelayCurveFit fit_delay_curve(const std::vector<double>& weights,
                                     const std::vector<double>& delays,
                                     double delta = 0.0)
{
  const int n = static_cast<int>(weights.size());
  if (n < 4 || delays.size() != weights.size())
    throw std::invalid_argument("fit_delay_curve: need >= 4 samples");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (weights[i] == weights[j])
        throw std::invalid_argument("fit_delay_curve: weights must be distinct");
  double dmin = delays[0], dmax = delays[0];
  for (double d : delays) {
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
  }
  if (dmax - dmin < 1e-12)
    throw std::invalid_argument("fit_delay_curve: degenerate constant data");

  // The model is linear in (alpha, B) once gamma is fixed, so profile gamma:
  // solve the inner 2x2 least squares in closed form and minimize the
  // residual over gamma by coarse scan plus golden-section refinement.
  double wmax = std::fabs(weights[0] + delta);
  for (double w : weights) wmax = std::max(wmax, std::fabs(w + delta));
  struct Inner {
    double a, bb, cost;
  };
  auto inner = [&](double g) -> Inner {
    double s_e = 0, s_ee = 0, s_d = 0, s_ed = 0;
    for (int i = 0; i < n; ++i) {
      const double e = std::exp(g * (weights[i] + delta));
      s_e += e;
      s_ee += e * e;
      s_d += delays[i];
      s_ed += e * delays[i];
    }
    const double det = n * s_ee - s_e * s_e;
    if (det <= 0.0 || !std::isfinite(det))
      return {0.0, 0.0, std::numeric_limits<double>::infinity()};
    const double a = (s_ee * s_d - s_e * s_ed) / det;
    const double bb = (n * s_ed - s_e * s_d) / det;
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = a + bb * std::exp(g * (weights[i] + delta)) - delays[i];
      cost += r * r;
    }
    return {a, bb, cost};
  };

  // keep |gamma * (w + delta)| within exp range during the scan
  const double gcap = 600.0 / std::max(wmax, 1e-9);
  double best_g = 0.0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int sgn = -1; sgn <= 1; sgn += 2)
    for (double mag = 1e-4; mag <= 1e3 && mag < gcap; mag *= 1.2) {
      const double g = sgn * mag;
      const double c = inner(g).cost;
      if (c < best_cost) {
        best_cost = c;
        best_g = g;
      }
    }
  double lo = best_g > 0 ? best_g / 1.2 : best_g * 1.2;
  double hi = best_g > 0 ? best_g * 1.2 : best_g / 1.2;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = inner(x1).cost, f2 = inner(x2).cost;
  for (int it = 0; it < 200 && std::fabs(hi - lo) >
                                   1e-15 * std::max(1.0, std::fabs(lo));
       ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = inner(x1).cost;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = inner(x2).cost;
    }
  }
  const double g = 0.5 * (lo + hi);
  const Inner fin = inner(g);
  DelayCurveFit fit;
  fit.gamma = g;
  fit.alpha = fin.a;
  fit.beta = fin.bb;  // inner model already carries the pinned delta
  fit.delta = delta;
  fit.residual = std::sqrt(fin.cost / n);
  if (!std::isfinite(fit.residual))
    throw std::runtime_error("fit_delay_curve: no convergence, rms trace " +
                             std::to_string(fin.cost));
  return fit;
}

}  // namespace delgrad

#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "delgrad/hwmodel.hpp"
#include "delgrad/layers.hpp"
#include "delgrad/loss.hpp"
#include "delgrad/threadpool.hpp"
#include "delgrad/yinyang.hpp"

// Mini-batch training: Adam with separate learning rates for weights and
// delay parameters, stepped learning-rate decay, per-update weight clipping,
// and the silent-neuron weight bump. Batch samples may run in parallel; the
// gradient reduction is in fixed sample order, so results are bit-identical
// for a given seed at any thread count.

namespace delgrad {

struct EncodedDataset {
  std::vector<YinYangSample> samples;
  std::vector<std::array<double, 4>> times;

  int size() const { return static_cast<int>(samples.size()); }
};

inline EncodedDataset make_dataset(uint64_t seed, int n,
                                   const EncodingConfig& enc)
{
  EncodedDataset d;
  d.samples = yinyang_generate(seed, n);
  d.times.resize(n);
  for (int i = 0; i < n; ++i) d.times[i] = encode(d.samples[i], enc);
  return d;
}

struct DataSplits {
  EncodedDataset train, val, test;
};

// Disjoint generator seeds per split, derived from the run seed.
inline DataSplits make_splits(uint64_t seed, int n_train, int n_val,
                              int n_test, const EncodingConfig& enc)
{
  DataSplits s;
  s.train = make_dataset(splitmix64(seed ^ 0xA11ce5ull), n_train, enc);
  s.val = make_dataset(splitmix64(seed ^ 0xB0b5ull), n_val, enc);
  s.test = make_dataset(splitmix64(seed ^ 0xCa71ull), n_test, enc);
  return s;
}

struct TrainConfig {
  int epochs = 300;
  int batch_size = 150;
  double lr_weights = 0.005;
  double lr_delays = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int scheduler_step = 20;
  double scheduler_gamma = 0.95;
  double max_dw = 0.2;       // per-update weight change clip
  double bump_value = 0.0005;
  bool freeze_delays = false;
  LossConfig loss;
  NoiseModel noise;
  uint64_t seed = 42;
};

struct MetricsRow {
  int epoch = 0;
  double train_loss = 0.0;
  double train_err = 0.0;
  double val_err = 0.0;
  double lr_w = 0.0;
  double lr_d = 0.0;
};

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::vector<std::vector<double>> mw, vw, mth, vth;

  void init(const Network& net, const TrainConfig& tc)
  {
    beta1 = tc.beta1;
    beta2 = tc.beta2;
    eps = tc.adam_eps;
    t = 0;
    const size_t ns = net.stages.size();
    mw.resize(ns);
    vw.resize(ns);
    mth.resize(ns);
    vth.resize(ns);
    for (size_t s = 0; s < ns; ++s) {
      mw[s].assign(net.stages[s].neurons.weights.size(), 0.0);
      vw[s].assign(net.stages[s].neurons.weights.size(), 0.0);
      mth[s].assign(net.stages[s].delay.theta.size(), 0.0);
      vth[s].assign(net.stages[s].delay.theta.size(), 0.0);
    }
  }
};

// One optimizer step. Weight gradients pass straight through quantization
// inside the clamp range and are zeroed outside it; weight updates are
// clipped to |dw| <= max_dw after the Adam rescaling; delay parameters use
// their own learning rate and no clip.
inline void adam_step(Network& net, Adam& ad, const Gradients& g, double lr_w,
                      double lr_d, const TrainConfig& tc)
{
  ++ad.t;
  const double c1 = 1.0 - std::pow(ad.beta1, static_cast<double>(ad.t));
  const double c2 = 1.0 - std::pow(ad.beta2, static_cast<double>(ad.t));
  for (size_t s = 0; s < net.stages.size(); ++s) {
    std::vector<double>& w = net.stages[s].neurons.weights;
    for (size_t k = 0; k < w.size(); ++k) {
      double grad = g.w[s][k];
      if (tc.noise.quantize && std::fabs(w[k]) > tc.noise.quant_max)
        grad = 0.0;
      ad.mw[s][k] = ad.beta1 * ad.mw[s][k] + (1.0 - ad.beta1) * grad;
      ad.vw[s][k] = ad.beta2 * ad.vw[s][k] + (1.0 - ad.beta2) * grad * grad;
      const double step = lr_w * (ad.mw[s][k] / c1) /
                          (std::sqrt(ad.vw[s][k] / c2) + ad.eps);
      w[k] -= std::clamp(step, -tc.max_dw, tc.max_dw);
    }
    if (tc.freeze_delays) continue;
    std::vector<double>& th = net.stages[s].delay.theta;
    for (size_t k = 0; k < th.size(); ++k) {
      const double grad = g.theta[s][k];
      ad.mth[s][k] = ad.beta1 * ad.mth[s][k] + (1.0 - ad.beta1) * grad;
      ad.vth[s][k] = ad.beta2 * ad.vth[s][k] + (1.0 - ad.beta2) * grad * grad;
      th[k] -= lr_d * (ad.mth[s][k] / c1) /
               (std::sqrt(ad.vth[s][k] / c2) + ad.eps);
    }
  }
}

namespace detail {

enum class Phase : uint64_t { train = 0, val = 1, test = 2 };

inline uint64_t noise_ctx(Phase ph, uint64_t epoch, uint64_t k)
{
  return (static_cast<uint64_t>(ph) << 42) | (epoch << 21) | k;
}

inline void expand_input(const std::array<double, 4>& enc, int multiplex,
                         std::vector<double>& out)
{
  out.resize(4 * static_cast<size_t>(multiplex));
  size_t p = 0;
  for (double t : enc)
    for (int c = 0; c < multiplex; ++c) out[p++] = t;
}

}  // namespace detail

// Classification error (and optionally mean loss) under the configured noise
// sources. Threshold offsets redraw per batch; jitter per sample.
inline double evaluate(const Network& net, const EncodedDataset& data,
                       const TrainConfig& tc, detail::Phase phase,
                       uint64_t epoch, ThreadPool* pool,
                       double* mean_loss = nullptr)
{
  const NoiseModel& nm = tc.noise;
  const int n = data.size();
  const int bs = std::max(1, tc.batch_size);
  const int nb = (n + bs - 1) / bs;

  std::vector<std::vector<double>> qw;
  if (nm.quantize) qw = quantize_network(net, nm);
  std::vector<std::vector<double>> fp, scale;
  if (nm.any_threshold_noise()) fp = fixed_pattern_offsets(net, tc.seed, nm);

  std::vector<int> errs(n, 0);
  std::vector<double> losses(n, 0.0);
  for (int b = 0; b < nb; ++b) {
    const int lo = b * bs, hi = std::min(n, lo + bs), bn = hi - lo;
    if (nm.trial_to_trial)
      apply_trial_to_trial(scale, fp, tc.seed, 0,
                           detail::noise_ctx(phase, epoch, b), nm);
    else if (nm.fixed_pattern)
      scale = fp;
    auto work = [&](int k) {
      const int idx = lo + k;
      thread_local std::vector<double> input;
      thread_local std::vector<std::vector<double>> jit;
      thread_local Tape tape;
      detail::expand_input(data.times[idx], nm.multiplex, input);
      ForwardPerturb pert;
      if (nm.quantize) pert.weights = &qw;
      if (nm.any_threshold_noise()) pert.threshold_scale = &scale;
      if (nm.delay_jitter) {
        draw_delay_jitter(jit, net, tc.seed, 0,
                          detail::noise_ctx(phase, epoch, idx), nm);
        pert.jitter = &jit;
      }
      forward(net, input, tape, &pert);
      const std::vector<double> out = tape.out_times();
      errs[idx] = ttfs_decode(out) != data.samples[idx].label;
      if (mean_loss)
        losses[idx] = delta_mse(out, data.samples[idx].label, tc.loss).loss;
    };
    if (pool)
      pool->parallel_for(bn, work);
    else
      for (int k = 0; k < bn; ++k) work(k);
  }
  if (mean_loss)
    *mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
  return std::accumulate(errs.begin(), errs.end(), 0.0) / n;
}

struct TrainOutcome {
  Network net;
  Adam adam;
  std::vector<MetricsRow> log;
  int epochs_done = 0;
  bool aborted = false;
  std::string abort_note;
};

// Training from start_epoch (resume passes the loaded optimizer state and a
// nonzero start). All stochastic draws are keyed by absolute epoch, so a
// resumed run reproduces the uninterrupted one bit for bit.
inline TrainOutcome train(Network net, Adam adam, int start_epoch,
                          const DataSplits& data, const TrainConfig& tc,
                          ThreadPool* pool)
{
  TrainOutcome out;
  const NoiseModel& nm = tc.noise;
  const int n = data.train.size();
  const int bs = std::max(1, tc.batch_size);
  const int nb = (n + bs - 1) / bs;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Tape> tapes(bs);
  std::vector<Gradients> grads(bs);
  for (Gradients& g : grads) g.resize(net);
  std::vector<double> losses(bs, 0.0);
  std::vector<int> errs(bs, 0);
  Gradients total;
  total.resize(net);

  std::vector<std::vector<double>> fp, scale, qw;
  if (nm.any_threshold_noise()) fp = fixed_pattern_offsets(net, tc.seed, nm);
  std::vector<std::vector<int>> missing(net.stages.size());
  for (size_t s = 0; s < net.stages.size(); ++s)
    missing[s].assign(net.stages[s].neurons.n_post, 0);

  for (int epoch = start_epoch; epoch < tc.epochs; ++epoch) {
    const double decay =
        std::pow(tc.scheduler_gamma, epoch / std::max(1, tc.scheduler_step));
    const double lr_w = tc.lr_weights * decay;
    const double lr_d = tc.lr_delays * decay;

    // The permutation must be a pure function of (seed, epoch), never of the
    // preceding epochs, or resuming from a checkpoint would diverge.
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(tc.seed, Stream::shuffle, static_cast<uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_int(i + 1));
      std::swap(order[i], order[j]);
    }

    double epoch_loss = 0.0;
    int epoch_errs = 0;
    for (int b = 0; b < nb; ++b) {
      const int lo = b * bs, hi = std::min(n, lo + bs), bn = hi - lo;
      if (nm.quantize) qw = quantize_network(net, nm);
      if (nm.trial_to_trial)
        apply_trial_to_trial(
            scale, fp, tc.seed, 0,
            detail::noise_ctx(detail::Phase::train, epoch, b), nm);
      else if (nm.fixed_pattern)
        scale = fp;

      auto work = [&](int k) {
        const int idx = order[lo + k];
        thread_local std::vector<double> input;
        thread_local std::vector<std::vector<double>> jit;
        detail::expand_input(data.train.times[idx], nm.multiplex, input);
        ForwardPerturb pert;
        if (nm.quantize) pert.weights = &qw;
        if (nm.any_threshold_noise()) pert.threshold_scale = &scale;
        if (nm.delay_jitter) {
          draw_delay_jitter(
              jit, net, tc.seed, 0,
              detail::noise_ctx(detail::Phase::train, epoch, idx), nm);
          pert.jitter = &jit;
        }
        forward(net, input, tapes[k], &pert);
        const std::vector<double> oo = tapes[k].out_times();
        const int label = data.train.samples[idx].label;
        const LossGrad lg = delta_mse(oo, label, tc.loss);
        grads[k].clear();
        backward(net, tapes[k], lg.d_times, grads[k]);
        losses[k] = lg.loss;
        errs[k] = ttfs_decode(oo) != label;
      };
      if (pool)
        pool->parallel_for(bn, work);
      else
        for (int k = 0; k < bn; ++k) work(k);

      total.clear();
      for (int k = 0; k < bn; ++k) total.add(grads[k]);
      const double inv = 1.0 / bn;
      double batch_loss = 0.0;
      for (int k = 0; k < bn; ++k) {
        batch_loss += losses[k];
        epoch_errs += errs[k];
      }
      epoch_loss += batch_loss;
      bool finite = std::isfinite(batch_loss);
      for (size_t s = 0; s < total.w.size() && finite; ++s) {
        for (double& v : total.w[s]) {
          v *= inv;
          finite &= std::isfinite(v);
        }
        for (double& v : total.theta[s]) {
          v *= inv;
          finite &= std::isfinite(v);
        }
      }
      if (!finite) {
        out.net = std::move(net);
        out.adam = std::move(adam);
        out.aborted = true;
        out.abort_note = "non-finite loss or gradient at epoch " +
                         std::to_string(epoch) + " batch " + std::to_string(b);
        out.epochs_done = epoch;
        return out;
      }

      adam_step(net, adam, total, lr_w, lr_d, tc);

      // silent-neuron policy: when a layer misses too many (neuron, sample)
      // spikes in this batch, raise every afferent weight of each neuron
      // that went silent
      for (size_t s = 0; s < net.stages.size(); ++s) {
        std::vector<int>& miss = missing[s];
        std::fill(miss.begin(), miss.end(), 0);
        int layer_missing = 0;
        for (int k = 0; k < bn; ++k)
          for (size_t j = 0; j < tapes[k].stages[s].size(); ++j)
            if (tapes[k].stages[s][j].time == kNoSpike) {
              ++miss[j];
              ++layer_missing;
            }
        NeuronLayer& nl = net.stages[s].neurons;
        const double frac =
            static_cast<double>(layer_missing) / (nl.n_post * bn);
        if (frac > nl.max_silent_ratio && layer_missing > 0) {
          for (int j = 0; j < nl.n_post; ++j) {
            if (miss[j] == 0) continue;
            for (int i = 0; i < nl.n_pre; ++i)
              nl.weights[i * nl.n_post + j] += tc.bump_value;
          }
        }
      }
    }

    const double val_err =
        evaluate(net, data.val, tc, detail::Phase::val, epoch, pool);
    out.log.push_back({epoch, epoch_loss / n,
                       static_cast<double>(epoch_errs) / n, val_err, lr_w,
                       lr_d});
    out.epochs_done = epoch + 1;
  }
  out.net = std::move(net);
  out.adam = std::move(adam);
  return out;
}

// ---------------------------------------------------------------------------
// One self-contained experiment: build data and network from a seed, train,
// report the final test error. The unit cells of sweeps and ablations.

struct RunSpec {
  NeuronConfig ncfg;
  EncodingConfig enc;
  TrainConfig tc;
  std::vector<LayerSpec> layers;
  int n_features = 4;
  int n_train = 5000, n_val = 1000, n_test = 1000;
};

struct RunResult {
  double test_err = 1.0;
  double val_err = 1.0;
  double train_loss = 0.0;
  int param_count = 0;
  bool aborted = false;
  TrainOutcome outcome;
};

inline Network network_for(const RunSpec& rs)
{
  return build_network(rs.ncfg, rs.n_features * rs.tc.noise.multiplex,
                       rs.layers, rs.tc.seed, rs.tc.noise.multiplex);
}

inline RunResult run_experiment(const RunSpec& rs, ThreadPool* pool,
                                bool keep_outcome = false)
{
  RunResult r;
  const DataSplits data =
      make_splits(rs.tc.seed, rs.n_train, rs.n_val, rs.n_test, rs.enc);
  Network net = network_for(rs);
  r.param_count = net.param_count();
  Adam adam;
  adam.init(net, rs.tc);
  TrainOutcome out = train(std::move(net), std::move(adam), 0, data, rs.tc, pool);
  r.aborted = out.aborted;
  if (!out.log.empty()) {
    r.train_loss = out.log.back().train_loss;
    r.val_err = out.log.back().val_err;
  }
  if (!r.aborted)
    r.test_err = evaluate(out.net, data.test, rs.tc, detail::Phase::test,
                          static_cast<uint64_t>(rs.tc.epochs), pool);
  if (keep_outcome) r.outcome = std::move(out);
  return r;
}

}  // namespace delgrad

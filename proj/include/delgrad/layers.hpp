#pragma once
#include <cassert>
#include <cmath>
#include <numeric>
#include <vector>

#include "delgrad/math.hpp"
#include "delgrad/neuron.hpp"
#include "delgrad/rng.hpp"

// Feedforward stacks of alternating delay and neuron layers. A stage pairs
// one delay layer with the neuron layer it feeds; a network is a list of
// stages. Spikes are single (infinite refractory period); silent neurons
// carry kNoSpike and are absent from downstream causal sets.

namespace delgrad {

enum class DelayKind { none, axonal, dendritic, synaptic };

inline const char* to_string(DelayKind k)
{
  switch (k) {
    case DelayKind::none: return "broadcast";
    case DelayKind::axonal: return "axonal";
    case DelayKind::dendritic: return "dendritic";
    case DelayKind::synaptic: return "synaptic";
  }
  return "?";
}

// Trainable transmission delays, squashed into (shift, shift + lambda) by a
// logistic so they stay bounded: d = shift + lambda * logistic(theta).
// Channels in groups of group_size share one parameter (input multiplexing).
struct DelayLayer {
  DelayKind kind = DelayKind::none;
  int n_pre = 0;
  int n_post = 0;
  int group_size = 1;
  double lambda = 1.0;
  double shift = 0.0;
  std::vector<double> theta;

  int n_groups() const { return n_pre / group_size; }

  int param_count() const
  {
    switch (kind) {
      case DelayKind::none: return 0;
      case DelayKind::axonal: return n_groups();
      case DelayKind::dendritic: return n_post;
      case DelayKind::synaptic: return n_groups() * n_post;
    }
    return 0;
  }

  // Parameter owning connection (i, j); -1 when untrained (kind none).
  int theta_index(int i, int j) const
  {
    switch (kind) {
      case DelayKind::none: return -1;
      case DelayKind::axonal: return i / group_size;
      case DelayKind::dendritic: return j;
      case DelayKind::synaptic: return (i / group_size) * n_post + j;
    }
    return -1;
  }

  double delay(int i, int j) const
  {
    const int p = theta_index(i, j);
    return p < 0 ? 0.0 : shift + lambda * logistic(theta[p]);
  }
};

struct NeuronLayer {
  int n_pre = 0;
  int n_post = 0;
  std::vector<double> weights;  // row-major [pre][post]
  double max_silent_ratio = 0.0;  // silent-neuron bump trigger (training)

  double& w(int i, int j) { return weights[i * n_post + j]; }
  double w(int i, int j) const { return weights[i * n_post + j]; }
};

struct Network {
  NeuronConfig cfg;
  int n_in = 0;
  struct Stage {
    DelayLayer delay;
    NeuronLayer neurons;
  };
  std::vector<Stage> stages;

  int n_out() const { return stages.back().neurons.n_post; }

  int param_count() const
  {
    int n = 0;
    for (const Stage& s : stages)
      n += static_cast<int>(s.neurons.weights.size()) + s.delay.param_count();
    return n;
  }
};

// Per-forward perturbations (hardware model). All pointers optional; entries
// are indexed by stage. Jitter is additive on effective times, one draw per
// delay-element output spike: per pre channel for axonal (size n_pre), per
// connection for dendritic/synaptic (size n_pre * n_post), none for kind
// none. Threshold scale multiplies the layer threshold per post neuron.
struct ForwardPerturb {
  const std::vector<std::vector<double>>* weights = nullptr;
  const std::vector<std::vector<double>>* threshold_scale = nullptr;
  const std::vector<std::vector<double>>* jitter = nullptr;
};

// Everything backward needs: per stage, per post neuron, the spike and the
// causal pre indices with dT/dw and dT/dt_eff.
struct Tape {
  struct Post {
    double time = kNoSpike;
    std::vector<int> pre;
    std::vector<double> dt_dw;
    std::vector<double> dt_dt;
  };
  std::vector<std::vector<Post>> stages;
  std::vector<double> input;

  const std::vector<Post>& out() const { return stages.back(); }
  std::vector<double> out_times() const
  {
    std::vector<double> t(stages.back().size());
    for (size_t j = 0; j < t.size(); ++j) t[j] = stages.back()[j].time;
    return t;
  }
};

inline double jitter_at(const DelayLayer& dl, const std::vector<double>& jit,
                        int i, int j)
{
  if (jit.empty()) return 0.0;
  switch (dl.kind) {
    case DelayKind::none: return 0.0;
    case DelayKind::axonal: return jit[i];
    default: return jit[i * dl.n_post + j];
  }
}

// Effective input view of one post neuron: delayed pre spikes sorted by time.
// Used by forward and by the label-neuron loss, which reads membrane traces
// off the same wiring.
inline void gather_inputs(const Network::Stage& st,
                          const std::vector<double>& pre_times,
                          const std::vector<double>& weights_row_major, int j,
                          const std::vector<double>& jit,
                          std::vector<int>& pre_idx, std::vector<double>& t,
                          std::vector<double>& w)
{
  const int P = st.neurons.n_pre;
  const int Q = st.neurons.n_post;
  pre_idx.clear();
  t.clear();
  w.clear();
  for (int i = 0; i < P; ++i) {
    if (pre_times[i] == kNoSpike) continue;
    pre_idx.push_back(i);
    t.push_back(pre_times[i] + st.delay.delay(i, j) +
                jitter_at(st.delay, jit, i, j));
    w.push_back(weights_row_major[i * Q + j]);
  }
  // insertion sort by time; input lists are short and mostly sorted
  for (size_t a = 1; a < t.size(); ++a) {
    const double tt = t[a];
    const double ww = w[a];
    const int pp = pre_idx[a];
    size_t b = a;
    for (; b > 0 && t[b - 1] > tt; --b) {
      t[b] = t[b - 1];
      w[b] = w[b - 1];
      pre_idx[b] = pre_idx[b - 1];
    }
    t[b] = tt;
    w[b] = ww;
    pre_idx[b] = pp;
  }
}

inline void forward(const Network& net, const std::vector<double>& input,
                    Tape& tape, const ForwardPerturb* pert = nullptr)
{
  assert(static_cast<int>(input.size()) == net.n_in);
  tape.input = input;
  tape.stages.assign(net.stages.size(), {});
  static const std::vector<double> kEmpty;

  std::vector<double> pre = input;
  std::vector<int> pre_idx;
  std::vector<double> t, w;
  for (size_t s = 0; s < net.stages.size(); ++s) {
    const Network::Stage& st = net.stages[s];
    const std::vector<double>& wts =
        (pert && pert->weights) ? (*pert->weights)[s] : st.neurons.weights;
    const std::vector<double>& jit =
        (pert && pert->jitter) ? (*pert->jitter)[s] : kEmpty;
    std::vector<Tape::Post>& posts = tape.stages[s];
    posts.resize(st.neurons.n_post);

    std::vector<double> post_times(st.neurons.n_post, kNoSpike);
    for (int j = 0; j < st.neurons.n_post; ++j) {
      gather_inputs(st, pre, wts, j, jit, pre_idx, t, w);
      NeuronConfig cfg = net.cfg;
      if (pert && pert->threshold_scale)
        cfg.threshold *= (*pert->threshold_scale)[s][j];
      SpikeResult r = first_spike(t, w, cfg);
      Tape::Post& post = posts[j];
      post.time = r.time;
      post_times[j] = r.time;
      if (r.fired()) {
        post.pre.resize(r.causal.size());
        for (size_t c = 0; c < r.causal.size(); ++c)
          post.pre[c] = pre_idx[r.causal[c]];
        post.dt_dw = std::move(r.dt_dw);
        post.dt_dt = std::move(r.dt_dt);
      }
    }
    pre = std::move(post_times);
  }
}

// Gradient accumulator shaped like the network's parameters.
struct Gradients {
  std::vector<std::vector<double>> w;      // per stage, row-major
  std::vector<std::vector<double>> theta;  // per stage
  std::vector<double> input;               // d loss / d input spike time

  void resize(const Network& net)
  {
    w.resize(net.stages.size());
    theta.resize(net.stages.size());
    for (size_t s = 0; s < net.stages.size(); ++s) {
      w[s].assign(net.stages[s].neurons.weights.size(), 0.0);
      theta[s].assign(net.stages[s].delay.theta.size(), 0.0);
    }
    input.assign(net.n_in, 0.0);
  }

  void clear()
  {
    for (auto& v : w) std::fill(v.begin(), v.end(), 0.0);
    for (auto& v : theta) std::fill(v.begin(), v.end(), 0.0);
    std::fill(input.begin(), input.end(), 0.0);
  }

  void add(const Gradients& o)
  {
    for (size_t s = 0; s < w.size(); ++s) {
      for (size_t k = 0; k < w[s].size(); ++k) w[s][k] += o.w[s][k];
      for (size_t k = 0; k < theta[s].size(); ++k) theta[s][k] += o.theta[s][k];
    }
    for (size_t k = 0; k < input.size(); ++k) input[k] += o.input[k];
  }
};

// Exact reverse accumulation. d_out is d loss / d output spike time; entries
// for silent outputs are ignored (no spike, no path). Accumulates into grads,
// which must already be sized.
inline void backward(const Network& net, const Tape& tape,
                     const std::vector<double>& d_out, Gradients& grads,
                     int top_stage = -1)
{
  const int top =
      top_stage < 0 ? static_cast<int>(net.stages.size()) - 1 : top_stage;
  std::vector<double> cur = d_out;
  std::vector<double> next;
  for (int s = top; s >= 0; --s) {
    const Network::Stage& st = net.stages[s];
    const std::vector<Tape::Post>& posts = tape.stages[s];
    const int P = st.neurons.n_pre;
    const int Q = st.neurons.n_post;
    next.assign(P, 0.0);
    for (int j = 0; j < Q; ++j) {
      const double g = cur[j];
      const Tape::Post& post = posts[j];
      if (g == 0.0 || post.time == kNoSpike) continue;
      for (size_t c = 0; c < post.pre.size(); ++c) {
        const int i = post.pre[c];
        grads.w[s][i * Q + j] += g * post.dt_dw[c];
        const double gp = g * post.dt_dt[c];  // d loss / d effective time
        const int p = st.delay.theta_index(i, j);
        if (p >= 0)
          grads.theta[s][p] +=
              gp * st.delay.lambda * logistic_grad(st.delay.theta[p]);
        next[i] += gp;
      }
    }
    cur = next;
  }
  for (size_t k = 0; k < grads.input.size(); ++k) grads.input[k] += cur[k];
}

// Network construction with seeded Gaussian initialization.
struct LayerSpec {
  int size = 0;
  double weight_mean = 1.0;
  double weight_std = 1.0;
  double max_silent_ratio = 0.0;
  DelayKind delay = DelayKind::none;
  double delay_theta_std = 0.25;
  double lambda = 1.0;
  double shift = 0.0;
};

inline Network build_network(const NeuronConfig& cfg, int n_in,
                             const std::vector<LayerSpec>& layers,
                             uint64_t seed, int group_size = 1)
{
  Network net;
  net.cfg = cfg;
  net.n_in = n_in;
  int pre = n_in;
  for (size_t s = 0; s < layers.size(); ++s) {
    const LayerSpec& ls = layers[s];
    Network::Stage st;
    st.delay.kind = ls.delay;
    st.delay.n_pre = pre;
    st.delay.n_post = ls.size;
    st.delay.group_size = (s == 0) ? group_size : 1;
    st.delay.lambda = ls.lambda;
    st.delay.shift = ls.shift;
    st.delay.theta.resize(st.delay.param_count());
    Rng drng(seed, Stream::delay_init, s);
    for (double& th : st.delay.theta) th = drng.normal(0.0, ls.delay_theta_std);

    st.neurons.n_pre = pre;
    st.neurons.n_post = ls.size;
    st.neurons.max_silent_ratio = ls.max_silent_ratio;
    st.neurons.weights.resize(static_cast<size_t>(pre) * ls.size);
    Rng wrng(seed, Stream::weight_init, s);
    for (double& wv : st.neurons.weights)
      wv = wrng.normal(ls.weight_mean, ls.weight_std);

    net.stages.push_back(std::move(st));
    pre = ls.size;
  }
  return net;
}

}  // namespace delgrad

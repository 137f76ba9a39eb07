#pragma once
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "delgrad/serialize.hpp"

// Structured experiment configuration: JSON document with presets supplying
// every default, schema validation that rejects unknown keys with
// path-anchored messages, and a stable hash of the resolved document echoed
// into every output file.

namespace delgrad {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetBlock {
  int n_train = 5000, n_val = 1000, n_test = 1000;
};

struct LayerBlock {
  int size = 30;
  std::string delay = "axonal";
  double weight_mean = 1.0, weight_std = 1.0;
  double max_silent_ratio = 0.3;
  double delay_theta_std = 0.25;
  double lambda = 1.0;
  double shift = 0.0;
};

struct NetworkBlock {
  std::string ratio = "twice";
  double tau_s = 1.0, g_leak = 0.5, threshold = 1.0, v_reset = 0.0;
  std::vector<LayerBlock> layers;
};

struct TrainingBlock {
  int epochs = 300, batch_size = 150;
  double lr_weights = 0.005, lr_delays = 0.005;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  int scheduler_step = 20;
  double scheduler_gamma = 0.95;
  double max_dw = 0.2, bump_value = 0.0005;
  bool freeze_delays = false;
  std::string loss = "delta_mse";
  double delta_t = 0.2, a_scale = 1.0;
  double silent_time = std::nan("");  // NaN: resolve to t_late + 1
  double horizon = std::nan("");      // NaN: resolve to t_late + 3*tau_m
};

struct NoiseBlock {
  NoiseModel model;
  double small_hidden_factor = 2.0;  // widens quant range at hidden size 5
};

struct SweepBlock {
  std::string mode = "sizes";  // sizes | span | frozen
  std::vector<int> hidden_sizes = {5, 10, 15, 20, 25, 30};
  std::vector<std::string> delay_kinds = {"broadcast", "axonal", "dendritic",
                                          "synaptic"};
  int seeds = 10;
  std::vector<double> spans = {0.15, 0.3, 0.6, 1.0, 1.85, 2.5};
  std::vector<double> lrs = {};  // empty: use training lr only
  std::vector<double> frozen_stds = {0.0, 0.4375, 0.875, 1.3125, 1.75};
};

struct OutputBlock {
  std::string dir = "out";
};

struct ExperimentConfig {
  std::string preset = "ideal";
  uint64_t seed = 42;
  int threads = 0;  // 0: hardware concurrency
  DatasetBlock dataset;
  EncodingConfig encoding;
  NetworkBlock network;
  TrainingBlock training;
  NoiseBlock noise;
  SweepBlock sweep;
  OutputBlock output;
};

inline ExperimentConfig preset_config(const std::string& preset)
{
  ExperimentConfig c;
  c.preset = preset;
  if (preset == "ideal") {
    c.network.layers = {LayerBlock{30, "axonal", 1.0, 1.0, 0.3, 0.25, 1.0, 0.0},
                        LayerBlock{3, "axonal", 1.0, 1.0, 0.0, 0.25, 1.0, 0.0}};
    return c;
  }
  if (preset == "hardware") {
    c.network.ratio = "equal";
    c.network.tau_s = 1.0;
    c.network.g_leak = 1.0;
    c.network.threshold = 2.6;
    c.network.layers = {
        LayerBlock{30, "axonal", 1.0, 0.12, 0.05, 0.5, 1.5, 2.0},
        LayerBlock{3, "axonal", 0.075, 0.15, 0.05, 0.5, 1.5, 2.0}};
    c.training.batch_size = 40;
    c.training.lr_weights = 0.002;
    c.training.lr_delays = 0.002;
    c.training.delta_t = 0.3;
    c.noise.model.quantize = true;
    c.noise.model.fixed_pattern = true;
    c.noise.model.trial_to_trial = true;
    c.noise.model.delay_jitter = true;
    c.noise.model.multiplex = 5;
    return c;
  }
  throw ConfigError("preset: unknown value '" + preset +
                    "' (expected 'ideal' or 'hardware')");
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& path,
                       std::initializer_list<const char*> allowed)
{
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(path + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out,
                const std::string& path)
{
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    it->get_to(out);
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

inline void require(bool cond, const std::string& msg)
{
  if (!cond) throw ConfigError(msg);
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j)
{
  using detail::check_keys;
  using detail::read_field;
  using detail::require;

  check_keys(j, "config",
             {"preset", "seed", "threads", "dataset", "encoding", "network",
              "training", "noise", "sweep", "output"});
  std::string preset = "ideal";
  read_field(j, "preset", preset, "config");
  ExperimentConfig c = preset_config(preset);
  read_field(j, "seed", c.seed, "config");
  read_field(j, "threads", c.threads, "config");

  if (j.contains("dataset")) {
    const nlohmann::json& b = j.at("dataset");
    check_keys(b, "dataset", {"n_train", "n_val", "n_test"});
    read_field(b, "n_train", c.dataset.n_train, "dataset");
    read_field(b, "n_val", c.dataset.n_val, "dataset");
    read_field(b, "n_test", c.dataset.n_test, "dataset");
  }
  if (j.contains("encoding")) {
    const nlohmann::json& b = j.at("encoding");
    check_keys(b, "encoding", {"t_early", "t_late"});
    read_field(b, "t_early", c.encoding.t_early, "encoding");
    read_field(b, "t_late", c.encoding.t_late, "encoding");
  }
  if (j.contains("network")) {
    const nlohmann::json& b = j.at("network");
    check_keys(b, "network",
               {"ratio", "tau_s", "g_leak", "threshold", "v_reset", "layers"});
    read_field(b, "ratio", c.network.ratio, "network");
    read_field(b, "tau_s", c.network.tau_s, "network");
    read_field(b, "g_leak", c.network.g_leak, "network");
    read_field(b, "threshold", c.network.threshold, "network");
    read_field(b, "v_reset", c.network.v_reset, "network");
    if (b.contains("layers")) {
      const nlohmann::json& arr = b.at("layers");
      require(arr.is_array() && !arr.empty(),
              "network.layers: expected a non-empty array");
      const std::vector<LayerBlock> defaults = c.network.layers;
      c.network.layers.clear();
      for (size_t i = 0; i < arr.size(); ++i) {
        const std::string path = "network.layers[" + std::to_string(i) + "]";
        const bool last = i + 1 == arr.size();
        LayerBlock lb = last ? defaults.back() : defaults.front();
        if (last) lb.size = 3;
        check_keys(arr[i], path,
                   {"size", "delay", "weight_mean", "weight_std",
                    "max_silent_ratio", "delay_theta_std", "lambda", "shift"});
        read_field(arr[i], "size", lb.size, path);
        read_field(arr[i], "delay", lb.delay, path);
        read_field(arr[i], "weight_mean", lb.weight_mean, path);
        read_field(arr[i], "weight_std", lb.weight_std, path);
        read_field(arr[i], "max_silent_ratio", lb.max_silent_ratio, path);
        read_field(arr[i], "delay_theta_std", lb.delay_theta_std, path);
        read_field(arr[i], "lambda", lb.lambda, path);
        read_field(arr[i], "shift", lb.shift, path);
        c.network.layers.push_back(lb);
      }
    }
  }
  if (j.contains("training")) {
    const nlohmann::json& b = j.at("training");
    check_keys(b, "training",
               {"epochs", "batch_size", "lr_weights", "lr_delays", "beta1",
                "beta2", "adam_eps", "scheduler_step", "scheduler_gamma",
                "max_dw", "bump_value", "freeze_delays", "loss", "delta_t",
                "a_scale", "silent_time", "horizon"});
    read_field(b, "epochs", c.training.epochs, "training");
    read_field(b, "batch_size", c.training.batch_size, "training");
    read_field(b, "lr_weights", c.training.lr_weights, "training");
    read_field(b, "lr_delays", c.training.lr_delays, "training");
    read_field(b, "beta1", c.training.beta1, "training");
    read_field(b, "beta2", c.training.beta2, "training");
    read_field(b, "adam_eps", c.training.adam_eps, "training");
    read_field(b, "scheduler_step", c.training.scheduler_step, "training");
    read_field(b, "scheduler_gamma", c.training.scheduler_gamma, "training");
    read_field(b, "max_dw", c.training.max_dw, "training");
    read_field(b, "bump_value", c.training.bump_value, "training");
    read_field(b, "freeze_delays", c.training.freeze_delays, "training");
    read_field(b, "loss", c.training.loss, "training");
    read_field(b, "delta_t", c.training.delta_t, "training");
    read_field(b, "a_scale", c.training.a_scale, "training");
    read_field(b, "silent_time", c.training.silent_time, "training");
    read_field(b, "horizon", c.training.horizon, "training");
  }
  if (j.contains("noise")) {
    const nlohmann::json& b = j.at("noise");
    check_keys(b, "noise",
               {"quantize", "quant_max", "quant_step", "fixed_pattern",
                "fp_mean", "fp_std", "trial_to_trial", "t2t_std",
                "delay_jitter", "jitter_std", "multiplex",
                "small_hidden_factor"});
    NoiseModel& m = c.noise.model;
    read_field(b, "quantize", m.quantize, "noise");
    read_field(b, "quant_max", m.quant_max, "noise");
    read_field(b, "quant_step", m.quant_step, "noise");
    read_field(b, "fixed_pattern", m.fixed_pattern, "noise");
    read_field(b, "fp_mean", m.fp_mean, "noise");
    read_field(b, "fp_std", m.fp_std, "noise");
    read_field(b, "trial_to_trial", m.trial_to_trial, "noise");
    read_field(b, "t2t_std", m.t2t_std, "noise");
    read_field(b, "delay_jitter", m.delay_jitter, "noise");
    read_field(b, "jitter_std", m.jitter_std, "noise");
    read_field(b, "multiplex", m.multiplex, "noise");
    read_field(b, "small_hidden_factor", c.noise.small_hidden_factor, "noise");
  }
  if (j.contains("sweep")) {
    const nlohmann::json& b = j.at("sweep");
    check_keys(b, "sweep",
               {"mode", "hidden_sizes", "delay_kinds", "seeds", "spans", "lrs",
                "frozen_stds"});
    read_field(b, "mode", c.sweep.mode, "sweep");
    read_field(b, "hidden_sizes", c.sweep.hidden_sizes, "sweep");
    read_field(b, "delay_kinds", c.sweep.delay_kinds, "sweep");
    read_field(b, "seeds", c.sweep.seeds, "sweep");
    read_field(b, "spans", c.sweep.spans, "sweep");
    read_field(b, "lrs", c.sweep.lrs, "sweep");
    read_field(b, "frozen_stds", c.sweep.frozen_stds, "sweep");
  }
  if (j.contains("output")) {
    const nlohmann::json& b = j.at("output");
    check_keys(b, "output", {"dir"});
    read_field(b, "dir", c.output.dir, "output");
  }

  // semantic checks
  require(c.dataset.n_train > 0 && c.dataset.n_val > 0 && c.dataset.n_test > 0,
          "dataset: split sizes must be positive");
  require(c.encoding.t_late > c.encoding.t_early,
          "encoding: t_late must exceed t_early");
  require(c.network.ratio == "twice" || c.network.ratio == "equal",
          "network.ratio: expected 'twice' or 'equal'");
  require(c.network.tau_s > 0, "network.tau_s: must be positive");
  require(c.network.g_leak > 0, "network.g_leak: must be positive");
  require(c.network.threshold > c.network.v_reset,
          "network.threshold: must exceed v_reset");
  require(!c.network.layers.empty(), "network.layers: must be non-empty");
  for (size_t i = 0; i < c.network.layers.size(); ++i) {
    const LayerBlock& lb = c.network.layers[i];
    const std::string path = "network.layers[" + std::to_string(i) + "]";
    require(lb.size > 0, path + ".size: must be positive");
    delay_kind_from_string(lb.delay);  // throws on bad kind
    require(lb.lambda > 0, path + ".lambda: must be positive");
    require(lb.max_silent_ratio >= 0, path + ".max_silent_ratio: must be >= 0");
    require(lb.delay_theta_std >= 0, path + ".delay_theta_std: must be >= 0");
  }
  require(c.training.epochs >= 0, "training.epochs: must be >= 0");
  require(c.training.batch_size > 0, "training.batch_size: must be positive");
  require(c.training.loss == "delta_mse" || c.training.loss == "vmax",
          "training.loss: expected 'delta_mse' or 'vmax'");
  require(c.training.scheduler_step > 0,
          "training.scheduler_step: must be positive");
  require(c.training.max_dw > 0, "training.max_dw: must be positive");
  require(c.noise.model.multiplex >= 1, "noise.multiplex: must be >= 1");
  require(c.noise.model.quant_step > 0, "noise.quant_step: must be positive");
  require(c.sweep.mode == "sizes" || c.sweep.mode == "span" ||
              c.sweep.mode == "frozen",
          "sweep.mode: expected 'sizes', 'span' or 'frozen'");
  require(c.sweep.seeds > 0, "sweep.seeds: must be positive");
  for (double s : c.sweep.spans)
    require(s > 0, "sweep.spans: entries must be positive");
  return c;
}

// Parses JSON text, converting byte offsets of syntax errors to line numbers.
inline ExperimentConfig config_from_text(const std::string& text)
{
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    size_t line = 1;
    const size_t stop = std::min(text.size(), e.byte);
    for (size_t i = 0; i < stop; ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError("config parse error at line " + std::to_string(line) +
                      ": " + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::string& path)
{
  return config_from_text(read_text_file(path));
}

inline double resolved_silent_time(const ExperimentConfig& c,
                                   const EncodingConfig& enc)
{
  return std::isnan(c.training.silent_time) ? enc.t_late + 1.0
                                            : c.training.silent_time;
}

inline double resolved_horizon(const ExperimentConfig& c,
                               const EncodingConfig& enc)
{
  if (!std::isnan(c.training.horizon)) return c.training.horizon;
  const double tau_m =
      c.network.ratio == "equal" ? c.network.tau_s : 2.0 * c.network.tau_s;
  return enc.t_late + 3.0 * tau_m;
}

// Fully resolved document (every default materialized); its hash identifies
// the experiment in output files.
inline nlohmann::json config_to_json(const ExperimentConfig& c)
{
  nlohmann::json j;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["dataset"] = {{"n_train", c.dataset.n_train},
                  {"n_val", c.dataset.n_val},
                  {"n_test", c.dataset.n_test}};
  j["encoding"] = {{"t_early", c.encoding.t_early},
                   {"t_late", c.encoding.t_late}};
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerBlock& lb : c.network.layers)
    layers.push_back({{"size", lb.size},
                      {"delay", lb.delay},
                      {"weight_mean", lb.weight_mean},
                      {"weight_std", lb.weight_std},
                      {"max_silent_ratio", lb.max_silent_ratio},
                      {"delay_theta_std", lb.delay_theta_std},
                      {"lambda", lb.lambda},
                      {"shift", lb.shift}});
  j["network"] = {{"ratio", c.network.ratio},
                  {"tau_s", c.network.tau_s},
                  {"g_leak", c.network.g_leak},
                  {"threshold", c.network.threshold},
                  {"v_reset", c.network.v_reset},
                  {"layers", std::move(layers)}};
  j["training"] = {{"epochs", c.training.epochs},
                   {"batch_size", c.training.batch_size},
                   {"lr_weights", c.training.lr_weights},
                   {"lr_delays", c.training.lr_delays},
                   {"beta1", c.training.beta1},
                   {"beta2", c.training.beta2},
                   {"adam_eps", c.training.adam_eps},
                   {"scheduler_step", c.training.scheduler_step},
                   {"scheduler_gamma", c.training.scheduler_gamma},
                   {"max_dw", c.training.max_dw},
                   {"bump_value", c.training.bump_value},
                   {"freeze_delays", c.training.freeze_delays},
                   {"loss", c.training.loss},
                   {"delta_t", c.training.delta_t},
                   {"a_scale", c.training.a_scale},
                   {"silent_time", resolved_silent_time(c, c.encoding)},
                   {"horizon", resolved_horizon(c, c.encoding)}};
  const NoiseModel& m = c.noise.model;
  j["noise"] = {{"quantize", m.quantize},
                {"quant_max", m.quant_max},
                {"quant_step", m.quant_step},
                {"fixed_pattern", m.fixed_pattern},
                {"fp_mean", m.fp_mean},
                {"fp_std", m.fp_std},
                {"trial_to_trial", m.trial_to_trial},
                {"t2t_std", m.t2t_std},
                {"delay_jitter", m.delay_jitter},
                {"jitter_std", m.jitter_std},
                {"multiplex", m.multiplex},
                {"small_hidden_factor", c.noise.small_hidden_factor}};
  j["sweep"] = {{"mode", c.sweep.mode},
                {"hidden_sizes", c.sweep.hidden_sizes},
                {"delay_kinds", c.sweep.delay_kinds},
                {"seeds", c.sweep.seeds},
                {"spans", c.sweep.spans},
                {"lrs", c.sweep.lrs},
                {"frozen_stds", c.sweep.frozen_stds}};
  j["output"] = {{"dir", c.output.dir}};
  return j;
}

inline std::string config_hash(const ExperimentConfig& c)
{
  return hex64(fnv1a64(config_to_json(c).dump()));
}

inline std::string config_echo(const ExperimentConfig& c)
{
  return "config_hash=" + config_hash(c) + " preset=" + c.preset +
         " seed=" + std::to_string(c.seed);
}

// --- run-spec builders -------------------------------------------------------

inline RunSpec run_spec_from(const ExperimentConfig& c)
{
  RunSpec rs;
  rs.ncfg.tau_s = c.network.tau_s;
  rs.ncfg.ratio =
      c.network.ratio == "equal" ? TauRatio::equal : TauRatio::twice;
  rs.ncfg.g_leak = c.network.g_leak;
  rs.ncfg.threshold = c.network.threshold;
  rs.ncfg.v_reset = c.network.v_reset;
  rs.enc = c.encoding;
  rs.tc.epochs = c.training.epochs;
  rs.tc.batch_size = c.training.batch_size;
  rs.tc.lr_weights = c.training.lr_weights;
  rs.tc.lr_delays = c.training.lr_delays;
  rs.tc.beta1 = c.training.beta1;
  rs.tc.beta2 = c.training.beta2;
  rs.tc.adam_eps = c.training.adam_eps;
  rs.tc.scheduler_step = c.training.scheduler_step;
  rs.tc.scheduler_gamma = c.training.scheduler_gamma;
  rs.tc.max_dw = c.training.max_dw;
  rs.tc.bump_value = c.training.bump_value;
  rs.tc.freeze_delays = c.training.freeze_delays;
  rs.tc.loss.delta_t = c.training.delta_t;
  rs.tc.loss.a_scale = c.training.a_scale;
  rs.tc.loss.silent_time = resolved_silent_time(c, c.encoding);
  rs.tc.loss.horizon = resolved_horizon(c, c.encoding);
  rs.tc.noise = c.noise.model;
  rs.tc.seed = c.seed;
  for (const LayerBlock& lb : c.network.layers)
    rs.layers.push_back(LayerSpec{lb.size, lb.weight_mean, lb.weight_std,
                                  lb.max_silent_ratio,
                                  delay_kind_from_string(lb.delay),
                                  lb.delay_theta_std, lb.lambda, lb.shift});
  rs.n_train = c.dataset.n_train;
  rs.n_val = c.dataset.n_val;
  rs.n_test = c.dataset.n_test;
  return rs;
}

inline void set_hidden_size(RunSpec& rs, int hidden)
{
  for (size_t i = 0; i + 1 < rs.layers.size(); ++i) rs.layers[i].size = hidden;
}

inline void set_delay_kind(RunSpec& rs, DelayKind k)
{
  for (LayerSpec& l : rs.layers) l.delay = k;
}

inline void set_span(RunSpec& rs, const ExperimentConfig& c, double span)
{
  rs.enc = rescale_span(rs.enc, span);
  rs.tc.loss.silent_time = resolved_silent_time(c, rs.enc);
  rs.tc.loss.horizon = resolved_horizon(c, rs.enc);
}

inline void set_seed(RunSpec& rs, uint64_t seed) { rs.tc.seed = seed; }

}  // namespace delgrad

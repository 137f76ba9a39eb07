#pragma once
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "delgrad/train.hpp"

// File formats: models and checkpoints as JSON (doubles round-trip exactly),
// datasets and result tables as delimiter-separated text with a config-echo
// header line.

namespace delgrad {

inline uint64_t fnv1a64(const std::string& s)
{
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t v)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string fmt_g17(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& body)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << body;
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// --- model / checkpoint ----------------------------------------------------

inline nlohmann::json neuron_config_to_json(const NeuronConfig& c)
{
  nlohmann::json j;
  j["tau_s"] = c.tau_s;
  j["ratio"] = c.ratio == TauRatio::equal ? "equal" : "twice";
  j["g_leak"] = c.g_leak;
  j["threshold"] = c.threshold;
  j["v_reset"] = c.v_reset;
  if (std::isfinite(c.tau_ref)) j["tau_ref"] = c.tau_ref;
  return j;
}

inline NeuronConfig neuron_config_from_json(const nlohmann::json& j)
{
  NeuronConfig c;
  c.tau_s = j.at("tau_s").get<double>();
  const std::string ratio = j.at("ratio").get<std::string>();
  if (ratio == "equal")
    c.ratio = TauRatio::equal;
  else if (ratio == "twice")
    c.ratio = TauRatio::twice;
  else
    throw std::runtime_error("unknown tau ratio: " + ratio);
  c.g_leak = j.at("g_leak").get<double>();
  c.threshold = j.at("threshold").get<double>();
  c.v_reset = j.at("v_reset").get<double>();
  c.tau_ref = j.value("tau_ref", kNoSpike);
  return c;
}

inline DelayKind delay_kind_from_string(const std::string& s)
{
  if (s == "none" || s == "broadcast") return DelayKind::none;
  if (s == "axonal") return DelayKind::axonal;
  if (s == "dendritic") return DelayKind::dendritic;
  if (s == "synaptic") return DelayKind::synaptic;
  throw std::runtime_error("unknown delay kind: " + s);
}

inline nlohmann::json model_to_json(const Network& net, const Adam* adam,
                                    int epoch, const std::string& config_hash)
{
  nlohmann::json j;
  j["format"] = "delgrad-model";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["epoch"] = epoch;
  j["neuron"] = neuron_config_to_json(net.cfg);
  j["n_in"] = net.n_in;
  nlohmann::json stages = nlohmann::json::array();
  for (const Network::Stage& st : net.stages) {
    nlohmann::json s;
    s["delay"] = {{"kind", to_string(st.delay.kind)},
                  {"n_pre", st.delay.n_pre},
                  {"n_post", st.delay.n_post},
                  {"group_size", st.delay.group_size},
                  {"lambda", st.delay.lambda},
                  {"shift", st.delay.shift},
                  {"theta", st.delay.theta}};
    s["neurons"] = {{"n_pre", st.neurons.n_pre},
                    {"n_post", st.neurons.n_post},
                    {"max_silent_ratio", st.neurons.max_silent_ratio},
                    {"weights", st.neurons.weights}};
    stages.push_back(std::move(s));
  }
  j["stages"] = std::move(stages);
  if (adam) {
    j["adam"] = {{"t", adam->t},       {"beta1", adam->beta1},
                 {"beta2", adam->beta2}, {"eps", adam->eps},
                 {"mw", adam->mw},       {"vw", adam->vw},
                 {"mth", adam->mth},     {"vth", adam->vth}};
  }
  return j;
}

struct ModelFile {
  Network net;
  Adam adam;
  bool has_adam = false;
  int epoch = 0;
  std::string config_hash;
};

inline ModelFile model_from_json(const nlohmann::json& j)
{
  if (j.value("format", "") != "delgrad-model")
    throw std::runtime_error("not a model file");
  if (j.value("version", 0) != 1)
    throw std::runtime_error("unsupported model version");
  ModelFile m;
  m.config_hash = j.value("config_hash", "");
  m.epoch = j.at("epoch").get<int>();
  m.net.cfg = neuron_config_from_json(j.at("neuron"));
  m.net.n_in = j.at("n_in").get<int>();
  for (const nlohmann::json& s : j.at("stages")) {
    Network::Stage st;
    const nlohmann::json& d = s.at("delay");
    st.delay.kind = delay_kind_from_string(d.at("kind").get<std::string>());
    st.delay.n_pre = d.at("n_pre").get<int>();
    st.delay.n_post = d.at("n_post").get<int>();
    st.delay.group_size = d.at("group_size").get<int>();
    st.delay.lambda = d.at("lambda").get<double>();
    st.delay.shift = d.at("shift").get<double>();
    st.delay.theta = d.at("theta").get<std::vector<double>>();
    const nlohmann::json& nl = s.at("neurons");
    st.neurons.n_pre = nl.at("n_pre").get<int>();
    st.neurons.n_post = nl.at("n_post").get<int>();
    st.neurons.max_silent_ratio = nl.at("max_silent_ratio").get<double>();
    st.neurons.weights = nl.at("weights").get<std::vector<double>>();
    if (static_cast<int>(st.neurons.weights.size()) !=
        st.neurons.n_pre * st.neurons.n_post)
      throw std::runtime_error("weight matrix size mismatch");
    if (static_cast<int>(st.delay.theta.size()) != st.delay.param_count())
      throw std::runtime_error("delay parameter count mismatch");
    m.net.stages.push_back(std::move(st));
  }
  if (j.contains("adam")) {
    const nlohmann::json& a = j.at("adam");
    m.adam.t = a.at("t").get<int64_t>();
    m.adam.beta1 = a.at("beta1").get<double>();
    m.adam.beta2 = a.at("beta2").get<double>();
    m.adam.eps = a.at("eps").get<double>();
    m.adam.mw = a.at("mw").get<std::vector<std::vector<double>>>();
    m.adam.vw = a.at("vw").get<std::vector<std::vector<double>>>();
    m.adam.mth = a.at("mth").get<std::vector<std::vector<double>>>();
    m.adam.vth = a.at("vth").get<std::vector<std::vector<double>>>();
    m.has_adam = true;
  }
  return m;
}

inline void save_model(const std::string& path, const Network& net,
                       const Adam* adam, int epoch,
                       const std::string& config_hash)
{
  write_text_file(path, model_to_json(net, adam, epoch, config_hash).dump(2) + "\n");
}

inline ModelFile load_model(const std::string& path)
{
  return model_from_json(nlohmann::json::parse(read_text_file(path)));
}

// --- dataset ---------------------------------------------------------------

inline std::string dataset_to_text(const EncodedDataset& d,
                                   const std::string& echo)
{
  std::string s;
  s.reserve(96 * d.samples.size() + 128);
  s += "# " + echo + "\n";
  s += "x,y,label,t_x,t_y,t_inv_x,t_inv_y\n";
  char buf[256];
  for (size_t i = 0; i < d.samples.size(); ++i) {
    const YinYangSample& ys = d.samples[i];
    const std::array<double, 4>& t = d.times[i];
    std::snprintf(buf, sizeof buf,
                  "%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g\n", ys.x, ys.y,
                  ys.label, t[0], t[1], t[2], t[3]);
    s += buf;
  }
  return s;
}

// --- metrics and result tables ----------------------------------------------

inline std::string metrics_to_text(const std::vector<MetricsRow>& log,
                                   const std::string& echo)
{
  std::string s = "# " + echo + "\n";
  s += "epoch,train_loss,train_err,val_err,lr_w,lr_d\n";
  char buf[192];
  for (const MetricsRow& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  r.epoch, r.train_loss, r.train_err, r.val_err, r.lr_w,
                  r.lr_d);
    s += buf;
  }
  return s;
}

struct SweepRow {
  std::string kind;
  int hidden = 0;
  double span = 0.0;
  double lr = 0.0;
  uint64_t seed = 0;
  int params = 0;
  double test_err = 1.0;
  double val_err = 1.0;
  bool aborted = false;
};

inline std::string sweep_rows_to_text(const std::vector<SweepRow>& rows,
                                      const std::string& echo)
{
  std::string s = "# " + echo + "\n";
  s += "kind,hidden,span,lr,seed,params,test_err,val_err,aborted\n";
  char buf[256];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.10g,%.10g,%llu,%d,%.10g,%.10g,%d\n",
                  r.kind.c_str(), r.hidden, r.span, r.lr,
                  static_cast<unsigned long long>(r.seed), r.params,
                  r.test_err, r.val_err, r.aborted ? 1 : 0);
    s += buf;
  }
  return s;
}

// Groups rows that share (kind, hidden, span, lr) and reduces seeds to
// median and interquartile range; incomplete cells (any aborted run) are
// flagged rather than silently averaged over fewer seeds.
inline std::string sweep_summary_to_text(const std::vector<SweepRow>& rows,
                                         const std::string& echo)
{
  std::string s = "# " + echo + "\n";
  s += "kind,hidden,span,lr,params,n_seeds,median_test_err,iqr_test_err,incomplete\n";
  std::vector<bool> used(rows.size(), false);
  char buf[256];
  for (size_t i = 0; i < rows.size(); ++i) {
    if (used[i]) continue;
    std::vector<double> errs;
    int incomplete = 0, n_ok = 0;
    for (size_t k = i; k < rows.size(); ++k) {
      if (used[k]) continue;
      const bool same = rows[k].kind == rows[i].kind &&
                        rows[k].hidden == rows[i].hidden &&
                        rows[k].span == rows[i].span && rows[k].lr == rows[i].lr;
      if (!same) continue;
      used[k] = true;
      if (rows[k].aborted) {
        incomplete = 1;
        continue;
      }
      errs.push_back(rows[k].test_err);
      ++n_ok;
    }
    const double med = errs.empty() ? 1.0 : median(errs);
    const double spread = errs.empty() ? 0.0 : iqr(errs);
    std::snprintf(buf, sizeof buf, "%s,%d,%.10g,%.10g,%d,%d,%.10g,%.10g,%d\n",
                  rows[i].kind.c_str(), rows[i].hidden, rows[i].span,
                  rows[i].lr, rows[i].params, n_ok, med, spread, incomplete);
    s += buf;
  }
  return s;
}

struct AblationRow {
  int rung = 0;
  std::string label;       // noise sources active at this rung
  std::string row;         // "delay" or "weight-only"
  uint64_t seed = 0;
  double test_err = 1.0;
  bool aborted = false;
};

inline std::string ablation_rows_to_text(const std::vector<AblationRow>& rows,
                                         const std::string& echo)
{
  std::string s = "# " + echo + "\n";
  s += "rung,label,row,seed,test_err,aborted\n";
  char buf[256];
  for (const AblationRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%s,%s,%llu,%.10g,%d\n", r.rung,
                  r.label.c_str(), r.row.c_str(),
                  static_cast<unsigned long long>(r.seed), r.test_err,
                  r.aborted ? 1 : 0);
    s += buf;
  }
  return s;
}

inline std::string ablation_summary_to_text(
    const std::vector<AblationRow>& rows, const std::string& echo)
{
  std::string s = "# " + echo + "\n";
  s += "rung,label,row,n_seeds,median_test_err,iqr_test_err\n";
  std::vector<bool> used(rows.size(), false);
  char buf[256];
  for (size_t i = 0; i < rows.size(); ++i) {
    if (used[i]) continue;
    std::vector<double> errs;
    for (size_t k = i; k < rows.size(); ++k) {
      if (used[k]) continue;
      if (rows[k].rung != rows[i].rung || rows[k].row != rows[i].row) continue;
      used[k] = true;
      if (!rows[k].aborted) errs.push_back(rows[k].test_err);
    }
    const double med = errs.empty() ? 1.0 : median(errs);
    const double spread = errs.empty() ? 0.0 : iqr(errs);
    std::snprintf(buf, sizeof buf, "%d,%s,%s,%d,%.10g,%.10g\n", rows[i].rung,
                  rows[i].label.c_str(), rows[i].row.c_str(),
                  static_cast<int>(errs.size()), med, spread);
    s += buf;
  }
  return s;
}

}  // namespace delgrad

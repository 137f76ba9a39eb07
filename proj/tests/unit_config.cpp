// Experiment configuration: presets, JSON parsing with path-anchored errors,
// resolved defaults, the stable config hash, run-spec mapping, and the
// model/table serialization formats.
#include <catch2/catch_amalgamated.hpp>

#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "delgrad/config.hpp"
#include "delgrad/train.hpp"

using namespace delgrad;
using Catch::Matchers::ContainsSubstring;

namespace {

std::vector<std::string> split_lines(const std::string& s)
{
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos < s.size()) {
    const size_t nl = s.find('\n', pos);
    if (nl == std::string::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("presets pin the two experiment regimes", "[config]")
{
  const ExperimentConfig c = preset_config("ideal");
  CHECK(c.preset == "ideal");
  CHECK(c.seed == 42);
  CHECK(c.network.ratio == "twice");
  CHECK(c.network.tau_s == 1.0);
  CHECK(c.network.g_leak == 0.5);
  CHECK(c.network.threshold == 1.0);
  CHECK(c.network.v_reset == 0.0);
  REQUIRE(c.network.layers.size() == 2);
  CHECK(c.network.layers[0].size == 30);
  CHECK(c.network.layers[0].delay == "axonal");
  CHECK(c.network.layers[0].weight_mean == 1.0);
  CHECK(c.network.layers[0].weight_std == 1.0);
  CHECK(c.network.layers[0].max_silent_ratio == 0.3);
  CHECK(c.network.layers[0].delay_theta_std == 0.25);
  CHECK(c.network.layers[1].size == 3);
  CHECK(c.network.layers[1].max_silent_ratio == 0.0);
  CHECK(c.training.epochs == 300);
  CHECK(c.training.batch_size == 150);
  CHECK(c.training.lr_weights == 0.005);
  CHECK(c.training.lr_delays == 0.005);
  CHECK(c.training.scheduler_step == 20);
  CHECK(c.training.scheduler_gamma == 0.95);
  CHECK(c.training.max_dw == 0.2);
  CHECK(c.training.bump_value == 0.0005);
  CHECK(c.training.loss == "delta_mse");
  CHECK(c.training.delta_t == 0.2);
  CHECK(std::isnan(c.training.silent_time));
  CHECK(std::isnan(c.training.horizon));
  CHECK_FALSE(c.noise.model.any());
  CHECK(c.noise.model.multiplex == 1);
  CHECK(c.dataset.n_train == 5000);
  CHECK(c.encoding.t_early == 0.15);
  CHECK(c.encoding.t_late == 2.0);

  const ExperimentConfig h = preset_config("hardware");
  CHECK(h.network.ratio == "equal");
  CHECK(h.network.g_leak == 1.0);
  CHECK(h.network.threshold == 2.6);
  REQUIRE(h.network.layers.size() == 2);
  CHECK(h.network.layers[0].weight_mean == 1.0);
  CHECK(h.network.layers[0].weight_std == 0.12);
  CHECK(h.network.layers[0].max_silent_ratio == 0.05);
  CHECK(h.network.layers[0].delay_theta_std == 0.5);
  CHECK(h.network.layers[0].lambda == 1.5);
  CHECK(h.network.layers[0].shift == 2.0);
  CHECK(h.network.layers[1].weight_mean == 0.075);
  CHECK(h.network.layers[1].weight_std == 0.15);
  CHECK(h.training.batch_size == 40);
  CHECK(h.training.lr_weights == 0.002);
  CHECK(h.training.lr_delays == 0.002);
  CHECK(h.training.delta_t == 0.3);
  CHECK(h.noise.model.quantize);
  CHECK(h.noise.model.fixed_pattern);
  CHECK(h.noise.model.trial_to_trial);
  CHECK(h.noise.model.delay_jitter);
  CHECK(h.noise.model.multiplex == 5);

  REQUIRE_THROWS_WITH(preset_config("bogus"),
                      "preset: unknown value 'bogus' (expected 'ideal' or "
                      "'hardware')");
}

TEST_CASE("overrides land on top of the preset", "[config]")
{
  const ExperimentConfig c = config_from_text(R"({
    "preset": "ideal",
    "seed": 7,
    "threads": 4,
    "training": {"epochs": 5, "batch_size": 10},
    "network": {"layers": [{"size": 12, "delay": "synaptic"},
                           {"delay": "none"}]}
  })");
  CHECK(c.seed == 7);
  CHECK(c.threads == 4);
  CHECK(c.training.epochs == 5);
  CHECK(c.training.batch_size == 10);
  CHECK(c.training.lr_weights == 0.005);  // untouched default
  REQUIRE(c.network.layers.size() == 2);
  CHECK(c.network.layers[0].size == 12);
  CHECK(c.network.layers[0].delay == "synaptic");
  CHECK(c.network.layers[0].max_silent_ratio == 0.3);  // hidden default kept
  CHECK(c.network.layers[1].size == 3);
  CHECK(c.network.layers[1].delay == "none");

  // Deeper stacks: every layer but the last inherits the hidden defaults.
  const ExperimentConfig d = config_from_text(R"({
    "network": {"layers": [{"size": 8}, {"size": 6}, {}]}
  })");
  REQUIRE(d.network.layers.size() == 3);
  CHECK(d.network.layers[0].size == 8);
  CHECK(d.network.layers[1].size == 6);
  CHECK(d.network.layers[1].max_silent_ratio == 0.3);
  CHECK(d.network.layers[2].size == 3);
  CHECK(d.network.layers[2].max_silent_ratio == 0.0);
}

TEST_CASE("unknown keys and wrong types are rejected with their path",
          "[config]")
{
  REQUIRE_THROWS_WITH(config_from_text(R"({"bogus": 1})"),
                      "config: unknown key 'bogus'");
  REQUIRE_THROWS_WITH(config_from_text(R"({"training": {"lr": 0.1}})"),
                      "training: unknown key 'lr'");
  REQUIRE_THROWS_WITH(
      config_from_text(R"({"network": {"layers": [{"sz": 5}]}})"),
      "network.layers[0]: unknown key 'sz'");
  REQUIRE_THROWS_WITH(config_from_text(R"([1, 2])"),
                      "config: expected an object");
  REQUIRE_THROWS_WITH(config_from_text(R"({"seed": "forty"})"),
                      "config.seed: wrong type");
  REQUIRE_THROWS_WITH(
      config_from_text(R"({"training": {"epochs": "many"}})"),
      "training.epochs: wrong type");
  REQUIRE_THROWS_WITH(
      config_from_text(R"({"sweep": {"hidden_sizes": "big"}})"),
      "sweep.hidden_sizes: wrong type");
  CHECK_THROWS_AS(config_from_text(R"({"bogus": 1})"), ConfigError);
}

TEST_CASE("semantic validation messages", "[config]")
{
  REQUIRE_THROWS_WITH(
      config_from_text(R"({"training": {"batch_size": 0}})"),
      "training.batch_size: must be positive");
  REQUIRE_THROWS_WITH(config_from_text(R"({"training": {"epochs": -1}})"),
                      "training.epochs: must be >= 0");
  REQUIRE_THROWS_WITH(config_from_text(R"({"training": {"loss": "mse"}})"),
                      "training.loss: expected 'delta_mse' or 'vmax'");
  REQUIRE_THROWS_WITH(config_from_text(R"({"network": {"ratio": "thrice"}})"),
                      "network.ratio: expected 'twice' or 'equal'");
  REQUIRE_THROWS_WITH(
      config_from_text(R"({"encoding": {"t_late": 0.1}})"),
      "encoding: t_late must exceed t_early");
  REQUIRE_THROWS_WITH(config_from_text(R"({"network": {"layers": []}})"),
                      "network.layers: expected a non-empty array");
  REQUIRE_THROWS_WITH(config_from_text(R"({"noise": {"multiplex": 0}})"),
                      "noise.multiplex: must be >= 1");
  REQUIRE_THROWS_WITH(
      config_from_text(R"({"sweep": {"spans": [0.5, -1.0]}})"),
      "sweep.spans: entries must be positive");
  REQUIRE_THROWS_WITH(
      config_from_text(R"({"network": {"layers": [{"delay": "warp"}]}})"),
      "unknown delay kind: warp");
}

TEST_CASE("syntax errors report the line number", "[config]")
{
  const std::string text = "{\n  \"preset\": \"ideal\",\n  BAD\n}";
  REQUIRE_THROWS_WITH(config_from_text(text),
                      ContainsSubstring("config parse error at line 3"));
  CHECK_THROWS_AS(config_from_text(text), ConfigError);
}

TEST_CASE("NaN sentinels resolve against the encoding window", "[config]")
{
  const ExperimentConfig c = preset_config("ideal");
  CHECK(resolved_silent_time(c, c.encoding) == 3.0);   // t_late + 1
  CHECK(resolved_horizon(c, c.encoding) == 8.0);       // t_late + 3 * tau_m

  const ExperimentConfig h = preset_config("hardware");
  CHECK(resolved_horizon(h, h.encoding) == 5.0);  // equal taus: tau_m = tau_s

  ExperimentConfig e = c;
  e.training.silent_time = 7.5;
  e.training.horizon = 9.25;
  CHECK(resolved_silent_time(e, e.encoding) == 7.5);
  CHECK(resolved_horizon(e, e.encoding) == 9.25);

  const EncodingConfig narrow = rescale_span(c.encoding, 0.5);
  CHECK(std::fabs(resolved_silent_time(c, narrow) - 1.65) <= 1e-15);
}

TEST_CASE("config hash and echo identify the resolved document", "[config]")
{
  const ExperimentConfig c = preset_config("ideal");
  const std::string h1 = config_hash(c);
  CHECK(h1 == config_hash(c));
  CHECK(h1.size() == 16);
  for (char ch : h1) CHECK(std::isxdigit(static_cast<unsigned char>(ch)));

  ExperimentConfig c2 = c;
  c2.seed = 43;
  CHECK(config_hash(c2) != h1);
  ExperimentConfig c3 = c;
  c3.training.lr_weights = 0.006;
  CHECK(config_hash(c3) != h1);

  CHECK(config_echo(c) == "config_hash=" + h1 + " preset=ideal seed=42");

  // The dump materializes resolved values, never NaN sentinels.
  const std::string dump = config_to_json(c).dump();
  CHECK(dump.find("null") == std::string::npos);
  CHECK(config_to_json(c)["training"]["silent_time"].get<double>() == 3.0);
  CHECK(config_to_json(c)["training"]["horizon"].get<double>() == 8.0);
}

TEST_CASE("hash primitives match the published test vectors", "[config]")
{
  CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
  CHECK(hex64(fnv1a64("foobar")) == "85944171f73967e8");

  Rng rng(3, Stream::gradcheck, 50);
  for (int k = 0; k < 20; ++k) {
    const double x = rng.normal(0.0, 10.0);
    CHECK(std::stod(fmt_g17(x)) == x);  // shortest-enough round trip
  }
}

TEST_CASE("run-spec mapping carries every field", "[config]")
{
  const ExperimentConfig h = preset_config("hardware");
  const RunSpec rs = run_spec_from(h);
  CHECK(rs.ncfg.ratio == TauRatio::equal);
  CHECK(rs.ncfg.g_leak == 1.0);
  CHECK(rs.ncfg.threshold == 2.6);
  CHECK(rs.enc.t_early == 0.15);
  CHECK(rs.tc.epochs == 300);
  CHECK(rs.tc.batch_size == 40);
  CHECK(rs.tc.lr_weights == 0.002);
  CHECK(rs.tc.loss.delta_t == 0.3);
  CHECK(rs.tc.loss.silent_time == 3.0);
  CHECK(rs.tc.loss.horizon == 5.0);
  CHECK(rs.tc.noise.multiplex == 5);
  CHECK(rs.tc.seed == h.seed);
  REQUIRE(rs.layers.size() == 2);
  CHECK(rs.layers[0].size == 30);
  CHECK(rs.layers[0].delay == DelayKind::axonal);
  CHECK(rs.layers[0].weight_std == 0.12);
  CHECK(rs.layers[0].max_silent_ratio == 0.05);
  CHECK(rs.layers[0].delay_theta_std == 0.5);
  CHECK(rs.layers[0].lambda == 1.5);
  CHECK(rs.layers[0].shift == 2.0);
  CHECK(rs.layers[1].weight_mean == 0.075);
  CHECK(rs.n_train == 5000);
  CHECK(rs.n_val == 1000);
  CHECK(rs.n_test == 1000);
}

TEST_CASE("run-spec mutators touch exactly their targets", "[config]")
{
  const ExperimentConfig c = config_from_text(R"({
    "network": {"layers": [{"size": 8}, {"size": 6}, {}]}
  })");
  RunSpec rs = run_spec_from(c);
  set_hidden_size(rs, 7);
  CHECK(rs.layers[0].size == 7);
  CHECK(rs.layers[1].size == 7);
  CHECK(rs.layers[2].size == 3);

  set_delay_kind(rs, DelayKind::synaptic);
  for (const LayerSpec& l : rs.layers) CHECK(l.delay == DelayKind::synaptic);

  set_span(rs, c, 0.5);
  CHECK(std::fabs(rs.enc.t_late - 0.65) <= 1e-15);
  CHECK(std::fabs(rs.tc.loss.silent_time - 1.65) <= 1e-15);
  CHECK(std::fabs(rs.tc.loss.horizon - 6.65) <= 1e-15);

  set_seed(rs, 99);
  CHECK(rs.tc.seed == 99);
}

TEST_CASE("delay kind strings round trip, sharing the broadcast spelling",
          "[config]")
{
  CHECK(delay_kind_from_string("none") == DelayKind::none);
  CHECK(delay_kind_from_string("broadcast") == DelayKind::none);
  CHECK(delay_kind_from_string("axonal") == DelayKind::axonal);
  CHECK(delay_kind_from_string("dendritic") == DelayKind::dendritic);
  CHECK(delay_kind_from_string("synaptic") == DelayKind::synaptic);
  CHECK(std::string(to_string(DelayKind::none)) == "broadcast");
  for (DelayKind k : {DelayKind::none, DelayKind::axonal, DelayKind::dendritic,
                      DelayKind::synaptic})
    CHECK(delay_kind_from_string(to_string(k)) == k);
  REQUIRE_THROWS_WITH(delay_kind_from_string("warp"),
                      "unknown delay kind: warp");
}

TEST_CASE("neuron config JSON omits an infinite refractory time", "[config]")
{
  NeuronConfig cfg;
  cfg.tau_s = 1.5;
  cfg.ratio = TauRatio::equal;
  cfg.g_leak = 0.7;
  cfg.threshold = 1.1;
  cfg.v_reset = -0.2;
  const nlohmann::json j = neuron_config_to_json(cfg);
  CHECK_FALSE(j.contains("tau_ref"));
  const NeuronConfig back = neuron_config_from_json(j);
  CHECK(back.tau_s == cfg.tau_s);
  CHECK(back.ratio == cfg.ratio);
  CHECK(back.g_leak == cfg.g_leak);
  CHECK(back.threshold == cfg.threshold);
  CHECK(back.v_reset == cfg.v_reset);
  CHECK(std::isinf(back.tau_ref));

  cfg.tau_ref = 0.25;
  const nlohmann::json j2 = neuron_config_to_json(cfg);
  REQUIRE(j2.contains("tau_ref"));
  CHECK(neuron_config_from_json(j2).tau_ref == 0.25);
}

TEST_CASE("model files round trip bitwise for every delay kind", "[config]")
{
  NeuronConfig cfg;
  cfg.tau_s = 1.0;
  cfg.ratio = TauRatio::twice;
  cfg.g_leak = 0.5;
  cfg.threshold = 1.0;
  for (DelayKind k : {DelayKind::none, DelayKind::axonal, DelayKind::dendritic,
                      DelayKind::synaptic}) {
    const std::vector<LayerSpec> spec{
        LayerSpec{6, 1.0, 1.0, 0.3, k, 0.25, 1.3, 0.2},
        LayerSpec{3, 1.0, 1.0, 0.0, k, 0.25, 1.0, 0.0}};
    const Network net = build_network(cfg, 20, spec, 11, 5);  // grouped inputs
    Adam adam;
    TrainConfig tc;
    adam.init(net, tc);
    adam.t = 7;
    adam.mw[0][0] = 0.125;
    adam.vw[0][1] = 3.5e-4;
    if (!adam.mth[1].empty()) adam.mth[1][0] = -0.75;

    const nlohmann::json j = model_to_json(net, &adam, 42, "deadbeef00000000");
    const ModelFile back = model_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.epoch == 42);
    CHECK(back.config_hash == "deadbeef00000000");
    CHECK(back.net.n_in == 20);
    CHECK(back.net.cfg.ratio == cfg.ratio);
    CHECK(back.net.cfg.g_leak == cfg.g_leak);
    REQUIRE(back.net.stages.size() == net.stages.size());
    for (size_t s = 0; s < net.stages.size(); ++s) {
      const Network::Stage& a = net.stages[s];
      const Network::Stage& b = back.net.stages[s];
      CHECK(b.delay.kind == a.delay.kind);
      CHECK(b.delay.n_pre == a.delay.n_pre);
      CHECK(b.delay.n_post == a.delay.n_post);
      CHECK(b.delay.group_size == a.delay.group_size);
      CHECK(b.delay.lambda == a.delay.lambda);
      CHECK(b.delay.shift == a.delay.shift);
      CHECK(b.delay.theta == a.delay.theta);
      CHECK(b.neurons.n_pre == a.neurons.n_pre);
      CHECK(b.neurons.n_post == a.neurons.n_post);
      CHECK(b.neurons.max_silent_ratio == a.neurons.max_silent_ratio);
      CHECK(b.neurons.weights == a.neurons.weights);
    }
    REQUIRE(back.has_adam);
    CHECK(back.adam.t == 7);
    CHECK(back.adam.beta1 == adam.beta1);
    CHECK(back.adam.mw == adam.mw);
    CHECK(back.adam.vw == adam.vw);
    CHECK(back.adam.mth == adam.mth);
    CHECK(back.adam.vth == adam.vth);

    const ModelFile lean =
        model_from_json(model_to_json(net, nullptr, 0, "h"));
    CHECK_FALSE(lean.has_adam);
  }
}

TEST_CASE("model files reject tampered or foreign documents", "[config]")
{
  NeuronConfig cfg;
  const std::vector<LayerSpec> spec{
      LayerSpec{4, 1.0, 1.0, 0.3, DelayKind::axonal, 0.25, 1.0, 0.0},
      LayerSpec{3, 1.0, 1.0, 0.0, DelayKind::axonal, 0.25, 1.0, 0.0}};
  const Network net = build_network(cfg, 4, spec, 2);
  nlohmann::json j = model_to_json(net, nullptr, 1, "h");

  nlohmann::json bad = j;
  bad["format"] = "something-else";
  REQUIRE_THROWS_WITH(model_from_json(bad), "not a model file");

  bad = j;
  bad["version"] = 2;
  REQUIRE_THROWS_WITH(model_from_json(bad), "unsupported model version");

  bad = j;
  auto w = bad["stages"][0]["neurons"]["weights"].get<std::vector<double>>();
  w.pop_back();
  bad["stages"][0]["neurons"]["weights"] = w;
  REQUIRE_THROWS_WITH(model_from_json(bad), "weight matrix size mismatch");

  bad = j;
  auto th = bad["stages"][0]["delay"]["theta"].get<std::vector<double>>();
  th.pop_back();
  bad["stages"][0]["delay"]["theta"] = th;
  REQUIRE_THROWS_WITH(model_from_json(bad), "delay parameter count mismatch");
}

TEST_CASE("result tables write stable headers and grouped summaries",
          "[config]")
{
  std::vector<SweepRow> rows;
  for (int k = 0; k < 5; ++k)
    rows.push_back(SweepRow{"axonal", 10, 1.85, 0.005, static_cast<uint64_t>(k),
                            210, 0.01 * (k + 1), 0.02, false});
  rows.push_back(
      SweepRow{"broadcast", 10, 1.85, 0.005, 0, 200, 0.07, 0.08, false});
  rows.push_back(
      SweepRow{"broadcast", 10, 1.85, 0.005, 1, 200, 0.09, 0.10, true});

  const std::string table = sweep_rows_to_text(rows, "echo-line");
  const std::vector<std::string> tl = split_lines(table);
  REQUIRE(tl.size() == 2 + rows.size());
  CHECK(tl[0] == "# echo-line");
  CHECK(tl[1] == "kind,hidden,span,lr,seed,params,test_err,val_err,aborted");
  CHECK(tl[2] == "axonal,10,1.85,0.005,0,210,0.01,0.02,0");
  CHECK(tl.back() == "broadcast,10,1.85,0.005,1,200,0.09,0.1,1");

  const std::string summary = sweep_summary_to_text(rows, "echo-line");
  const std::vector<std::string> sl = split_lines(summary);
  REQUIRE(sl.size() == 4);  // header comment, column line, two cells
  CHECK(sl[1] ==
        "kind,hidden,span,lr,params,n_seeds,median_test_err,iqr_test_err,"
        "incomplete");
  CHECK(sl[2].rfind("axonal,10,1.85,0.005,210,5,0.03,", 0) == 0);
  CHECK(sl[2].back() == '0');  // complete cell
  // the aborted seed is dropped from the stats and flags the cell
  CHECK(sl[3] == "broadcast,10,1.85,0.005,200,1,0.07,0,1");

  std::vector<AblationRow> ab;
  ab.push_back(AblationRow{0, "quant", "delay", 0, 0.1, false});
  ab.push_back(AblationRow{0, "quant", "delay", 1, 0.2, false});
  ab.push_back(AblationRow{0, "quant", "weight-only", 0, 0.3, false});
  ab.push_back(AblationRow{3, "full", "delay", 0, 0.5, true});
  const std::string abt = ablation_rows_to_text(ab, "e");
  const std::vector<std::string> al = split_lines(abt);
  REQUIRE(al.size() == 6);
  CHECK(al[1] == "rung,label,row,seed,test_err,aborted");
  CHECK(al[2] == "0,quant,delay,0,0.1,0");
  CHECK(al[5] == "3,full,delay,0,0.5,1");

  const std::string abs = ablation_summary_to_text(ab, "e");
  const std::vector<std::string> asl = split_lines(abs);
  REQUIRE(asl.size() == 5);
  CHECK(asl[1] == "rung,label,row,n_seeds,median_test_err,iqr_test_err");
  CHECK(asl[2] == "0,quant,delay,2,0.15,0.05");
  CHECK(asl[3] == "0,quant,weight-only,1,0.3,0");
  CHECK(asl[4] == "3,full,delay,0,1,0");  // every seed aborted
}

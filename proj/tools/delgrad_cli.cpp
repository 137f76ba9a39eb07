// Command-line entry point: dataset generation, training, gradient
// validation, sweeps, and the hardware-noise ablation ladder. All commands
// are batch-style and deterministic given (config, seed).
//
// Exit codes: 0 ok, 1 config or I/O error, 2 numerical failure (non-finite
// training state, or a gradient-check suite out of tolerance).

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "delgrad/config.hpp"
#include "delgrad/experiments.hpp"
#include "delgrad/gradcheck.hpp"
#include "delgrad/serialize.hpp"

namespace {

int pick_threads(int threads, bool reference_mode)
{
  if (reference_mode) return 1;
  if (threads > 0) return threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

std::string out_path(const delgrad::ExperimentConfig& cfg,
                     const std::string& name)
{
  std::filesystem::create_directories(cfg.output.dir);
  return (std::filesystem::path(cfg.output.dir) / name).string();
}

int cmd_gen_data(const delgrad::ExperimentConfig& cfg, std::string out)
{
  using namespace delgrad;
  const DataSplits s = make_splits(cfg.seed, cfg.dataset.n_train,
                                   cfg.dataset.n_val, cfg.dataset.n_test,
                                   cfg.encoding);
  EncodedDataset all = s.train;
  for (const EncodedDataset* d : {&s.val, &s.test}) {
    all.samples.insert(all.samples.end(), d->samples.begin(),
                       d->samples.end());
    all.times.insert(all.times.end(), d->times.begin(), d->times.end());
  }
  if (out.empty()) out = out_path(cfg, "yinyang.csv");
  write_text_file(out, dataset_to_text(all, config_echo(cfg)));
  std::printf("wrote %s (%d samples)\n", out.c_str(), all.size());
  return 0;
}

int cmd_train(const delgrad::ExperimentConfig& cfg, int threads,
              const std::string& resume_path)
{
  using namespace delgrad;
  ThreadPool pool(threads);
  const RunSpec rs = run_spec_from(cfg);
  const DataSplits data =
      make_splits(rs.tc.seed, rs.n_train, rs.n_val, rs.n_test, rs.enc);
  const std::string hash = config_hash(cfg);

  Network net;
  Adam adam;
  int start_epoch = 0;
  if (!resume_path.empty()) {
    const ModelFile m = load_model(resume_path);
    if (!m.has_adam)
      throw ConfigError("resume: model file has no optimizer state");
    if (m.config_hash != hash)
      std::fprintf(stderr,
                   "warning: resuming under a different config (%s -> %s)\n",
                   m.config_hash.c_str(), hash.c_str());
    net = m.net;
    adam = m.adam;
    start_epoch = m.epoch;
  } else {
    net = network_for(rs);
    adam.init(net, rs.tc);
  }

  TrainOutcome out =
      train(std::move(net), std::move(adam), start_epoch, data, rs.tc, &pool);
  if (out.aborted) {
    const std::string dump = out_path(cfg, "abort_dump.json");
    nlohmann::json j = model_to_json(out.net, &out.adam, out.epochs_done, hash);
    j["abort_note"] = out.abort_note;
    write_text_file(dump, j.dump(2) + "\n");
    std::fprintf(stderr, "numerical abort: %s (state dumped to %s)\n",
                 out.abort_note.c_str(), dump.c_str());
    return 2;
  }

  const std::string model_path = out_path(cfg, "model.json");
  const std::string metrics_path = out_path(cfg, "metrics.csv");
  save_model(model_path, out.net, &out.adam, out.epochs_done, hash);
  // a resumed run appends to the story; the file holds this run's epochs only
  write_text_file(metrics_path, metrics_to_text(out.log, config_echo(cfg)));
  const double test_err = evaluate(out.net, data.test, rs.tc,
                                   detail::Phase::test,
                                   static_cast<uint64_t>(rs.tc.epochs), &pool);
  std::printf("trained %d epochs, test_err=%.4f, model=%s, metrics=%s\n",
              out.epochs_done, test_err, model_path.c_str(),
              metrics_path.c_str());
  return 0;
}

int cmd_gradcheck(const delgrad::ExperimentConfig& cfg, int threads,
                  int instances, bool negative_control)
{
  using namespace delgrad;
  ThreadPool pool(threads);
  GradCheckConfig gc;
  gc.instances = instances;
  gc.seed = cfg.seed;
  gc.flip_delay_sign = negative_control;
  const std::vector<SuiteReport> reps = run_gradcheck(gc, &pool);
  bool all_pass = true;
  for (const SuiteReport& r : reps) {
    std::printf("%-28s %s  max_rel_err=%.3e  instances=%d resampled=%d%s"
                "  (%.2fs)\n",
                r.name.c_str(), r.pass ? "PASS" : "FAIL", r.max_rel_err,
                r.instances, r.resampled,
                r.name.find("vmax") != std::string::npos
                    ? ("  capped=" + std::to_string(r.capped_cases)).c_str()
                    : "",
                r.elapsed_s);
    all_pass &= r.pass;
  }
  std::printf("gradcheck: %s\n", all_pass ? "PASS" : "FAIL");
  return all_pass ? 0 : 2;
}

int cmd_sweep(const delgrad::ExperimentConfig& cfg, int threads)
{
  using namespace delgrad;
  ThreadPool pool(threads);
  const std::vector<SweepRow> rows = run_sweep(cfg, pool);
  const std::string echo = config_echo(cfg) + " mode=" + cfg.sweep.mode +
                           (cfg.sweep.mode == "span"
                                ? " (span column: input span)"
                                : cfg.sweep.mode == "frozen"
                                      ? " (span column: delay theta std)"
                                      : "");
  const std::string runs = out_path(cfg, "sweep_runs.csv");
  const std::string summary = out_path(cfg, "sweep_summary.csv");
  write_text_file(runs, sweep_rows_to_text(rows, echo));
  write_text_file(summary, sweep_summary_to_text(rows, echo));
  std::printf("sweep: %zu runs, wrote %s and %s\n", rows.size(), runs.c_str(),
              summary.c_str());
  return 0;
}

int cmd_hw_ablation(const delgrad::ExperimentConfig& cfg, int threads)
{
  using namespace delgrad;
  ThreadPool pool(threads);
  const std::vector<AblationRow> rows = run_ablation(cfg, pool);
  const std::string runs = out_path(cfg, "ablation_runs.csv");
  const std::string summary = out_path(cfg, "ablation_summary.csv");
  write_text_file(runs, ablation_rows_to_text(rows, config_echo(cfg)));
  write_text_file(summary, ablation_summary_to_text(rows, config_echo(cfg)));
  std::printf("ablation: %zu runs, wrote %s and %s\n", rows.size(),
              runs.c_str(), summary.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{
      "delgrad: spiking networks trained through exact spike-time gradients "
      "for synaptic weights and transmission delays"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  uint64_t seed = 0;
  bool have_seed = false;
  int threads = 0;
  bool reference_mode = false;
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--seed", seed, "override the config seed")
      ->each([&](const std::string&) { have_seed = true; });
  app.add_option("--threads", threads, "worker threads (0: all cores)");
  app.add_flag("--reference-mode", reference_mode,
               "single-threaded bit-reproducible mode");

  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen-data", "write the encoded dataset");
  gen->add_option("--out", gen_out, "output file (default <dir>/yinyang.csv)");

  std::string resume_path;
  CLI::App* tr = app.add_subcommand("train", "train one network");
  tr->add_option("--resume", resume_path, "model file to continue from");

  int gc_instances = 100;
  bool negative_control = false;
  CLI::App* gch = app.add_subcommand(
      "gradcheck", "finite-difference validation of analytic gradients");
  gch->add_option("--instances", gc_instances, "instances per suite");
  gch->add_flag("--negative-control", negative_control,
                "flip delay gradients; the check must then fail");

  CLI::App* sw = app.add_subcommand(
      "sweep", "size/kind, span, or frozen-delay sweep (per config)");
  CLI::App* ab = app.add_subcommand(
      "hw-ablation", "hardware-noise ablation ladder");

  CLI11_PARSE(app, argc, argv);

  try {
    delgrad::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = delgrad::load_config(config_path);
    if (have_seed) cfg.seed = seed;
    if (threads == 0) threads = cfg.threads;
    const int n_threads = pick_threads(threads, reference_mode);

    if (gen->parsed()) return cmd_gen_data(cfg, gen_out);
    if (tr->parsed()) return cmd_train(cfg, n_threads, resume_path);
    if (gch->parsed())
      return cmd_gradcheck(cfg, n_threads, gc_instances, negative_control);
    if (sw->parsed()) return cmd_sweep(cfg, n_threads);
    if (ab->parsed()) return cmd_hw_ablation(cfg, n_threads);
  } catch (const delgrad::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

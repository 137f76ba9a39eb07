#pragma once
#include <functional>
#include <string>
#include <vector>

#include "delgrad/config.hpp"

// Batch experiment drivers: the size/kind sweep, the input-span sweep, the
// frozen-delay comparison, and the hardware-noise ablation ladder. Runs are
// independent given their seeds, so they execute in parallel across a pool
// while each run stays single-threaded and deterministic.

namespace delgrad {

// Executes specs[i] for all i, in parallel across runs.
inline std::vector<RunResult> run_all(const std::vector<RunSpec>& specs,
                                      ThreadPool& pool)
{
  std::vector<RunResult> results(specs.size());
  pool.parallel_for(static_cast<int>(specs.size()), [&](int i) {
    results[i] = run_experiment(specs[i], nullptr);
  });
  return results;
}

// Hidden-size-5 hardware rule: the available weight range widens because two
// synapse circuits drive each connection.
inline void apply_small_hidden_rule(RunSpec& rs, const ExperimentConfig& c)
{
  if (rs.tc.noise.quantize && !rs.layers.empty() && rs.layers.front().size == 5)
    rs.tc.noise.quant_max *= c.noise.small_hidden_factor;
}

struct SweepPlan {
  std::vector<RunSpec> specs;
  std::vector<SweepRow> rows;  // metadata per spec; errors filled after runs
};

inline SweepPlan sweep_plan(const ExperimentConfig& c)
{
  SweepPlan plan;
  const RunSpec base = run_spec_from(c);
  std::vector<double> lrs = c.sweep.lrs;
  if (lrs.empty()) lrs = {c.training.lr_weights};

  auto push = [&](RunSpec rs, DelayKind kind, int hidden, double aux,
                  double lr, uint64_t seed) {
    set_delay_kind(rs, kind);
    set_hidden_size(rs, hidden);
    rs.tc.lr_weights = lr;
    rs.tc.lr_delays = lr;
    set_seed(rs, seed);
    apply_small_hidden_rule(rs, c);
    SweepRow row;
    row.kind = to_string(kind);
    row.hidden = hidden;
    row.span = aux;
    row.lr = lr;
    row.seed = seed;
    plan.specs.push_back(std::move(rs));
    plan.rows.push_back(std::move(row));
  };

  if (c.sweep.mode == "sizes") {
    for (const std::string& ks : c.sweep.delay_kinds)
      for (int h : c.sweep.hidden_sizes)
        for (double lr : lrs)
          for (int k = 0; k < c.sweep.seeds; ++k)
            push(base, delay_kind_from_string(ks), h, base.enc.span(), lr,
                 c.seed + static_cast<uint64_t>(k));
  } else if (c.sweep.mode == "span") {
    const int h = c.network.layers.front().size;
    for (const std::string& ks : c.sweep.delay_kinds)
      for (double span : c.sweep.spans)
        for (double lr : lrs)
          for (int k = 0; k < c.sweep.seeds; ++k) {
            RunSpec rs = base;
            set_span(rs, c, span);
            push(std::move(rs), delay_kind_from_string(ks), h, span, lr,
                 c.seed + static_cast<uint64_t>(k));
          }
  } else {  // frozen: random but fixed delays; aux column holds the theta std
    const int h = c.network.layers.front().size;
    for (const std::string& ks : c.sweep.delay_kinds) {
      const DelayKind kind = delay_kind_from_string(ks);
      const bool baseline = kind == DelayKind::none;
      for (double std : c.sweep.frozen_stds) {
        if (baseline && std != c.sweep.frozen_stds.front()) continue;
        for (double lr : lrs)
          for (int k = 0; k < c.sweep.seeds; ++k) {
            RunSpec rs = base;
            rs.tc.freeze_delays = true;
            for (LayerSpec& l : rs.layers) l.delay_theta_std = std;
            push(std::move(rs), kind, h, baseline ? 0.0 : std, lr,
                 c.seed + static_cast<uint64_t>(k));
          }
      }
    }
  }
  return plan;
}

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& c,
                                       ThreadPool& pool)
{
  SweepPlan plan = sweep_plan(c);
  const std::vector<RunResult> results = run_all(plan.specs, pool);
  for (size_t i = 0; i < results.size(); ++i) {
    plan.rows[i].params = results[i].param_count;
    plan.rows[i].test_err = results[i].test_err;
    plan.rows[i].val_err = results[i].val_err;
    plan.rows[i].aborted = results[i].aborted;
  }
  return plan.rows;
}

// --- hardware-noise ablation ladder ------------------------------------------
//
// Rungs add effects cumulatively: 0 ideal simulation parameters, 1 hardware
// parameters without noise, 2 +weight quantization (and channel
// multiplexing), 3 +fixed-pattern noise, 4 +trial-to-trial noise, 5 +delay
// jitter. Jitter touches delay elements only, so for the weight-only row the
// last rung equals the previous one and is copied instead of re-run.

inline const char* ablation_label(int rung)
{
  switch (rung) {
    case 0: return "ideal";
    case 1: return "simu";
    case 2: return "+WQ";
    case 3: return "+FP";
    case 4: return "+T2T";
    default: return "+jitter";
  }
}

inline ExperimentConfig ablation_ideal_config(const ExperimentConfig& c)
{
  ExperimentConfig ic = preset_config("ideal");
  ic.seed = c.seed;
  ic.dataset = c.dataset;
  ic.encoding = c.encoding;
  ic.sweep = c.sweep;
  ic.output = c.output;
  ic.training.epochs = c.training.epochs;
  for (size_t i = 0; i + 1 < ic.network.layers.size(); ++i)
    ic.network.layers[i].size = c.network.layers.front().size;
  return ic;
}

inline RunSpec ablation_run_spec(const ExperimentConfig& c, int rung,
                                 bool delay_row, uint64_t seed)
{
  RunSpec rs =
      rung == 0 ? run_spec_from(ablation_ideal_config(c)) : run_spec_from(c);
  NoiseModel& m = rs.tc.noise;
  if (rung >= 1) {
    m.quantize = false;
    m.fixed_pattern = false;
    m.trial_to_trial = false;
    m.delay_jitter = false;
    m.multiplex = 1;
  }
  if (rung >= 2) {
    m.quantize = true;
    m.multiplex = c.noise.model.multiplex;
  }
  if (rung >= 3) m.fixed_pattern = true;
  if (rung >= 4) m.trial_to_trial = true;
  if (rung >= 5) m.delay_jitter = true;
  set_delay_kind(rs, delay_row ? DelayKind::axonal : DelayKind::none);
  set_seed(rs, seed);
  apply_small_hidden_rule(rs, c);
  return rs;
}

inline std::vector<AblationRow> run_ablation(const ExperimentConfig& c,
                                             ThreadPool& pool)
{
  std::vector<RunSpec> specs;
  std::vector<AblationRow> rows;
  for (int rung = 0; rung <= 5; ++rung)
    for (int dr = 1; dr >= 0; --dr) {
      if (rung == 5 && dr == 0) continue;  // copied from rung 4 below
      for (int k = 0; k < c.sweep.seeds; ++k) {
        const uint64_t seed = c.seed + static_cast<uint64_t>(k);
        specs.push_back(ablation_run_spec(c, rung, dr == 1, seed));
        AblationRow row;
        row.rung = rung;
        row.label = ablation_label(rung);
        row.row = dr == 1 ? "delay" : "weight-only";
        row.seed = seed;
        rows.push_back(std::move(row));
      }
    }
  const std::vector<RunResult> results = run_all(specs, pool);
  for (size_t i = 0; i < results.size(); ++i) {
    rows[i].test_err = results[i].test_err;
    rows[i].aborted = results[i].aborted;
  }
  std::vector<AblationRow> copies;
  for (const AblationRow& r : rows)
    if (r.rung == 4 && r.row == "weight-only") {
      AblationRow cp = r;
      cp.rung = 5;
      cp.label = ablation_label(5);
      copies.push_back(std::move(cp));
    }
  rows.insert(rows.end(), copies.begin(), copies.end());
  return rows;
}

}  // namespace delgrad

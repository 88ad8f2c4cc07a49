// SPDX-License-Identifier: Apache-2.0
/**
 * @file   acceptance_main.cpp
 * @brief  Acceptance suite. Prints one PASS/FAIL line per criterion and
 *         exits nonzero if any criterion fails.
 *
 * Usage: idmf_acceptance [--out DIR] [criterion ...]
 *
 * With no criterion numbers every criterion runs. `--out` writes the sweep
 * reports used by criteria 4 and 5.
 */
#include <idmf/error.hpp>
#include <idmf/evaluator.hpp>
#include <idmf/follower_net.hpp>
#include <idmf/gps_noise.hpp>
#include <idmf/idm.hpp>
#include <idmf/metrics.hpp>
#include <idmf/parallel.hpp>
#include <idmf/random.hpp>
#include <idmf/scenario.hpp>
#include <idmf/trainer.hpp>
#include <idmf/trajectory.hpp>
#include <idmf/trajectory_io.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace idmf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const IdmParams kSumo = idm_preset("sumo");
constexpr std::uint64_t kSeed = 7;
std::filesystem::path g_out;

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const SimDataset d = build_dataset(20, {}, kSumo, kSeed);
  const auto windows = window_pairs(d.pairs, 10, 10);
  const auto samples =
    noisy_samples(windows, noise_preset("middle"), {}, derive_seed(kSeed, 1));
  std::vector<SequenceWindow> batch{samples[0].observed, samples[1].observed};
  std::vector<std::vector<double>> labels{
    batch[0].pair.follower.positions, batch[1].pair.follower.positions};
  const ModelTargets targets =
    precompute_model_targets(batch, kSumo, ModelTargetMode::OpenLoop);
  // A collapsed noisy window would silently drop the physics term.
  if (targets.excluded != 0)
    return {false, "physics target excluded for a checked window"};

  NetConfig nc;
  nc.hidden = 8;
  nc.horizon = 10;
  FollowerNet net = init_params(nc, kSeed);
  std::vector<ad::Tensor *> params;
  for (auto &p : net.parameters())
    params.push_back(p.tensor);

  bool pass = true;
  std::string detail = "max relative error";
  std::size_t checked = 0;
  for (double mu : {0.0, 0.5, 1.0}) {
    const auto r = ad::grad_check(
      [&](ad::Tape &tape, std::span<const ad::Var> v) {
        return hybrid_loss_graph(tape, net_vars_from(v, nc.layers), nc, batch,
                                 labels, targets.positions, targets.valid, mu);
      },
      params, 1e-5, 1e-4);
    pass = pass && r.passed;
    checked = r.checked;
    detail += " mu=" + fmt("%g", mu) + ": " + fmt("%.2e", r.max_relative_error);
  }
  return {pass, detail + " over " + std::to_string(checked) + " parameters"};
}

// ---------------------------------------------------------------------------

Outcome physics_suite() {
  std::vector<std::string> failures;

  if (idm_acceleration(0.0, 0.0, kSumo.s0, kSumo) != 0.0)
    failures.push_back("a(0, 0, s0) != 0");

  double worst_drift = 0.0;
  for (double v : {5.0, 10.0, 15.0}) {
    const double se = equilibrium_gap(v, kSumo);
    Trajectory lead;
    for (std::size_t k = 0; k <= 80; ++k) {
      lead.positions.push_back(se + v * 0.1 * static_cast<double>(k));
      lead.velocities.push_back(v);
    }
    const Trajectory f = closed_loop_rollout(lead, 0.0, v, kSumo);
    for (std::size_t k = 0; k < f.size(); ++k)
      worst_drift = std::max(
        worst_drift, std::abs(lead.positions[k] - f.positions[k] - se));
  }
  if (worst_drift > 0.05)
    failures.push_back("equilibrium drift " + fmt("%.3g", worst_drift));

  const SimDataset d = build_dataset(100, {}, kSumo, kSeed);
  const auto windows = window_pairs(d.pairs, 80, 80);
  // Dataset-level score, as the evaluator reports it; the worst window is
  // printed for information only.
  double mean_rmse = 0.0, worst_rmse = 0.0;
  for (const auto &w : windows) {
    const double r =
      rmse(open_loop_positions(w, kSumo), w.pair.follower.positions);
    mean_rmse += r;
    worst_rmse = std::max(worst_rmse, r);
  }
  if (!windows.empty())
    mean_rmse /= static_cast<double>(windows.size());
  if (windows.empty() || mean_rmse >= 0.05)
    failures.push_back("open-loop RMSE " + fmt("%.3g", mean_rmse));

  Rng rng(kSeed);
  double worst_ballistic = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double a = rng.uniform(-1.0, 3.0);
    const double v0 = rng.uniform(8.0, 25.0);
    const std::vector<double> acc(80, a);
    const auto s = double_integrate(acc, 0.0, v0);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const long double t = 0.1L * static_cast<long double>(k);
      const long double exact = v0 * t + 0.5L * a * t * t;
      worst_ballistic = std::max(
        worst_ballistic, static_cast<double>(std::fabs(s[k] - exact)));
    }
  }
  if (worst_ballistic >= 1e-12)
    failures.push_back("ballistic error " + fmt("%.3g", worst_ballistic));

  std::string detail = "equilibrium drift " + fmt("%.2e", worst_drift) +
                       " m, open-loop RMSE " + fmt("%.2e", mean_rmse) +
                       " m over " + std::to_string(windows.size()) +
                       " windows (worst " + fmt("%.2e", worst_rmse) +
                       "), ballistic error " +
                       fmt("%.2e", worst_ballistic) + " m";
  for (const auto &f : failures)
    detail += "; " + f;
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------

Outcome noise_statistics() {
  struct Target {
    const char *level;
    double mae;
  };
  bool pass = true;
  std::string detail;
  for (const Target t : {Target{"small", 1.79}, Target{"middle", 5.63},
                         Target{"big", 10.48}}) {
    const ArmaNoiseParams p = noise_preset(t.level);
    const auto e = generate_noise(p, 1000000, derive_seed(kSeed, label_seed(t.level)));
    double abs_sum = 0.0;
    for (double x : e)
      abs_sum += std::abs(x);
    const double mae = abs_sum / static_cast<double>(e.size());
    const double mean =
      std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
    // Batch-means standard error; the series is autocorrelated.
    constexpr std::size_t L = 1000;
    std::vector<double> blocks;
    for (std::size_t i = 0; i + L <= e.size(); i += L)
      blocks.push_back(std::accumulate(e.begin() + static_cast<long>(i),
                                       e.begin() + static_cast<long>(i + L), 0.0) /
                       static_cast<double>(L));
    double var = 0.0;
    for (double b : blocks)
      var += (b - mean) * (b - mean);
    var /= static_cast<double>(blocks.size() - 1);
    const double se = std::sqrt(var / static_cast<double>(blocks.size()));
    const bool mae_ok = std::abs(mae / t.mae - 1.0) <= 0.25;
    const bool mean_ok = std::abs(mean - p.mean) <= 3.0 * se;
    pass = pass && mae_ok && mean_ok;
    detail += std::string(detail.empty() ? "" : "; ") + t.level + " MAE " +
              fmt("%.3f", mae) + " (target " + fmt("%.2f", t.mae) + "), mean " +
              fmt("%.4f", mean) + " vs " + fmt("%.4f", p.mean) + " (SE " +
              fmt("%.4f", se) + ")";
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------

struct DeskData {
  DatasetSplit split;
  SweepSetup setup;
};

const DeskData &desk_data() {
  static const DeskData data = [] {
    DeskData d;
    const SimDataset ds = build_dataset(1000, {}, kSumo, kSeed);
    d.split = split_dataset(window_pairs(ds.pairs, 80, 80), {}, kSeed);
    d.setup.net.hidden = 32;
    d.setup.net_seed = kSeed;
    d.setup.train.max_epochs = 30;
    d.setup.train.seed = kSeed;
    d.setup.max_train_windows = 200;
    d.setup.max_validation_windows = 200;
    return d;
  }();
  return data;
}

void save_report(const MetricReport &r, const std::string &name) {
  if (!g_out.empty())
    emit_report(r, g_out / name);
}

const MetricRow *find_row(const MetricReport &r, const std::string &tag,
                          double mu, const std::string &level,
                          const std::string &preset) {
  for (const auto &row : r.rows)
    if (row.tag == tag && row.mu == mu && row.noise_level == level &&
        (tag == "learning" || row.idm_preset == preset))
      return &row;
  return nullptr;
}

std::string row_text(const MetricRow &r) {
  return r.failed ? "failed (" + r.error + ")" : fmt("%.3f", r.rmse);
}

Outcome desk_ordering() {
  const DeskData &d = desk_data();
  SweepSpec spec;
  spec.mu_values = {1.0, 0.7, 0.5, 0.3, 0.0};
  spec.noise_levels = {"middle"};
  spec.idm_presets = {"sumo"};
  spec.data_seed = kSeed;
  const MetricReport r = sweep(spec, d.split, d.setup);
  save_report(r, "desk_sweep");
  const MetricRow *learning = find_row(r, "learning", 1.0, "middle", "");
  const MetricRow *hybrid = find_row(r, "hybrid", 0.7, "middle", "sumo");
  const MetricRow *idm = find_row(r, "idm", 0.0, "middle", "sumo");
  if (!learning || !hybrid || !idm)
    return {false, "sweep did not produce the expected rows"};
  const bool ok = !learning->failed && !hybrid->failed && !idm->failed;
  const bool hybrid_better = ok && hybrid->rmse < learning->rmse;
  const bool idm_better = ok && idm->rmse < learning->rmse;
  return {hybrid_better && idm_better,
          "middle noise RMSE: hybrid(0.7) " + row_text(*hybrid) +
            (hybrid_better ? " < " : " !< ") + "learning " +
            row_text(*learning) + "; IDM " + row_text(*idm) +
            (idm_better ? " < " : " !< ") + "learning; IDM excluded " +
            std::to_string(idm->excluded) + " of " +
            std::to_string(idm->count + idm->excluded) + " windows"};
}

Outcome misspecified_physics() {
  const DeskData &d = desk_data();
  SweepSpec spec;
  spec.mu_values = {0.7};
  spec.noise_levels = {"small", "middle", "big"};
  spec.idm_presets = {"sumo", "ngsim-yang2022"};
  spec.data_seed = kSeed;
  const MetricReport r = sweep(spec, d.split, d.setup);
  save_report(r, "preset_sweep");
  bool pass = true;
  std::string detail = "hybrid(0.7) RMSE ngsim-yang2022 vs sumo:";
  for (const auto &level : spec.noise_levels) {
    const MetricRow *sumo = find_row(r, "hybrid", 0.7, level, "sumo");
    const MetricRow *ngsim = find_row(r, "hybrid", 0.7, level, "ngsim-yang2022");
    if (!sumo || !ngsim || sumo->failed || ngsim->failed)
      return {false, "missing or failed cell at " + level};
    const bool ok = ngsim->rmse >= sumo->rmse;
    pass = pass && ok;
    detail += " " + level + " " + fmt("%.3f", ngsim->rmse) +
              (ok ? " >= " : " < ") + fmt("%.3f", sumo->rmse) + ";";
  }
  detail.pop_back();
  return {pass, detail};
}

// ---------------------------------------------------------------------------

Outcome metric_oracles() {
  Rng rng(kSeed);
  double worst_rmse = 0.0, worst_fde = 0.0;
  bool bound = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(200);
    std::vector<double> p(n), t(n);
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = rng.normal(0.0, 30.0);
      t[k] = rng.normal(0.0, 30.0);
    }
    // Independent accumulation in extended precision.
    long double acc = 0.0L;
    for (std::size_t k = 0; k < n; ++k) {
      const long double e = static_cast<long double>(p[k]) - t[k];
      acc += e * e;
    }
    const double brute = static_cast<double>(std::sqrt(acc / n));
    const double brute_fde =
      static_cast<double>(std::fabs(static_cast<long double>(p.back()) - t.back()));
    const double r = rmse(p, t);
    const double f = fde(p, t);
    worst_rmse = std::max(worst_rmse, std::abs(r - brute) / std::max(1.0, brute));
    worst_fde = std::max(worst_fde, std::abs(f - brute_fde));
    bound = bound && f <= std::sqrt(static_cast<double>(n)) * r * (1.0 + 1e-12);
  }
  const bool pass = worst_rmse <= 1e-12 && worst_fde <= 1e-12 && bound;
  return {pass, "1000 random pairs: RMSE deviation " + fmt("%.2e", worst_rmse) +
                  ", FDE deviation " + fmt("%.2e", worst_fde) +
                  ", FDE <= sqrt(H) RMSE " + (bound ? "holds" : "violated")};
}

// ---------------------------------------------------------------------------

/// Every stage of a small pipeline, serialized to bytes.
std::vector<std::string> pipeline_bytes() {
  std::vector<std::string> out;
  const SimDataset ds = build_dataset(60, {}, kSumo, kSeed);
  std::ostringstream csv;
  write_pairs_csv(csv, ds.pairs);
  out.push_back(csv.str());
  out.push_back(scenario_manifest_json(ds, {}, kSeed));

  const auto windows = window_pairs(ds.pairs, 40, 40);
  const DatasetSplit split = split_dataset(windows, {}, kSeed);
  const SampleSplit s =
    make_sample_split(split, "middle", {}, kSeed, 48, 16);
  std::vector<SequenceWindow> noisy;
  for (const auto &x : s.train)
    noisy.push_back(x.observed);
  std::vector<TrajectoryPair> noisy_pairs;
  for (const auto &w : noisy)
    noisy_pairs.push_back(w.pair);
  std::ostringstream ncsv;
  write_pairs_csv(ncsv, noisy_pairs);
  out.push_back(ncsv.str());

  const ModelTargets mt =
    precompute_model_targets(noisy, kSumo, ModelTargetMode::OpenLoop);
  std::ostringstream mts;
  for (const auto &p : mt.positions)
    for (double x : p)
      mts << fmt("%.17g", x) << ',';
  out.push_back(mts.str());

  NetConfig nc;
  nc.hidden = 6;
  nc.horizon = 40;
  TrainConfig tc;
  tc.batch_size = 16;
  tc.max_epochs = 3;
  tc.seed = kSeed;
  const TrainResult tr =
    train(init_params(nc, kSeed), s.train, s.validation, kSumo, tc);
  out.push_back(train_record_csv(tr.record));
  out.push_back(checkpoint_bytes(tr.net));

  MetricReport rep;
  rep.rows.push_back(evaluate_model(tr.net, s.test));
  rep.rows.push_back(evaluate_idm_baseline(s.test, kSumo));
  out.push_back(report_csv(rep));

  SweepSpec spec;
  spec.mu_values = {0.5};
  spec.noise_levels = {"small"};
  spec.data_seed = kSeed;
  SweepSetup setup;
  setup.net = nc;
  setup.train = tc;
  setup.train.max_epochs = 1;
  setup.net_seed = kSeed;
  setup.max_train_windows = 24;
  setup.max_validation_windows = 8;
  out.push_back(report_csv(sweep(spec, split, setup)));

  const std::vector<TrajectoryPair> few(ds.pairs.begin(), ds.pairs.begin() + 8);
  const CalibrationResult cal = calibrate_idm(few, {}, {4, 150});
  out.push_back(to_json(cal.params) + fmt("%.17g", cal.fde));
  return out;
}

Outcome reproducibility() {
  std::vector<std::vector<std::string>> runs;
  const std::vector<std::size_t> threads{1, 1, 2, 4, 8};
  for (std::size_t n : threads) {
    set_thread_count(n);
    runs.push_back(pipeline_bytes());
  }
  set_thread_count(0);
  std::set<std::size_t> differing;
  for (std::size_t r = 1; r < runs.size(); ++r)
    for (std::size_t i = 0; i < runs[0].size(); ++i)
      if (runs[r][i] != runs[0][i])
        differing.insert(i);
  std::string detail = std::to_string(runs[0].size()) +
                       " stage outputs compared across thread counts 1,1,2,4,8";
  if (!differing.empty()) {
    detail += "; differing stages:";
    for (std::size_t i : differing)
      detail += " " + std::to_string(i);
  } else {
    detail += "; all bit-identical";
  }
  return {differing.empty(), detail};
}

// ---------------------------------------------------------------------------

Outcome calibration() {
  const SimDataset ds = build_dataset(200, {}, kSumo, kSeed);
  std::vector<TrajectoryPair> pairs(ds.pairs.begin(),
                                    ds.pairs.begin() + std::min<std::size_t>(200, ds.pairs.size()));
  if (pairs.size() < 200)
    return {false, "fewer than 200 pairs generated"};
  const CalibrationResult r = calibrate_idm(pairs);
  const auto within = [](double got, double want) {
    return std::abs(got - want) <= 0.1 * want;
  };
  const bool params_ok = within(r.params.v0, kSumo.v0) &&
                         within(r.params.time_headway, kSumo.time_headway) &&
                         within(r.params.s0, kSumo.s0);
  const double self_fde = validate_fde(pairs, kSumo).mean_fde;
  return {params_ok && self_fde < 1e-6,
          "recovered v0 " + fmt("%.3f", r.params.v0) + ", T " +
            fmt("%.3f", r.params.time_headway) + ", s0 " +
            fmt("%.3f", r.params.s0) + " (FDE " + fmt("%.2e", r.fde) + " m, " +
            std::to_string(r.evaluations) +
            " evaluations); FDE with true parameters " + fmt("%.2e", self_fde) +
            " m"};
}

struct Criterion {
  int id;
  const char *name;
  std::function<Outcome()> run;
};

} // namespace

int main(int argc, char **argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      try {
        selected.insert(std::stoi(a));
      } catch (...) {
        std::fprintf(stderr, "usage: idmf_acceptance [--out DIR] [N ...]\n");
        return 2;
      }
    }
  }

  const std::vector<Criterion> criteria{
    {1, "gradient correctness", gradient_correctness},
    {2, "IDM physics suite", physics_suite},
    {3, "noise statistics", noise_statistics},
    {4, "desk-scale method ordering", desk_ordering},
    {5, "mis-specified physics degrades hybrid", misspecified_physics},
    {6, "metric oracles", metric_oracles},
    {7, "reproducibility", reproducibility},
    {8, "calibration self-consistency", calibration},
  };

  int failed = 0;
  for (const auto &c : criteria) {
    if (!selected.empty() && !selected.count(c.id))
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    failed += o.pass ? 0 : 1;
    std::printf("criterion %d %s: %s (%s; %.1f s)\n", c.id, c.name,
                o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

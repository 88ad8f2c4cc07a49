// SPDX-License-Identifier: Apache-2.0
/**
 * @file   commands.cpp
 * @brief  idmf subcommands.
 */
#include "commands.hpp"

#include <idmf/error.hpp>
#include <idmf/evaluator.hpp>
#include <idmf/svg_plot.hpp>
#include <idmf/trajectory_io.hpp>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <unordered_map>

namespace idmf::cli {

namespace fs = std::filesystem;

namespace {

void log(const std::string &line) { std::fprintf(stderr, "%s\n", line.c_str()); }

std::string num(const char *spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

fs::path out_path(const RunConfig &c, const std::string &name) {
  return fs::path(c.out_dir) / name;
}

void echo_config(const RunConfig &c) {
  write_text_file(out_path(c, "run_config.json"), to_json(c));
}

std::string noisy_file_name(const std::string &level) {
  return "noisy_" + level + ".csv";
}

DatasetSplit load_split(const RunConfig &c) {
  const auto pairs = load_csv(fs::path(c.data_dir) / "pairs.csv");
  const auto windows =
    window_pairs(pairs, c.horizon, c.stride, c.gap_threshold);
  if (windows.empty())
    throw InputError("no windows of horizon " + std::to_string(c.horizon) +
                     " in '" + c.data_dir + "'");
  return split_dataset(windows, c.split, c.seed);
}

std::string window_id(const SequenceWindow &w) { return w.pair.pair_id; }

/// Noisy samples for the configured level. A noisy_<level>.csv in the data
/// directory replaces the generated observation for every window it lists.
SampleSplit load_samples(const RunConfig &c) {
  const DatasetSplit split = load_split(c);
  SampleSplit s = make_sample_split(split, c.noise_level, c.channels, c.seed,
                                    c.max_train_windows,
                                    c.max_validation_windows);
  const fs::path noisy = fs::path(c.data_dir) / noisy_file_name(c.noise_level);
  if (c.noise_level == "none" || !fs::exists(noisy))
    return s;
  std::unordered_map<std::string, TrajectoryPair> by_id;
  for (auto &p : load_csv(noisy))
    by_id.emplace(p.pair_id, std::move(p));
  for (auto *part : {&s.train, &s.validation, &s.test})
    for (auto &sample : *part) {
      const auto it = by_id.find(window_id(sample.truth));
      if (it == by_id.end())
        throw InputError("'" + noisy.string() + "' lacks window '" +
                         window_id(sample.truth) + "'");
      if (it->second.size() != sample.truth.horizon())
        throw InputError("window '" + it->first + "' has horizon " +
                         std::to_string(it->second.size()) + ", expected " +
                         std::to_string(sample.truth.horizon()));
      sample.observed.pair = it->second;
      sample.observed.pair.pair_id = sample.truth.pair.pair_id;
    }
  return s;
}

std::string row_tag(double mu) { return mu >= 1.0 ? "learning" : "hybrid"; }

} // namespace

// ---------------------------------------------------------------------------

void run_simulate(const RunConfig &c) {
  const IdmParams params = idm_preset(c.idm_preset);
  const SimDataset ds = build_dataset(c.n_scenarios, c.mix, params, c.seed,
                                      c.gap_threshold);
  save_csv(ds.pairs, out_path(c, "pairs.csv"));
  write_text_file(out_path(c, "scenarios.json"),
                  scenario_manifest_json(ds, c.mix, c.seed));

  const auto windows =
    window_pairs(ds.pairs, c.horizon, c.stride, c.gap_threshold);
  const auto idx = split_indices(windows.size(), c.split, c.seed);
  DatasetManifest m;
  m.dt = ds.pairs.empty() ? kDefaultDt : ds.pairs.front().dt();
  m.horizon = c.horizon;
  m.stride = c.stride;
  m.gap_threshold = c.gap_threshold;
  m.seed = c.seed;
  m.ratios = c.split;
  m.pair_count = ds.pairs.size();
  m.train_windows = idx.train.size();
  m.validation_windows = idx.validation.size();
  m.test_windows = idx.test.size();
  save_manifest(m, out_path(c, "manifest.json"));
  echo_config(c);
  log("simulate: " + std::to_string(ds.pairs.size()) + " pairs, " +
      std::to_string(windows.size()) + " windows, " +
      std::to_string(ds.rejected) + " redraws -> " + c.out_dir);
}

void run_noise(const RunConfig &c) {
  if (c.noise_level == "none")
    throw ConfigError("noise: level 'none' produces no noisy dataset");
  const DatasetSplit split = load_split(c);
  const SampleSplit s =
    make_sample_split(split, c.noise_level, c.channels, c.seed);
  std::vector<TrajectoryPair> pairs;
  for (const auto *part : {&s.train, &s.validation, &s.test})
    for (const auto &sample : *part)
      pairs.push_back(sample.observed.pair);
  save_csv(pairs, out_path(c, noisy_file_name(c.noise_level)));
  write_text_file(out_path(c, "noise_" + c.noise_level + ".json"),
                  to_json(noise_preset(c.noise_level)));
  echo_config(c);
  log("noise: " + std::to_string(pairs.size()) + " windows at level " +
      c.noise_level + " -> " + c.out_dir);
}

void run_train(const RunConfig &c) {
  const SampleSplit s = load_samples(c);
  NetConfig nc = c.net;
  nc.horizon = c.horizon;
  const FollowerNet init = init_params(nc, c.seed);
  TrainConfig tc = c.train;
  tc.seed = c.seed;
  log("train: " + std::to_string(s.train.size()) + " training, " +
      std::to_string(s.validation.size()) + " validation windows, " +
      std::to_string(init.parameter_count()) + " parameters");
  const TrainResult r =
    train(init, s.train, s.validation, idm_preset(c.idm_preset), tc,
          [](const EpochReport &e) {
            log("epoch " + std::to_string(e.epoch) + " train " +
                num("%.4f", e.train_loss) + " val " +
                num("%.4f", e.validation_loss) + (e.improved ? " *" : ""));
          });
  save_checkpoint(r.net, out_path(c, "model.ckpt"));
  write_text_file(out_path(c, "train_record.csv"),
                  train_record_csv(r.record));
  write_svg(loss_curve_svg(r.record), out_path(c, "loss.svg"));
  echo_config(c);
  log("train: best epoch " + std::to_string(r.record.best_epoch + 1) +
      ", physics targets excluded " +
      std::to_string(r.model_target_excluded) + " -> " + c.out_dir);
}

void run_eval(const RunConfig &c) {
  const FollowerNet net = load_checkpoint(c.checkpoint);
  if (net.config.horizon != c.horizon)
    throw InputError("checkpoint horizon " +
                     std::to_string(net.config.horizon) +
                     " does not match data horizon " +
                     std::to_string(c.horizon));
  const SampleSplit s = load_samples(c);
  MetricReport report;
  MetricRow row = evaluate_model(net, s.test);
  row.tag = row_tag(c.train.mu);
  row.mu = c.train.mu;
  row.noise_level = c.noise_level;
  row.idm_preset = c.train.mu >= 1.0 ? "" : c.idm_preset;
  report.rows.push_back(row);
  MetricRow idm = evaluate_idm_baseline(s.test, idm_preset(c.idm_preset));
  idm.noise_level = c.noise_level;
  idm.idm_preset = c.idm_preset;
  report.rows.push_back(idm);
  emit_report(report, c.out_dir);
  echo_config(c);
  for (const auto &r : report.rows)
    log("eval: " + r.tag + " rmse " + num("%.4f", r.rmse) + " fde " +
        num("%.4f", r.fde) + " (" + std::to_string(r.count) + " windows)");
}

void run_sweep(const RunConfig &c) {
  const DatasetSplit split = load_split(c);
  SweepSpec spec = c.sweep;
  spec.data_seed = c.seed;
  spec.channels = c.channels;
  SweepSetup setup;
  setup.net = c.net;
  setup.net.horizon = c.horizon;
  setup.train = c.train;
  setup.train.seed = c.seed;
  setup.net_seed = c.seed;
  setup.max_train_windows = c.max_train_windows;
  setup.max_validation_windows = c.max_validation_windows;
  const MetricReport report = sweep(spec, split, setup, [&](const SweepCell &cell) {
    const auto &r = cell.row;
    std::string name = r.tag + "_mu" + num("%g", r.mu) + "_" + r.noise_level;
    if (!r.idm_preset.empty())
      name += "_" + r.idm_preset;
    if (cell.record) {
      write_text_file(out_path(c, "records/" + name + ".csv"),
                      train_record_csv(*cell.record));
      write_svg(loss_curve_svg(*cell.record, name),
                out_path(c, "plots/loss_" + name + ".svg"));
    }
    log("sweep: " + name +
        (r.failed ? " failed: " + r.error
                  : " rmse " + num("%.4f", r.rmse) + " fde " +
                      num("%.4f", r.fde)));
  });
  emit_report(report, c.out_dir);
  echo_config(c);
}

void run_calibrate(const RunConfig &c) {
  auto pairs = load_csv(fs::path(c.data_dir) / "pairs.csv");
  if (c.calibrate_max_pairs > 0 && pairs.size() > c.calibrate_max_pairs)
    pairs.resize(c.calibrate_max_pairs);
  const CalibrationResult r =
    calibrate_idm(pairs, CalibrationBounds{}, c.calibrate_budget);
  nlohmann::ordered_json j;
  j["params"] = nlohmann::ordered_json::parse(to_json(r.params));
  j["fde"] = r.fde;
  j["pairs"] = pairs.size();
  j["evaluations"] = r.evaluations;
  j["sweeps"] = r.sweeps;
  write_text_file(out_path(c, "idm_params.json"), to_json(r.params));
  write_text_file(out_path(c, "calibration.json"), j.dump(2) + "\n");
  echo_config(c);
  log("calibrate: fde " + num("%.4f", r.fde) + " m over " +
      std::to_string(pairs.size()) + " pairs");
}

void run_plot(const RunConfig &c) {
  bool wrote = false;
  if (!c.plot_record.empty()) {
    const TrainRecord rec = train_record_from_csv(read_text_file(c.plot_record));
    write_svg(loss_curve_svg(rec), out_path(c, "loss.svg"));
    wrote = true;
  }
  if (!c.plot_learning_checkpoint.empty() ||
      !c.plot_hybrid_checkpoint.empty()) {
    if (c.plot_learning_checkpoint.empty() || c.plot_hybrid_checkpoint.empty())
      throw ConfigError(
        "plot: both plot.learning_checkpoint and plot.hybrid_checkpoint "
        "are required for a trajectory overlay");
    const FollowerNet learning = load_checkpoint(c.plot_learning_checkpoint);
    const FollowerNet hybrid = load_checkpoint(c.plot_hybrid_checkpoint);
    const SampleSplit s = load_samples(c);
    if (c.plot_window >= s.test.size())
      throw InputError("plot.window " + std::to_string(c.plot_window) +
                       " is out of range (" + std::to_string(s.test.size()) +
                       " test windows)");
    const TrainingSample &w = s.test[c.plot_window];
    TrajectoryOverlay ov;
    ov.dt = w.truth.pair.dt();
    ov.leader = w.truth.pair.leader.positions;
    ov.follower = w.truth.pair.follower.positions;
    ov.learning = predict(learning, w.observed);
    ov.hybrid = predict(hybrid, w.observed);
    try {
      ov.model = closed_loop_rollout(w.observed.pair.leader,
                                     w.observed.pair.follower.positions.front(),
                                     w.observed.follower_initial_velocity,
                                     idm_preset(c.idm_preset),
                                     IntegrationConfig{ov.dt, 0.0})
                   .positions;
    } catch (const DomainError &) {
      ov.model.clear();
    }
    write_svg(trajectory_overlay_svg(ov, "Window " + window_id(w.truth)),
              out_path(c, "trajectory.svg"));
    wrote = true;
  }
  if (!wrote)
    throw ConfigError("plot: set plot.record and/or plot.learning_checkpoint "
                      "with plot.hybrid_checkpoint");
  echo_config(c);
  log("plot: -> " + c.out_dir);
}

// ---------------------------------------------------------------------------

const std::vector<std::string> &command_names() {
  static const std::vector<std::string> names{
    "simulate", "noise", "train", "eval", "sweep", "calibrate", "plot"};
  return names;
}

void run_command(const std::string &name, const RunConfig &c) {
  if (name == "simulate")
    run_simulate(c);
  else if (name == "noise")
    run_noise(c);
  else if (name == "train")
    run_train(c);
  else if (name == "eval")
    run_eval(c);
  else if (name == "sweep")
    run_sweep(c);
  else if (name == "calibrate")
    run_calibrate(c);
  else if (name == "plot")
    run_plot(c);
  else
    throw ConfigError("unknown command '" + name + "'");
}

namespace {

const char *error_kind(const std::exception &e) {
  if (dynamic_cast<const ConfigError *>(&e))
    return "config";
  if (dynamic_cast<const ParseError *>(&e))
    return "parse";
  if (dynamic_cast<const CheckpointError *>(&e))
    return "checkpoint";
  if (dynamic_cast<const InputError *>(&e))
    return "input";
  if (dynamic_cast<const DomainError *>(&e))
    return "domain";
  if (dynamic_cast<const ShapeError *>(&e))
    return "shape";
  if (dynamic_cast<const TrainingError *>(&e))
    return "training";
  return "internal";
}

} // namespace

std::string error_line(const std::exception &e) {
  nlohmann::ordered_json j;
  j["status"] = "error";
  j["kind"] = error_kind(e);
  j["message"] = e.what();
  return j.dump();
}

int exit_code(const std::exception &e) {
  const std::string kind = error_kind(e);
  if (kind == "config")
    return 2;
  if (kind == "input" || kind == "parse" || kind == "checkpoint")
    return 3;
  if (kind == "internal")
    return 1;
  return 4;
}

TrainRecord train_record_from_csv(const std::string &text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_loss,val_loss")
    throw ParseError("training record: unexpected header", 1);
  TrainRecord rec;
  double best = 0.0;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty())
      continue;
    std::size_t epoch = 0;
    double tr = 0.0, va = 0.0;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf", &epoch, &tr, &va) != 3)
      throw ParseError("training record: line " + std::to_string(n) +
                         " is malformed",
                       n);
    rec.train_loss.push_back(tr);
    rec.validation_loss.push_back(va);
    rec.wall_seconds.push_back(0.0);
    if (rec.epochs() == 1 || va < best) {
      best = va;
      rec.best_epoch = rec.epochs() - 1;
    }
  }
  return rec;
}

} // namespace idmf::cli

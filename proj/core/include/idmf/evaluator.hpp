// SPDX-License-Identifier: Apache-2.0
/**
 * @file   evaluator.hpp
 * @brief  Test-set scoring, the pure-IDM baseline, mu x noise sweeps and
 *         report emission.
 */
#pragma once

#include <idmf/follower_net.hpp>
#include <idmf/gps_noise.hpp>
#include <idmf/idm.hpp>
#include <idmf/trainer.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace idmf {

/// One scored configuration. `tag` is "learning", "hybrid" or "idm".
struct MetricRow {
  std::string tag;
  double mu = 1.0;
  std::string noise_level;
  std::string idm_preset; ///< physics parameters used; empty for learning
  double rmse = 0.0;      ///< mean over windows, m
  double fde = 0.0;       ///< mean over windows, m
  std::size_t count = 0;  ///< windows scored
  std::size_t excluded = 0;
  bool failed = false;
  std::string error;

  bool operator==(const MetricRow &) const = default;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  bool operator==(const MetricReport &) const = default;
};

/// Predictions on the observed inputs scored against the clean truth.
/// Throws InputError when a window horizon differs from the net's.
MetricRow evaluate_model(const FollowerNet &net,
                         std::span<const TrainingSample> samples);

/**
 * Closed-loop IDM follower per window, started from the observed first
 * follower position and the recorded initial velocity, driven by the
 * observed leader, scored against the clean truth. Collapsed rollouts are
 * excluded and counted.
 */
MetricRow evaluate_idm_baseline(std::span<const TrainingSample> samples,
                                const IdmParams &params);

/// Adds noise to the position channels of every window; window i uses
/// derive_seed(seed, i).
std::vector<TrainingSample>
noisy_samples(std::span<const SequenceWindow> clean,
              const ArmaNoiseParams &noise, const NoiseChannelSpec &channels,
              std::uint64_t seed);

/// Stable 64-bit seed for a string label (FNV-1a).
std::uint64_t label_seed(std::string_view label);

/// Observed/truth samples for the three splits at one noise level.
struct SampleSplit {
  std::vector<TrainingSample> train;
  std::vector<TrainingSample> validation;
  std::vector<TrainingSample> test;
};

/**
 * Applies noise preset `level` ("none" keeps the data clean) to a clean
 * split. Split p in (train, validation, test) = (0, 1, 2) draws from
 * derive_seed(derive_seed(data_seed, label_seed(level)), p), so every
 * consumer sees the same realization. Caps of 0 keep the whole split.
 */
SampleSplit make_sample_split(const DatasetSplit &clean,
                              const std::string &level,
                              const NoiseChannelSpec &channels,
                              std::uint64_t data_seed,
                              std::size_t max_train = 0,
                              std::size_t max_validation = 0);

struct SweepSpec {
  /// 1 is the pure learning row, 0 the pure IDM row, anything between is
  /// a hybrid cell. Learning and IDM rows are always emitted.
  std::vector<double> mu_values{1.0, 0.7, 0.5, 0.3, 0.0};
  std::vector<std::string> noise_levels{"small", "middle"};
  /// Physics parameter sets; hybrid and IDM rows are repeated per preset.
  std::vector<std::string> idm_presets{"sumo"};
  std::uint64_t data_seed = 0;
  NoiseChannelSpec channels;
};

void validate(const SweepSpec &spec);

struct SweepSetup {
  NetConfig net;
  TrainConfig train;       ///< mu is overridden per cell
  std::uint64_t net_seed = 0;
  std::size_t max_train_windows = 0;      ///< 0 keeps the whole split
  std::size_t max_validation_windows = 0; ///< 0 keeps the whole split
};

/// Finished cell, reported as the sweep progresses.
struct SweepCell {
  const MetricRow &row;
  const TrainRecord *record; ///< null for the IDM baseline and failures
  const FollowerNet *net;
};

/**
 * Trains one net per (mu, level, preset) cell on the same noisy splits
 * and scores it, plus the pure baselines. A failing cell is recorded with
 * failed = true and the sweep continues. Rows follow SweepSpec order: for each
 * level, learning, then per preset the hybrids and the IDM row.
 */
MetricReport sweep(const SweepSpec &spec, const DatasetSplit &clean,
                   const SweepSetup &setup,
                   const std::function<void(const SweepCell &)> &on_cell = {});

/// Long-format CSV: tag,mu,noise_level,idm_preset,rmse,fde,count,excluded,
/// failed,error.
std::string report_csv(const MetricReport &report);
std::string report_json(const MetricReport &report);
/// Pivot with one row per (tag, mu, preset) and one RMSE column per level.
std::string report_table_csv(const MetricReport &report);

/// Writes report.csv, report.json and table.csv under `dir`.
void emit_report(const MetricReport &report, const std::filesystem::path &dir);

} // namespace idmf

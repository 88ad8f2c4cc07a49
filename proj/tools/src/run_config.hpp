// SPDX-License-Identifier: Apache-2.0
/**
 * @file   run_config.hpp
 * @brief  Resolved settings of one idmf command: defaults, then a JSON
 *         file, then the --desk preset, then explicit flags.
 */
#pragma once

#include <idmf/evaluator.hpp>
#include <idmf/follower_net.hpp>
#include <idmf/gps_noise.hpp>
#include <idmf/scenario.hpp>
#include <idmf/trainer.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace idmf::cli {

struct RunConfig {
  std::uint64_t seed = 7;

  // dataset
  std::size_t n_scenarios = 1000;
  ScenarioMix mix;
  std::size_t horizon = kDefaultHorizon;
  std::size_t stride = kDefaultHorizon;
  double gap_threshold = kDefaultGapThreshold;
  SplitRatios split;

  // noise
  std::string noise_level = "middle";
  NoiseChannelSpec channels;

  std::string idm_preset = "sumo";

  NetConfig net;
  TrainConfig train;
  std::size_t max_train_windows = 0;
  std::size_t max_validation_windows = 0;

  SweepSpec sweep;

  std::size_t calibrate_max_pairs = 200;
  CalibrationBudget calibrate_budget;

  std::size_t plot_window = 0;
  std::string plot_learning_checkpoint;
  std::string plot_hybrid_checkpoint;
  std::string plot_record;

  std::string data_dir = "data";
  std::string checkpoint = "runs/train/model.ckpt";
  std::string out_dir;
};

/// Values given on the command line; unset fields leave the config alone.
struct FlagOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> mu;     ///< one value, or a list for sweep
  std::optional<std::string> level;  ///< one name, or a list for sweep
  std::optional<std::string> idm_preset;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> n;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  bool desk = false;
};

/// Default output directory per command.
std::string default_out_dir(const std::string &command);

std::string to_json(const RunConfig &config);

/**
 * Overlays a JSON document on `base`. Every key must exist in the schema;
 * the first unknown key raises ConfigError naming its dotted path.
 */
RunConfig merge_json(const RunConfig &base, const std::string &text);

/// h = 32, 200 training and 200 validation windows, 30 epochs.
void apply_desk_preset(RunConfig &config);

void apply_flags(RunConfig &config, const FlagOverrides &flags,
                 const std::string &command);

/// Throws ConfigError on any invalid field.
void validate(const RunConfig &config);

/// Full precedence chain for one command.
RunConfig resolve(const std::string &command,
                  const std::optional<std::string> &config_path,
                  const FlagOverrides &flags);

std::vector<double> parse_double_list(const std::string &text);
std::vector<std::string> parse_name_list(const std::string &text);

} // namespace idmf::cli

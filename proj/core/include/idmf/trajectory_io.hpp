// SPDX-License-Identifier: Apache-2.0
/**
 * @file   trajectory_io.hpp
 * @brief  CSV trajectory-pair files and JSON dataset manifests.
 *
 * CSV layout, one row per sample:
 *
 *     t,pair_id,s_lead,v_lead,s_follow[,v_follow]
 *
 * The v_follow column is written only when every follower carries
 * velocities, and is optional on read.
 * Rows of one pair are contiguous; t restarts at 0 for each pair. Numbers
 * are written with 17 significant digits, so a save/load cycle is exact.
 */
#pragma once

#include <idmf/trajectory.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace idmf {

void write_pairs_csv(std::ostream &out, std::span<const TrajectoryPair> pairs);
std::vector<TrajectoryPair> read_pairs_csv(std::istream &in);

void save_csv(std::span<const TrajectoryPair> pairs,
              const std::filesystem::path &path);
std::vector<TrajectoryPair> load_csv(const std::filesystem::path &path);

/// Per-dataset manifest written next to the CSV files.
struct DatasetManifest {
  double dt = kDefaultDt;
  std::size_t horizon = kDefaultHorizon;
  std::size_t stride = kDefaultHorizon;
  double gap_threshold = kDefaultGapThreshold;
  std::uint64_t seed = 0;
  SplitRatios ratios;
  std::size_t pair_count = 0;
  std::size_t train_windows = 0;
  std::size_t validation_windows = 0;
  std::size_t test_windows = 0;
};

std::string to_json(const DatasetManifest &manifest);
DatasetManifest manifest_from_json(const std::string &text);

void save_manifest(const DatasetManifest &manifest,
                   const std::filesystem::path &path);
DatasetManifest load_manifest(const std::filesystem::path &path);

/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path &path,
                     const std::string &text);
std::string read_text_file(const std::filesystem::path &path);

} // namespace idmf

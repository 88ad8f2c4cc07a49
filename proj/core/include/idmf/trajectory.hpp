// SPDX-License-Identifier: Apache-2.0
/**
 * @file   trajectory.hpp
 * @brief  Trajectory data model: pairs, fixed-length windows, dataset
 *         splits and per-window normalization.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace idmf {

inline constexpr double kDefaultDt = 0.1;
inline constexpr double kDefaultGapThreshold = 50.0;
inline constexpr std::size_t kDefaultHorizon = 80;

/**
 * Longitudinal trajectory of one vehicle sampled at a fixed rate.
 *
 * Leader trajectories carry velocities; follower trajectories may carry
 * positions only, in which case `velocities` is empty.
 */
struct Trajectory {
  double dt = kDefaultDt;
  std::vector<double> positions;
  std::vector<double> velocities;
  std::string vehicle_id;

  std::size_t size() const noexcept { return positions.size(); }
  bool has_velocities() const noexcept { return !velocities.empty(); }

  bool operator==(const Trajectory &) const = default;
};

/// Throws InputError unless dt > 0, size >= 2, positions are finite and
/// velocities (when present) match positions in length.
void validate(const Trajectory &trajectory);

struct TrajectoryPair {
  Trajectory leader;
  Trajectory follower;
  std::string pair_id;

  std::size_t size() const noexcept { return leader.size(); }
  double dt() const noexcept { return leader.dt; }
  double gap(std::size_t k) const {
    return leader.positions[k] - follower.positions[k];
  }

  bool operator==(const TrajectoryPair &) const = default;
};

/// Throws InputError unless both sides are valid, share length and dt, the
/// leader has velocities, and the leader stays strictly ahead.
void validate(const TrajectoryPair &pair);

/// Same checks without the ordering constraint; noisy observations may put
/// the follower ahead of the leader.
void validate_structure(const TrajectoryPair &pair);

/// A pair of exactly H samples plus the follower speed at the first sample.
struct SequenceWindow {
  TrajectoryPair pair;
  double follower_initial_velocity = 0.0;

  std::size_t horizon() const noexcept { return pair.size(); }

  bool operator==(const SequenceWindow &) const = default;
};

struct SplitRatios {
  double train = 0.5;
  double validation = 0.2;
  double test = 0.3;
};

struct DatasetSplit {
  std::vector<SequenceWindow> train;
  std::vector<SequenceWindow> validation;
  std::vector<SequenceWindow> test;
  std::uint64_t split_seed = 0;
};

/**
 * Extracts leader/follower pairs from time-aligned single-lane trajectories.
 *
 * Vehicles are ordered by their first position (front first); each vehicle
 * follows the one directly ahead. The gap series over the common span is
 * cut into maximal runs with 0 < gap <= gap_threshold; every run of at
 * least two samples becomes one pair.
 */
std::vector<TrajectoryPair>
extract_pairs(std::span<const Trajectory> trajectories,
              double gap_threshold = kDefaultGapThreshold);

/**
 * Cuts pairs into windows of `horizon` samples starting every `stride`
 * samples. A window is admitted only if every sample has
 * 0 < gap <= gap_threshold. Trailing remainders are dropped.
 */
std::vector<SequenceWindow>
window_pairs(std::span<const TrajectoryPair> pairs,
             std::size_t horizon = kDefaultHorizon, std::size_t stride = 0,
             double gap_threshold = kDefaultGapThreshold);

/// Follower speed at sample 0: the recorded velocity when present,
/// otherwise the forward difference of the first two positions.
double follower_start_velocity(const TrajectoryPair &pair);

/// Deterministic shuffle under `seed`, then floor-then-remainder partition
/// (the test split receives the leftover).
DatasetSplit split_dataset(std::span<const SequenceWindow> windows,
                           const SplitRatios &ratios, std::uint64_t seed);

/// Index-level form of split_dataset; returns (train, validation, test).
struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};
SplitIndices split_indices(std::size_t count, const SplitRatios &ratios,
                           std::uint64_t seed);

struct Normalizer {
  double position_offset = 0.0;
  double position_scale = 100.0;
  double velocity_scale = 30.0;

  double position(double meters) const {
    return (meters - position_offset) / position_scale;
  }
  double velocity(double mps) const { return mps / velocity_scale; }
  double position_meters(double normalized) const {
    return normalized * position_scale + position_offset;
  }
};

/// Normalized channels of one window, each of length H.
struct NormalizedWindow {
  std::vector<double> leader_positions;
  std::vector<double> leader_velocities;
  std::vector<double> follower_positions;
  double follower_initial_velocity = 0.0;
};

std::pair<NormalizedWindow, Normalizer>
normalize_window(const SequenceWindow &window, double position_scale = 100.0,
                 double velocity_scale = 30.0);

std::vector<double> denormalize(std::span<const double> values,
                                const Normalizer &normalizer);

} // namespace idmf

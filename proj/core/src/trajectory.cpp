// SPDX-License-Identifier: Apache-2.0
/**
 * @file   trajectory.cpp
 * @brief  Pair extraction, windowing, splitting and normalization.
 */
#include <idmf/error.hpp>
#include <idmf/random.hpp>
#include <idmf/trajectory.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace idmf {

void validate(const Trajectory &trajectory) {
  if (!(trajectory.dt > 0.0) || !std::isfinite(trajectory.dt))
    throw InputError("trajectory '" + trajectory.vehicle_id +
                     "': dt must be positive");
  if (trajectory.positions.size() < 2)
    throw InputError("trajectory '" + trajectory.vehicle_id +
                     "': needs at least 2 samples");
  if (trajectory.has_velocities() &&
      trajectory.velocities.size() != trajectory.positions.size())
    throw InputError("trajectory '" + trajectory.vehicle_id +
                     "': positions and velocities differ in length");
  for (double s : trajectory.positions)
    if (!std::isfinite(s))
      throw InputError("trajectory '" + trajectory.vehicle_id +
                       "': non-finite position");
  for (double v : trajectory.velocities)
    if (!std::isfinite(v))
      throw InputError("trajectory '" + trajectory.vehicle_id +
                       "': non-finite velocity");
}

void validate_structure(const TrajectoryPair &pair) {
  validate(pair.leader);
  validate(pair.follower);
  if (!pair.leader.has_velocities())
    throw InputError("pair '" + pair.pair_id + "': leader lacks velocities");
  if (pair.leader.size() != pair.follower.size())
    throw InputError("pair '" + pair.pair_id + "': length mismatch");
  if (pair.leader.dt != pair.follower.dt)
    throw InputError("pair '" + pair.pair_id + "': dt mismatch");
}

void validate(const TrajectoryPair &pair) {
  validate_structure(pair);
  for (std::size_t k = 0; k < pair.size(); ++k)
    if (!(pair.gap(k) > 0.0))
      throw InputError("pair '" + pair.pair_id +
                       "': leader not ahead at sample " + std::to_string(k));
}

namespace {

Trajectory slice(const Trajectory &src, std::size_t begin, std::size_t end) {
  Trajectory out;
  out.dt = src.dt;
  out.vehicle_id = src.vehicle_id;
  out.positions.assign(src.positions.begin() + begin,
                       src.positions.begin() + end);
  if (src.has_velocities())
    out.velocities.assign(src.velocities.begin() + begin,
                          src.velocities.begin() + end);
  return out;
}

TrajectoryPair slice(const TrajectoryPair &src, std::size_t begin,
                     std::size_t end) {
  return TrajectoryPair{slice(src.leader, begin, end),
                        slice(src.follower, begin, end), src.pair_id};
}

bool admissible_gap(double gap, double threshold) {
  return gap > 0.0 && gap <= threshold;
}

} // namespace

std::vector<TrajectoryPair>
extract_pairs(std::span<const Trajectory> trajectories,
              double gap_threshold) {
  if (!(gap_threshold > 0.0))
    throw ConfigError("gap_threshold must be positive");
  std::vector<TrajectoryPair> pairs;
  if (trajectories.empty())
    return pairs;

  const double dt = trajectories.front().dt;
  for (const auto &t : trajectories) {
    validate(t);
    if (t.dt != dt)
      throw InputError("extract_pairs: mismatched dt on vehicle '" +
                       t.vehicle_id + "'");
  }

  std::vector<std::size_t> order(trajectories.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return trajectories[a].positions.front() >
                            trajectories[b].positions.front();
                   });

  for (std::size_t r = 1; r < order.size(); ++r) {
    const Trajectory &lead = trajectories[order[r - 1]];
    const Trajectory &follow = trajectories[order[r]];
    if (!lead.has_velocities())
      throw InputError("extract_pairs: leader '" + lead.vehicle_id +
                       "' lacks velocities");
    const std::size_t n = std::min(lead.size(), follow.size());
    TrajectoryPair whole{slice(lead, 0, n), slice(follow, 0, n),
                         lead.vehicle_id + ">" + follow.vehicle_id};

    std::size_t run = 0;
    std::size_t k = 0;
    while (k < n) {
      if (!admissible_gap(whole.gap(k), gap_threshold)) {
        ++k;
        continue;
      }
      std::size_t end = k;
      while (end < n && admissible_gap(whole.gap(end), gap_threshold))
        ++end;
      if (end - k >= 2) {
        TrajectoryPair p = slice(whole, k, end);
        if (run > 0)
          p.pair_id += "#" + std::to_string(run);
        pairs.push_back(std::move(p));
        ++run;
      }
      k = end;
    }
  }
  return pairs;
}

double follower_start_velocity(const TrajectoryPair &pair) {
  if (pair.follower.has_velocities())
    return pair.follower.velocities.front();
  const auto &s = pair.follower.positions;
  return (s[1] - s[0]) / pair.follower.dt;
}

std::vector<SequenceWindow>
window_pairs(std::span<const TrajectoryPair> pairs, std::size_t horizon,
             std::size_t stride, double gap_threshold) {
  if (horizon < 2)
    throw ConfigError("window horizon must be at least 2");
  if (stride == 0)
    stride = horizon;

  std::vector<SequenceWindow> windows;
  for (const auto &pair : pairs) {
    if (pair.size() < horizon)
      continue;
    for (std::size_t start = 0; start + horizon <= pair.size();
         start += stride) {
      bool ok = true;
      for (std::size_t k = start; k < start + horizon && ok; ++k)
        ok = admissible_gap(pair.gap(k), gap_threshold);
      if (!ok)
        continue;
      SequenceWindow w;
      w.pair = slice(pair, start, start + horizon);
      w.pair.pair_id = pair.pair_id + "@" + std::to_string(start);
      w.follower_initial_velocity = follower_start_velocity(w.pair);
      windows.push_back(std::move(w));
    }
  }
  return windows;
}

SplitIndices split_indices(std::size_t count, const SplitRatios &ratios,
                           std::uint64_t seed) {
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9 || ratios.train < 0.0 ||
      ratios.validation < 0.0 || ratios.test < 0.0)
    throw ConfigError("split ratios must be non-negative and sum to 1");

  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());

  const auto n_train = static_cast<std::size_t>(
    std::floor(ratios.train * static_cast<double>(count) + 1e-9));
  const auto n_val = static_cast<std::size_t>(
    std::floor(ratios.validation * static_cast<double>(count) + 1e-9));

  SplitIndices out;
  out.train.assign(idx.begin(), idx.begin() + n_train);
  out.validation.assign(idx.begin() + n_train,
                        idx.begin() + n_train + n_val);
  out.test.assign(idx.begin() + n_train + n_val, idx.end());
  return out;
}

DatasetSplit split_dataset(std::span<const SequenceWindow> windows,
                           const SplitRatios &ratios, std::uint64_t seed) {
  if (windows.empty())
    throw InputError("split_dataset: no windows");
  const SplitIndices idx = split_indices(windows.size(), ratios, seed);
  DatasetSplit split;
  split.split_seed = seed;
  for (auto i : idx.train)
    split.train.push_back(windows[i]);
  for (auto i : idx.validation)
    split.validation.push_back(windows[i]);
  for (auto i : idx.test)
    split.test.push_back(windows[i]);
  return split;
}

std::pair<NormalizedWindow, Normalizer>
normalize_window(const SequenceWindow &window, double position_scale,
                 double velocity_scale) {
  const auto &pair = window.pair;
  Normalizer nz{pair.leader.positions.front(), position_scale,
                velocity_scale};
  NormalizedWindow out;
  const std::size_t n = pair.size();
  out.leader_positions.resize(n);
  out.leader_velocities.resize(n);
  out.follower_positions.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.leader_positions[k] = nz.position(pair.leader.positions[k]);
    out.leader_velocities[k] = nz.velocity(pair.leader.velocities[k]);
    out.follower_positions[k] = nz.position(pair.follower.positions[k]);
  }
  out.follower_initial_velocity = nz.velocity(window.follower_initial_velocity);
  return {std::move(out), nz};
}

std::vector<double> denormalize(std::span<const double> values,
                                const Normalizer &normalizer) {
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [&](double x) { return normalizer.position_meters(x); });
  return out;
}

} // namespace idmf

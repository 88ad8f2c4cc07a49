// SPDX-License-Identifier: Apache-2.0
/**
 * @file   idm.hpp
 * @brief  Intelligent Driver Model: acceleration law, open-loop
 *         acceleration sequences, ballistic integration, closed-loop
 *         rollouts, FDE validation and coordinate-descent calibration.
 */
#pragma once

#include <idmf/trajectory.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace idmf {

struct IdmParams {
  double v0 = 16.7;          ///< desired speed, m/s
  double time_headway = 1.0; ///< desired time headway, s
  double s0 = 2.5;           ///< minimum gap, m
  double a_max = 3.0;        ///< maximum acceleration, m/s^2
  double b_comf = 4.5;       ///< comfortable deceleration, m/s^2
  double delta = 4.0;        ///< acceleration exponent

  bool operator==(const IdmParams &) const = default;
};

void validate(const IdmParams &params);

/// Named presets: "sumo", "ngsim-wang2021", "ngsim-yang2022".
IdmParams idm_preset(std::string_view name);
std::vector<std::string> idm_preset_names();

std::string to_json(const IdmParams &params);
IdmParams idm_params_from_json(const std::string &text);

/// Desired dynamic gap s*(v, dv) with the velocity term floored at zero.
double desired_gap(double v_follow, double v_lead, const IdmParams &params);

/// IDM acceleration. Throws DomainError when gap <= 0.
double idm_acceleration(double v_follow, double v_lead, double gap,
                        const IdmParams &params);

/// Gap at which acceleration vanishes for equal speeds; requires v < v0.
double equilibrium_gap(double v, const IdmParams &params);

struct IntegrationConfig {
  double dt = kDefaultDt;
  double velocity_floor = 0.0;
};

/// Central differences in the interior, second-order one-sided at both
/// ends (first-order when only two samples exist).
std::vector<double> finite_difference_velocities(std::span<const double> s,
                                                 double dt);

/**
 * IDM accelerations evaluated along the observed window: leader state from
 * the window, follower velocity from finite differences of the observed
 * follower positions. Throws DomainError naming the first sample whose gap
 * is not positive.
 */
std::vector<double> open_loop_accel_sequence(const SequenceWindow &window,
                                             const IdmParams &params);

/**
 * Ballistic integration: s[k+1] = s[k] + v[k] dt + a[k] dt^2 / 2,
 * v[k+1] = max(floor, v[k] + a[k] dt). A step whose speed would cross the
 * floor stops at the floor and holds it. Output has the input's length and
 * starts at s_init; the last acceleration is unused.
 */
std::vector<double> double_integrate(std::span<const double> accels,
                                     double s_init, double v_init,
                                     const IntegrationConfig &cfg = {});

/// Open-loop accelerations followed by double integration from the
/// window's first follower position and recorded initial velocity.
std::vector<double> open_loop_positions(const SequenceWindow &window,
                                        const IdmParams &params,
                                        const IntegrationConfig &cfg = {});

/**
 * Simulates an IDM follower behind a fixed leader trajectory. Returns the
 * follower trajectory with positions and velocities. Throws DomainError
 * with the step index on gap collapse.
 */
Trajectory closed_loop_rollout(const Trajectory &leader, double follower_s0,
                               double follower_v0, const IdmParams &params,
                               const IntegrationConfig &cfg = {});

struct FdeResult {
  double mean_fde = 0.0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0; ///< rollouts that collapsed
};

/// Mean closed-loop final displacement error across pairs.
FdeResult validate_fde(std::span<const TrajectoryPair> pairs,
                       const IdmParams &params);

struct CalibrationBounds {
  IdmParams lower{5.0, 0.1, 0.1, 0.5, 0.5, 1.0};
  IdmParams upper{40.0, 3.0, 6.0, 5.0, 6.0, 8.0};
};

struct CalibrationBudget {
  std::size_t max_sweeps = 400;
  std::size_t max_evaluations = 6000;
};

struct CalibrationResult {
  IdmParams params;
  double fde = 0.0;
  std::size_t evaluations = 0;
  std::size_t sweeps = 0;
};

/**
 * Coordinate descent over (v0, T, s0, a, b, delta) minimizing mean
 * closed-loop FDE, in Hooke-Jeeves form: each sweep tries one step per
 * parameter, successful sweeps are extended by pattern moves, failed ones
 * halve the steps. Order and start point are fixed so the result is
 * deterministic. The search starts at `start`, or at the centre of the
 * bounds box when none is given. Throws Error if every rollout collapses
 * at the start point.
 */
CalibrationResult calibrate_idm(std::span<const TrajectoryPair> pairs,
                                const CalibrationBounds &bounds = {},
                                const CalibrationBudget &budget = {},
                                const std::optional<IdmParams> &start = {});

} // namespace idmf

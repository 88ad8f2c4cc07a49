// SPDX-License-Identifier: Apache-2.0
/**
 * @file   scenario.hpp
 * @brief  Single-lane scenario generator: leader speed profiles and IDM
 *         followers, assembled into labeled trajectory-pair datasets.
 */
#pragma once

#include <idmf/idm.hpp>
#include <idmf/trajectory.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace idmf {

enum class LeadProfileKind { Constant, Sinusoidal, SignalStopGo };

std::string to_string(LeadProfileKind kind);
LeadProfileKind lead_profile_kind_from_string(const std::string &name);

struct SignalTiming {
  double red = 20.0;        ///< s, red phase starting at t = 0
  double green = 1e9;       ///< s, green phase after red
  double stop_line = 150.0; ///< m, measured from the leader start
};

struct LeadProfileSpec {
  LeadProfileKind kind = LeadProfileKind::Constant;
  double base_speed = 10.0; ///< m/s
  double amplitude = 0.0;   ///< m/s, sinusoidal only
  double period = 20.0;     ///< s, sinusoidal only
  SignalTiming signal;
  double decel = 2.0; ///< m/s^2, leader braking for the signal
  double accel = 1.5; ///< m/s^2, leader launch after green
  double duration = 24.0;
  double dt = kDefaultDt;
};

void validate(const LeadProfileSpec &spec);

/// Leader trajectory whose positions are the ballistic integral of a
/// piecewise-constant acceleration profile. `seed` is accepted for
/// interface symmetry; the built-in profile kinds are deterministic.
Trajectory generate_lead_trajectory(const LeadProfileSpec &spec,
                                    std::uint64_t seed = 0);

struct SimScenario {
  LeadProfileSpec lead;
  double initial_gap = 20.0;   ///< m
  double initial_speed = 10.0; ///< m/s, follower
  IdmParams idm;
  std::uint64_t seed = 0;
};

/// Closed-loop IDM follower behind `lead`; throws DomainError on collapse.
TrajectoryPair simulate_follower(const Trajectory &lead,
                                 const SimScenario &scenario);

struct ScenarioMix {
  double constant = 0.25;
  double sinusoidal = 0.35;
  double signal_stop_go = 0.40;
  double duration = 24.0; ///< s per scenario
};

struct ScenarioRecord {
  std::size_t index = 0;
  SimScenario scenario;
  std::size_t attempts = 1;
};

struct SimDataset {
  std::vector<TrajectoryPair> pairs;
  std::vector<ScenarioRecord> scenarios;
  std::size_t rejected = 0;              ///< scenario draws that were resampled
  std::size_t accepted_first_try = 0;
};

/**
 * Draws `n_scenarios` scenarios from `seed` and simulates each. A draw is
 * rejected (and redrawn, up to `max_retries`) when the rollout collapses or
 * the gap leaves (0, gap_threshold]. Scenario i depends only on (seed, i),
 * so the work is parallel-safe; results come back in index order.
 */
SimDataset build_dataset(std::size_t n_scenarios, const ScenarioMix &mix,
                         const IdmParams &params, std::uint64_t seed,
                         double gap_threshold = kDefaultGapThreshold,
                         std::size_t max_retries = 20);

/// JSON manifest of every scenario in a dataset.
std::string scenario_manifest_json(const SimDataset &dataset,
                                   const ScenarioMix &mix,
                                   std::uint64_t seed);

} // namespace idmf

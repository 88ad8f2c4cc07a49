// SPDX-License-Identifier: Apache-2.0
/**
 * @file   test_scenario.cpp
 * @brief  Leader profiles, follower synthesis and dataset generation.
 */
#include "test_support.hpp"

#include <idmf/error.hpp>
#include <idmf/idm.hpp>
#include <idmf/scenario.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace idmf;

namespace {

const IdmParams kSumo = idm_preset("sumo");

void check_kinematics(const Trajectory &t) {
  // Position advances by the ballistic integral of the speed profile.
  for (std::size_t k = 0; k + 1 < t.size(); ++k) {
    const double a = (t.velocities[k + 1] - t.velocities[k]) / t.dt;
    const double ds = t.velocities[k] * t.dt + 0.5 * a * t.dt * t.dt;
    CHECK(std::abs(t.positions[k + 1] - t.positions[k] - ds) < 1e-9);
  }
}

} // namespace

TEST_SUITE("scenario-sim") {

TEST_CASE("profile kind names") {
  for (auto k : {LeadProfileKind::Constant, LeadProfileKind::Sinusoidal,
                 LeadProfileKind::SignalStopGo})
    CHECK(lead_profile_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(lead_profile_kind_from_string("zigzag"), ConfigError);
}

TEST_CASE("constant leader") {
  LeadProfileSpec spec;
  spec.duration = 8.0;
  const Trajectory t = generate_lead_trajectory(spec);
  REQUIRE(t.size() >= 80);
  for (std::size_t k = 0; k < t.size(); ++k) {
    CHECK(t.positions[k] == doctest::Approx(static_cast<double>(k)));
    CHECK(t.velocities[k] == 10.0);
  }
}

TEST_CASE("sinusoidal leader") {
  LeadProfileSpec spec;
  spec.kind = LeadProfileKind::Sinusoidal;
  spec.amplitude = 3.0;
  spec.period = 20.0;
  spec.duration = 40.0;
  const Trajectory t = generate_lead_trajectory(spec);
  const auto [lo, hi] = std::minmax_element(t.velocities.begin(),
                                            t.velocities.end());
  CHECK(*lo == doctest::Approx(7.0).epsilon(1e-3));
  CHECK(*hi == doctest::Approx(13.0).epsilon(1e-3));
  const double slope =
    (t.positions.back() - t.positions.front()) /
    (static_cast<double>(t.size() - 1) * t.dt);
  CHECK(slope == doctest::Approx(10.0).epsilon(0.01));
  check_kinematics(t);
}

TEST_CASE("signal stop-and-go reaches a standstill plateau") {
  LeadProfileSpec spec;
  spec.kind = LeadProfileKind::SignalStopGo;
  spec.base_speed = 10.0;
  spec.signal = {30.0, 1e9, 100.0};
  spec.duration = 50.0;
  const Trajectory t = generate_lead_trajectory(spec);
  check_kinematics(t);
  std::size_t stopped = 0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k)
    if (t.velocities[k] == 0.0 && t.velocities[k + 1] == 0.0) {
      ++stopped;
      CHECK(t.positions[k + 1] == t.positions[k]);
      CHECK(t.positions[k] <= spec.signal.stop_line + 1e-9);
    }
  CHECK(stopped > 10);
  CHECK(t.velocities.back() == doctest::Approx(10.0)); // relaunched on green
  for (double v : t.velocities)
    CHECK(v >= 0.0);
}

TEST_CASE("infeasible stop line is rejected") {
  LeadProfileSpec spec;
  spec.kind = LeadProfileKind::SignalStopGo;
  spec.base_speed = 20.0;
  spec.decel = 2.0;
  spec.signal = {20.0, 10.0, 50.0}; // needs 100 m
  CHECK_THROWS_AS(generate_lead_trajectory(spec), ConfigError);
  spec.base_speed = 45.0;
  CHECK_THROWS_AS(validate(spec), ConfigError);
}

TEST_CASE("simulate_follower") {
  SimScenario sc;
  sc.idm = kSumo;
  sc.initial_speed = 10.0;
  sc.initial_gap = equilibrium_gap(10.0, kSumo);
  const Trajectory lead = generate_lead_trajectory(sc.lead);
  const TrajectoryPair p = simulate_follower(lead, sc);
  CHECK_NOTHROW(validate(p));
  for (std::size_t k = 0; k < p.size(); ++k)
    CHECK(p.gap(k) == doctest::Approx(sc.initial_gap).epsilon(1e-3));
  CHECK(simulate_follower(lead, sc) == p);

  sc.initial_gap = -1.0;
  CHECK_THROWS_AS(simulate_follower(lead, sc), ConfigError);
}

TEST_CASE("follower behind a parked leader settles at s0") {
  SimScenario sc;
  sc.idm = kSumo;
  sc.lead.base_speed = 0.0;
  sc.lead.duration = 300.0;
  sc.initial_gap = 40.0;
  sc.initial_speed = 0.0;
  const TrajectoryPair p =
    simulate_follower(generate_lead_trajectory(sc.lead), sc);
  CHECK(std::abs(p.gap(p.size() - 1) - kSumo.s0) < 0.1);
}

TEST_CASE("dataset") {
  ScenarioMix constant_only{1.0, 0.0, 0.0, 24.0};
  CHECK(build_dataset(1, constant_only, kSumo, 3).pairs.size() == 1);
  CHECK_THROWS_AS(build_dataset(0, {}, kSumo, 1), ConfigError);

  const SimDataset a = build_dataset(60, {}, kSumo, 99);
  const SimDataset b = build_dataset(60, {}, kSumo, 99);
  CHECK(a.pairs == b.pairs);
  CHECK(scenario_manifest_json(a, {}, 99) == scenario_manifest_json(b, {}, 99));
  CHECK(a.scenarios.size() == 60);
  for (const auto &p : a.pairs) {
    CHECK_NOTHROW(validate(p));
    for (std::size_t k = 0; k < p.size(); ++k) {
      CHECK(p.gap(k) > 0.0);
      CHECK(p.gap(k) <= 50.0);
    }
  }
}

TEST_CASE("property: stored followers satisfy the IDM residual") {
  const SimDataset d = build_dataset(30, {}, kSumo, 5);
  for (const auto &p : d.pairs) {
    const auto &f = p.follower;
    REQUIRE(f.has_velocities());
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
      const double a = idm_acceleration(f.velocities[k],
                                        p.leader.velocities[k], p.gap(k),
                                        kSumo);
      if (f.velocities[k] + a * p.dt() <= 0.0)
        continue; // velocity floor engaged
      const double stored = (f.velocities[k + 1] - f.velocities[k]) / p.dt();
      CHECK(std::abs(stored - a) < 1e-9);
    }
  }
}

TEST_CASE("default mix acceptance rate") {
  const SimDataset d = build_dataset(1000, {}, kSumo, 7);
  CHECK(d.accepted_first_try >= 950);
}

} // TEST_SUITE

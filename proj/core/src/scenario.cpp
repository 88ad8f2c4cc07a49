// SPDX-License-Identifier: Apache-2.0
/**
 * @file   scenario.cpp
 * @brief  Leader profiles, IDM followers and dataset assembly.
 */
#include <idmf/error.hpp>
#include <idmf/parallel.hpp>
#include <idmf/random.hpp>
#include <idmf/scenario.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace idmf {

std::string to_string(LeadProfileKind kind) {
  switch (kind) {
  case LeadProfileKind::Constant:
    return "constant";
  case LeadProfileKind::Sinusoidal:
    return "sinusoidal";
  case LeadProfileKind::SignalStopGo:
    return "signal-stop-go";
  }
  return "unknown";
}

LeadProfileKind lead_profile_kind_from_string(const std::string &name) {
  if (name == "constant")
    return LeadProfileKind::Constant;
  if (name == "sinusoidal")
    return LeadProfileKind::Sinusoidal;
  if (name == "signal-stop-go")
    return LeadProfileKind::SignalStopGo;
  throw ConfigError("unknown lead profile kind '" + name + "'");
}

void validate(const LeadProfileSpec &spec) {
  auto speed_ok = [](double v) { return v >= 0.0 && v <= 40.0; };
  if (!(spec.dt > 0.0))
    throw ConfigError("lead profile: dt must be positive");
  if (!(spec.duration >= spec.dt))
    throw ConfigError("lead profile: duration shorter than one step");
  if (!speed_ok(spec.base_speed))
    throw ConfigError("lead profile: base speed outside [0, 40]");
  if (spec.kind == LeadProfileKind::Sinusoidal) {
    if (spec.amplitude < 0.0 || !speed_ok(spec.base_speed - spec.amplitude) ||
        !speed_ok(spec.base_speed + spec.amplitude))
      throw ConfigError("lead profile: sinusoid leaves [0, 40] m/s");
    if (!(spec.period > 0.0))
      throw ConfigError("lead profile: period must be positive");
  }
  if (spec.kind == LeadProfileKind::SignalStopGo) {
    if (!(spec.decel > 0.0) || !(spec.accel > 0.0))
      throw ConfigError("lead profile: decel/accel must be positive");
    if (!(spec.signal.red >= 0.0) || !(spec.signal.green > 0.0))
      throw ConfigError("lead profile: invalid signal timing");
    const double braking =
      spec.base_speed * spec.base_speed / (2.0 * spec.decel);
    if (spec.signal.red > 0.0 && spec.signal.stop_line < braking)
      throw ConfigError("lead profile: stop line closer than braking distance");
  }
}

namespace {

std::size_t sample_count(const LeadProfileSpec &spec) {
  return static_cast<std::size_t>(std::llround(spec.duration / spec.dt));
}

/// Builds the trajectory from per-step accelerations a[k] (k < n-1).
Trajectory integrate_profile(const std::vector<double> &accel, double v_start,
                             double dt) {
  Trajectory t;
  t.dt = dt;
  const std::size_t n = accel.size() + 1;
  t.positions.resize(n);
  t.velocities.resize(n);
  double s = 0.0, v = v_start;
  for (std::size_t k = 0; k < n; ++k) {
    t.positions[k] = s;
    t.velocities[k] = v;
    if (k + 1 < n) {
      s += v * dt + 0.5 * accel[k] * dt * dt;
      v += accel[k] * dt;
      if (std::abs(v) < 1e-12) // rounding residue of an exact stop
        v = 0.0;
    }
  }
  return t;
}

std::vector<double> signal_accelerations(const LeadProfileSpec &spec,
                                         std::size_t n) {
  enum class Phase { Cruise, Braking, Stopped, Launch, Passed };
  const double dt = spec.dt;
  const double cycle = spec.signal.red + spec.signal.green;
  auto red_at = [&](double t) {
    return spec.signal.red > 0.0 && std::fmod(t, cycle) < spec.signal.red;
  };

  std::vector<double> accel(n - 1, 0.0);
  Phase phase = Phase::Cruise;
  double s = 0.0, v = spec.base_speed, brake = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double remaining = spec.signal.stop_line - s;
    double a = 0.0;
    switch (phase) {
    case Phase::Cruise:
      if (red_at(t) && v > 0.0 &&
          remaining >= v * v / (2.0 * spec.decel) &&
          remaining - v * dt < v * v / (2.0 * spec.decel)) {
        phase = Phase::Braking;
        brake = v * v / (2.0 * remaining);
      } else if (remaining <= 0.0) {
        phase = Phase::Passed;
      }
      break;
    case Phase::Braking:
      if (!red_at(t))
        phase = Phase::Launch;
      break;
    case Phase::Stopped:
      if (!red_at(t))
        phase = Phase::Launch;
      break;
    case Phase::Launch:
    case Phase::Passed:
      break;
    }

    switch (phase) {
    case Phase::Braking:
      a = -std::min(brake, v / dt);
      break;
    case Phase::Launch:
      a = std::min(spec.accel, (spec.base_speed - v) / dt);
      break;
    default:
      a = 0.0;
    }
    accel[k] = a;
    s += v * dt + 0.5 * a * dt * dt;
    v += a * dt;
    if (phase == Phase::Braking && v <= 1e-12) {
      v = 0.0;
      phase = Phase::Stopped;
    }
    if (phase == Phase::Launch && v >= spec.base_speed - 1e-12)
      phase = (spec.signal.stop_line - s > 0.0) ? Phase::Cruise : Phase::Passed;
  }
  return accel;
}

} // namespace

Trajectory generate_lead_trajectory(const LeadProfileSpec &spec,
                                    std::uint64_t /*seed*/) {
  validate(spec);
  const std::size_t n = std::max<std::size_t>(2, sample_count(spec));
  std::vector<double> accel(n - 1, 0.0);
  double v_start = spec.base_speed;

  switch (spec.kind) {
  case LeadProfileKind::Constant:
    break;
  case LeadProfileKind::Sinusoidal: {
    const double w = 2.0 * std::numbers::pi / spec.period;
    auto speed = [&](std::size_t k) {
      return spec.base_speed +
             spec.amplitude * std::sin(w * static_cast<double>(k) * spec.dt);
    };
    v_start = speed(0);
    for (std::size_t k = 0; k + 1 < n; ++k)
      accel[k] = (speed(k + 1) - speed(k)) / spec.dt;
    break;
  }
  case LeadProfileKind::SignalStopGo:
    accel = signal_accelerations(spec, n);
    break;
  }

  Trajectory t = integrate_profile(accel, v_start, spec.dt);
  t.vehicle_id = "lead";
  return t;
}

TrajectoryPair simulate_follower(const Trajectory &lead,
                                 const SimScenario &scenario) {
  if (!(scenario.initial_gap > 0.0))
    throw ConfigError("scenario: initial gap must be positive");
  validate(scenario.idm);
  TrajectoryPair pair;
  pair.leader = lead;
  pair.follower =
    closed_loop_rollout(lead, lead.positions.front() - scenario.initial_gap,
                        scenario.initial_speed, scenario.idm);
  pair.follower.vehicle_id = "follow";
  pair.pair_id = "scenario-" + std::to_string(scenario.seed);
  return pair;
}

namespace {

SimScenario draw_scenario(const ScenarioMix &mix, const IdmParams &params,
                          std::uint64_t seed) {
  Rng rng(seed);
  SimScenario sc;
  sc.idm = params;
  sc.seed = seed;
  LeadProfileSpec &spec = sc.lead;
  spec.duration = mix.duration;

  const double total = mix.constant + mix.sinusoidal + mix.signal_stop_go;
  const double u = rng.uniform() * total;
  if (u < mix.constant) {
    spec.kind = LeadProfileKind::Constant;
    spec.base_speed = rng.uniform(4.0, 14.0);
  } else if (u < mix.constant + mix.sinusoidal) {
    spec.kind = LeadProfileKind::Sinusoidal;
    spec.base_speed = rng.uniform(6.0, 12.0);
    spec.amplitude = rng.uniform(1.0, std::min(4.0, spec.base_speed - 2.0));
    spec.period = rng.uniform(8.0, 30.0);
  } else {
    spec.kind = LeadProfileKind::SignalStopGo;
    spec.base_speed = rng.uniform(6.0, 14.0);
    spec.decel = rng.uniform(1.5, 3.0);
    spec.accel = rng.uniform(1.0, 2.5);
    const double braking =
      spec.base_speed * spec.base_speed / (2.0 * spec.decel);
    // Arrival somewhere inside the scenario so braking shows up.
    spec.signal.stop_line =
      braking + rng.uniform(5.0, 0.6 * spec.base_speed * mix.duration);
    spec.signal.red = rng.uniform(8.0, 30.0);
    spec.signal.green = rng.uniform(20.0, 40.0);
  }

  sc.initial_gap = rng.uniform(params.s0 + 2.0, 45.0);
  const double lead_v0 =
    spec.base_speed; // sinusoid starts at the base speed (sin 0)
  sc.initial_speed = std::max(0.0, lead_v0 + rng.uniform(-2.0, 2.0));
  return sc;
}

bool within_threshold(const TrajectoryPair &pair, double threshold) {
  for (std::size_t k = 0; k < pair.size(); ++k) {
    const double g = pair.gap(k);
    if (!(g > 0.0 && g <= threshold))
      return false;
  }
  return true;
}

struct Attempt {
  std::optional<TrajectoryPair> pair;
  ScenarioRecord record;
};

Attempt run_scenario(std::size_t index, const ScenarioMix &mix,
                     const IdmParams &params, std::uint64_t seed,
                     double threshold, std::size_t max_retries) {
  Attempt out;
  out.record.index = index;
  for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
    const std::uint64_t s = derive_seed(seed, index * 1000003ULL + attempt);
    SimScenario sc = draw_scenario(mix, params, s);
    out.record.scenario = sc;
    out.record.attempts = attempt + 1;
    try {
      const Trajectory lead = generate_lead_trajectory(sc.lead, s);
      TrajectoryPair pair = simulate_follower(lead, sc);
      if (!within_threshold(pair, threshold))
        continue;
      pair.pair_id = "s" + std::to_string(index);
      pair.leader.vehicle_id = pair.pair_id + ":lead";
      pair.follower.vehicle_id = pair.pair_id + ":follow";
      out.pair = std::move(pair);
      return out;
    } catch (const DomainError &) {
      continue;
    } catch (const ConfigError &) {
      continue;
    }
  }
  return out;
}

} // namespace

SimDataset build_dataset(std::size_t n_scenarios, const ScenarioMix &mix,
                         const IdmParams &params, std::uint64_t seed,
                         double gap_threshold, std::size_t max_retries) {
  if (n_scenarios == 0)
    throw ConfigError("build_dataset: n_scenarios must be at least 1");
  if (mix.constant < 0 || mix.sinusoidal < 0 || mix.signal_stop_go < 0 ||
      !(mix.constant + mix.sinusoidal + mix.signal_stop_go > 0.0))
    throw ConfigError("build_dataset: invalid scenario mix");
  validate(params);

  std::vector<Attempt> attempts(n_scenarios);
  parallel_for(n_scenarios, [&](std::size_t i) {
    attempts[i] =
      run_scenario(i, mix, params, seed, gap_threshold, max_retries);
  });

  SimDataset ds;
  std::size_t failed = 0;
  for (auto &a : attempts) {
    ds.rejected += a.record.attempts - 1;
    if (!a.pair) {
      ++failed;
      ds.rejected += 1;
      continue;
    }
    if (a.record.attempts == 1)
      ++ds.accepted_first_try;
    ds.pairs.push_back(std::move(*a.pair));
    ds.scenarios.push_back(a.record);
  }
  if (failed > 0)
    throw Error("build_dataset: " + std::to_string(failed) +
                " scenarios exhausted their retry budget");
  return ds;
}

std::string scenario_manifest_json(const SimDataset &dataset,
                                   const ScenarioMix &mix,
                                   std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["mix"] = {{"constant", mix.constant},
              {"sinusoidal", mix.sinusoidal},
              {"signal_stop_go", mix.signal_stop_go},
              {"duration", mix.duration}};
  j["pair_count"] = dataset.pairs.size();
  j["accepted_first_try"] = dataset.accepted_first_try;
  j["rejected_draws"] = dataset.rejected;
  auto &arr = j["scenarios"] = nlohmann::ordered_json::array();
  for (const auto &r : dataset.scenarios) {
    const auto &sc = r.scenario;
    nlohmann::ordered_json e;
    e["index"] = r.index;
    e["pair_id"] = "s" + std::to_string(r.index);
    e["attempts"] = r.attempts;
    e["seed"] = sc.seed;
    e["kind"] = to_string(sc.lead.kind);
    e["base_speed"] = sc.lead.base_speed;
    e["amplitude"] = sc.lead.amplitude;
    e["period"] = sc.lead.period;
    e["signal"] = {{"red", sc.lead.signal.red},
                   {"green", sc.lead.signal.green},
                   {"stop_line", sc.lead.signal.stop_line}};
    e["decel"] = sc.lead.decel;
    e["accel"] = sc.lead.accel;
    e["duration"] = sc.lead.duration;
    e["initial_gap"] = sc.initial_gap;
    e["initial_speed"] = sc.initial_speed;
    arr.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

} // namespace idmf

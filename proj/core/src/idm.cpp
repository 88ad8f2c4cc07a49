// SPDX-License-Identifier: Apache-2.0
/**
 * @file   idm.cpp
 * @brief  IDM law and everything built on it.
 */
#include <idmf/error.hpp>
#include <idmf/idm.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <limits>

namespace idmf {

void validate(const IdmParams &p) {
  const bool ok = std::isfinite(p.v0) && p.v0 >= 0.0 &&
                  std::isfinite(p.time_headway) && p.time_headway >= 0.0 &&
                  p.s0 > 0.0 && p.a_max > 0.0 && p.b_comf > 0.0 &&
                  p.delta > 0.0 && std::isfinite(p.s0) &&
                  std::isfinite(p.a_max) && std::isfinite(p.b_comf) &&
                  std::isfinite(p.delta);
  if (!ok)
    throw ConfigError("invalid IDM parameters");
}

IdmParams idm_preset(std::string_view name) {
  if (name == "sumo")
    return {16.7, 1.0, 2.5, 3.0, 4.5, 4.0};
  if (name == "ngsim-wang2021")
    return {15.97, 1.3, 1.57, 2.49, 2.39, 4.0};
  if (name == "ngsim-yang2022")
    return {12.58, 0.48, 0.31, 1.98, 4.37, 1.34};
  throw ConfigError("unknown IDM preset '" + std::string(name) + "'");
}

std::vector<std::string> idm_preset_names() {
  return {"sumo", "ngsim-wang2021", "ngsim-yang2022"};
}

std::string to_json(const IdmParams &p) {
  nlohmann::ordered_json j;
  j["v_0"] = p.v0;
  j["T"] = p.time_headway;
  j["s_0"] = p.s0;
  j["a"] = p.a_max;
  j["b"] = p.b_comf;
  j["delta"] = p.delta;
  return j.dump(2) + "\n";
}

IdmParams idm_params_from_json(const std::string &text) {
  try {
    const auto j = nlohmann::json::parse(text);
    IdmParams p;
    p.v0 = j.at("v_0").get<double>();
    p.time_headway = j.at("T").get<double>();
    p.s0 = j.at("s_0").get<double>();
    p.a_max = j.at("a").get<double>();
    p.b_comf = j.at("b").get<double>();
    p.delta = j.at("delta").get<double>();
    validate(p);
    return p;
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("IDM parameters: ") + e.what());
  }
}

double desired_gap(double v, double v_lead, const IdmParams &p) {
  const double dv = v - v_lead;
  const double dynamic =
    v * p.time_headway + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf));
  return p.s0 + std::max(0.0, dynamic);
}

double idm_acceleration(double v, double v_lead, double gap,
                        const IdmParams &p) {
  if (!(gap > 0.0))
    throw DomainError("idm_acceleration: non-positive gap " +
                      std::to_string(gap));
  const double free_term = std::pow(v / p.v0, p.delta);
  const double ratio = desired_gap(v, v_lead, p) / gap;
  return p.a_max * (1.0 - free_term - ratio * ratio);
}

double equilibrium_gap(double v, const IdmParams &p) {
  const double free_term = std::pow(v / p.v0, p.delta);
  if (!(free_term < 1.0))
    throw DomainError("equilibrium_gap: speed at or above desired speed");
  return (p.s0 + v * p.time_headway) / std::sqrt(1.0 - free_term);
}

std::vector<double> finite_difference_velocities(std::span<const double> s,
                                                 double dt) {
  const std::size_t n = s.size();
  std::vector<double> v(n, 0.0);
  if (n < 2)
    return v;
  if (n == 2) {
    v[0] = v[1] = (s[1] - s[0]) / dt;
    return v;
  }
  // Second-order one-sided stencils keep the end points as accurate as the
  // interior; a plain forward difference is off by a dt / 2 at the start.
  v.front() = (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * dt);
  v.back() = (3.0 * s[n - 1] - 4.0 * s[n - 2] + s[n - 3]) / (2.0 * dt);
  for (std::size_t k = 1; k + 1 < n; ++k)
    v[k] = (s[k + 1] - s[k - 1]) / (2.0 * dt);
  return v;
}

std::vector<double> open_loop_accel_sequence(const SequenceWindow &window,
                                             const IdmParams &params) {
  const auto &pair = window.pair;
  const auto v_follow =
    finite_difference_velocities(pair.follower.positions, pair.dt());
  std::vector<double> accel(pair.size());
  for (std::size_t k = 0; k < pair.size(); ++k) {
    const double gap = pair.gap(k);
    if (!(gap > 0.0))
      throw DomainError("open_loop_accel_sequence: non-positive gap at sample " +
                          std::to_string(k),
                        static_cast<std::ptrdiff_t>(k));
    accel[k] = idm_acceleration(std::max(0.0, v_follow[k]),
                                pair.leader.velocities[k], gap, params);
  }
  return accel;
}

namespace {

/// Ballistic step. When the speed would drop below the floor inside the
/// step, the vehicle reaches the floor at t* and holds it until dt.
void ballistic_step(double &pos, double &vel, double a, double dt,
                    double floor) {
  const double next = vel + a * dt;
  if (next < floor && a < 0.0) {
    const double t_stop = std::max(0.0, (floor - vel) / a);
    pos += vel * t_stop + 0.5 * a * t_stop * t_stop + floor * (dt - t_stop);
    vel = floor;
    return;
  }
  pos += vel * dt + 0.5 * a * dt * dt;
  vel = std::max(floor, next);
}

} // namespace

std::vector<double> double_integrate(std::span<const double> accels,
                                     double s_init, double v_init,
                                     const IntegrationConfig &cfg) {
  if (!(cfg.dt > 0.0))
    throw ConfigError("integration dt must be positive");
  std::vector<double> s(accels.size());
  if (accels.empty())
    return s;
  const double dt = cfg.dt;
  double pos = s_init;
  double vel = v_init;
  s[0] = pos;
  for (std::size_t k = 0; k + 1 < accels.size(); ++k) {
    const double a = accels[k];
    if (!std::isfinite(a))
      throw InputError("double_integrate: non-finite acceleration at step " +
                       std::to_string(k));
    ballistic_step(pos, vel, a, dt, cfg.velocity_floor);
    s[k + 1] = pos;
  }
  return s;
}

std::vector<double> open_loop_positions(const SequenceWindow &window,
                                        const IdmParams &params,
                                        const IntegrationConfig &cfg) {
  IntegrationConfig c = cfg;
  c.dt = window.pair.dt();
  const auto accel = open_loop_accel_sequence(window, params);
  return double_integrate(accel, window.pair.follower.positions.front(),
                          window.follower_initial_velocity, c);
}

Trajectory closed_loop_rollout(const Trajectory &leader, double follower_s0,
                               double follower_v0, const IdmParams &params,
                               const IntegrationConfig &cfg) {
  validate(leader);
  if (!leader.has_velocities())
    throw InputError("closed_loop_rollout: leader lacks velocities");
  const double dt = leader.dt;
  const std::size_t n = leader.size();

  Trajectory out;
  out.dt = dt;
  out.positions.resize(n);
  out.velocities.resize(n);
  double s = follower_s0;
  double v = follower_v0;
  for (std::size_t k = 0; k < n; ++k) {
    const double gap = leader.positions[k] - s;
    if (!(gap > 0.0))
      throw DomainError("closed_loop_rollout: gap collapsed at step " +
                          std::to_string(k),
                        static_cast<std::ptrdiff_t>(k));
    out.positions[k] = s;
    out.velocities[k] = v;
    if (k + 1 == n)
      break;
    const double a = idm_acceleration(v, leader.velocities[k], gap, params);
    ballistic_step(s, v, a, dt, cfg.velocity_floor);
  }
  return out;
}

FdeResult validate_fde(std::span<const TrajectoryPair> pairs,
                       const IdmParams &params) {
  FdeResult r;
  double sum = 0.0;
  for (const auto &pair : pairs) {
    try {
      const Trajectory f =
        closed_loop_rollout(pair.leader, pair.follower.positions.front(),
                            follower_start_velocity(pair), params);
      sum += std::abs(f.positions.back() - pair.follower.positions.back());
      ++r.evaluated;
    } catch (const DomainError &) {
      ++r.excluded;
    }
  }
  r.mean_fde = r.evaluated > 0 ? sum / static_cast<double>(r.evaluated)
                               : std::numeric_limits<double>::infinity();
  return r;
}

namespace {

constexpr std::size_t kParamCount = 6;

std::array<double, kParamCount> to_array(const IdmParams &p) {
  return {p.v0, p.time_headway, p.s0, p.a_max, p.b_comf, p.delta};
}

IdmParams from_array(const std::array<double, kParamCount> &x) {
  return {x[0], x[1], x[2], x[3], x[4], x[5]};
}

} // namespace

CalibrationResult calibrate_idm(std::span<const TrajectoryPair> pairs,
                                const CalibrationBounds &bounds,
                                const CalibrationBudget &budget,
                                const std::optional<IdmParams> &start) {
  if (pairs.empty())
    throw InputError("calibrate_idm: no pairs");
  const auto lo = to_array(bounds.lower);
  const auto hi = to_array(bounds.upper);
  std::array<double, kParamCount> x{};
  if (start)
    x = to_array(*start);
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (lo[i] > hi[i])
      throw ConfigError("calibrate_idm: inverted bounds");
    x[i] = start ? std::clamp(x[i], lo[i], hi[i]) : 0.5 * (lo[i] + hi[i]);
  }

  CalibrationResult result;
  // Collapsed rollouts are penalized so the search steers away from them.
  auto objective = [&](const std::array<double, kParamCount> &cand) {
    ++result.evaluations;
    const FdeResult f = validate_fde(pairs, from_array(cand));
    if (f.evaluated == 0)
      return std::numeric_limits<double>::infinity();
    return f.mean_fde + 1e3 * static_cast<double>(f.excluded) /
                          static_cast<double>(pairs.size());
  };

  double best = objective(x);
  if (!std::isfinite(best))
    throw Error("calibrate_idm: every rollout collapsed at the start point");

  // Hooke-Jeeves: one exploratory move per coordinate, then a pattern
  // step along the sweep's displacement; steps halve after a failed sweep.
  constexpr double kMinRelativeStep = 1e-5;
  std::array<double, kParamCount> step{};
  for (std::size_t i = 0; i < kParamCount; ++i)
    step[i] = 0.1 * (hi[i] - lo[i]);
  const auto explore = [&](std::array<double, kParamCount> &at, double &f_at) {
    for (std::size_t i = 0; i < kParamCount; ++i) {
      for (double dir : {+1.0, -1.0}) {
        if (result.evaluations >= budget.max_evaluations)
          return;
        auto cand = at;
        cand[i] = std::clamp(at[i] + dir * step[i], lo[i], hi[i]);
        if (cand[i] == at[i])
          continue;
        const double f = objective(cand);
        if (f < f_at) {
          f_at = f;
          at = cand;
          break;
        }
      }
    }
  };
  const auto steps_exhausted = [&] {
    for (std::size_t i = 0; i < kParamCount; ++i)
      if (step[i] > kMinRelativeStep * (hi[i] - lo[i]))
        return false;
    return true;
  };

  for (std::size_t sweep = 0; sweep < budget.max_sweeps &&
                              result.evaluations < budget.max_evaluations &&
                              !steps_exhausted();
       ++sweep) {
    result.sweeps = sweep + 1;
    const auto base = x;
    explore(x, best);
    if (x == base) {
      for (double &h : step)
        h *= 0.5;
      continue;
    }
    // Pattern moves while they keep paying off.
    auto prev = base;
    while (result.evaluations < budget.max_evaluations) {
      std::array<double, kParamCount> probe;
      for (std::size_t i = 0; i < kParamCount; ++i)
        probe[i] = std::clamp(2.0 * x[i] - prev[i], lo[i], hi[i]);
      double f_probe = objective(probe);
      explore(probe, f_probe);
      if (!(f_probe < best))
        break;
      prev = x;
      x = probe;
      best = f_probe;
    }
  }

  result.params = from_array(x);
  result.fde = validate_fde(pairs, result.params).mean_fde;
  return result;
}

} // namespace idmf

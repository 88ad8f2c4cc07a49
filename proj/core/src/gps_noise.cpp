// SPDX-License-Identifier: Apache-2.0
#include <idmf/error.hpp>
#include <idmf/gps_noise.hpp>
#include <idmf/random.hpp>

#include <json.hpp>

#include <cmath>

namespace idmf {

bool is_stationary(double ar1, double ar2) {
  // Stationarity triangle for an AR(2) polynomial.
  return ar2 + ar1 < 1.0 && ar2 - ar1 < 1.0 && std::abs(ar2) < 1.0;
}

void validate(const ArmaNoiseParams &p) {
  if (!(p.innovation_sd >= 0.0) || !std::isfinite(p.innovation_sd))
    throw ConfigError("noise innovation_sd must be non-negative");
  if (!std::isfinite(p.mean) || !std::isfinite(p.ma1) || !std::isfinite(p.ma2))
    throw ConfigError("noise parameters must be finite");
  if (!is_stationary(p.ar1, p.ar2))
    throw ConfigError("noise AR polynomial is not stationary");
}

ArmaNoiseParams make_arma_noise(double ar1, double ar2, double ma1,
                                double ma2, double innovation_sd, double mean,
                                std::string level_name) {
  ArmaNoiseParams p{ar1, ar2, ma1, ma2, innovation_sd, mean,
                    std::move(level_name)};
  validate(p);
  return p;
}

ArmaNoiseParams noise_preset(std::string_view level) {
  // Shared dynamics; the levels differ only in the intercept.
  constexpr double ar1 = -0.9548, ar2 = -0.3673, ma1 = 0.9188, ma2 = 0.3163;
  constexpr double sd = 1.16074;
  if (level == "small")
    return make_arma_noise(ar1, ar2, ma1, ma2, sd, 1.7923, "small");
  if (level == "middle")
    return make_arma_noise(ar1, ar2, ma1, ma2, sd, 5.3769, "middle");
  if (level == "big")
    return make_arma_noise(ar1, ar2, ma1, ma2, sd, 10.7538, "big");
  if (level == "none" || level == "clean")
    return make_arma_noise(0, 0, 0, 0, 0, 0, "none");
  throw ConfigError("unknown noise level '" + std::string(level) + "'");
}

std::vector<std::string> noise_preset_names() {
  return {"small", "middle", "big"};
}

std::string to_json(const ArmaNoiseParams &p) {
  nlohmann::ordered_json j;
  j["level"] = p.level_name;
  j["AR1"] = p.ar1;
  j["AR2"] = p.ar2;
  j["MA1"] = p.ma1;
  j["MA2"] = p.ma2;
  j["SD"] = p.innovation_sd;
  j["Intercept"] = p.mean;
  return j.dump(2) + "\n";
}

ArmaNoiseParams noise_params_from_json(const std::string &text) {
  try {
    const auto j = nlohmann::json::parse(text);
    return make_arma_noise(j.at("AR1").get<double>(), j.at("AR2").get<double>(),
                           j.at("MA1").get<double>(), j.at("MA2").get<double>(),
                           j.at("SD").get<double>(),
                           j.at("Intercept").get<double>(),
                           j.value("level", std::string{}));
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("noise parameters: ") + e.what());
  }
}

std::vector<double> generate_noise(const ArmaNoiseParams &p,
                                   std::size_t length, std::uint64_t seed) {
  validate(p);
  if (length == 0)
    throw ConfigError("generate_noise: length must be at least 1");
  Rng rng(seed);
  std::vector<double> out(length);
  double y1 = 0.0, y2 = 0.0, e1 = 0.0, e2 = 0.0;
  for (std::size_t t = 0; t < kNoiseBurnIn + length; ++t) {
    const double e = p.innovation_sd * rng.normal();
    const double y = p.ar1 * y1 + p.ar2 * y2 + e + p.ma1 * e1 + p.ma2 * e2;
    y2 = y1;
    y1 = y;
    e2 = e1;
    e1 = e;
    if (t >= kNoiseBurnIn)
      out[t - kNoiseBurnIn] = p.mean + y;
  }
  return out;
}

SequenceWindow apply_noise(const SequenceWindow &window,
                           const ArmaNoiseParams &params,
                           const NoiseChannelSpec &spec, std::uint64_t seed) {
  SequenceWindow out = window;
  const std::size_t n = window.pair.size();
  if (spec.leader_positions) {
    const auto e = generate_noise(params, n, derive_seed(seed, 1));
    for (std::size_t k = 0; k < n; ++k)
      out.pair.leader.positions[k] += e[k];
  }
  if (spec.follower_positions) {
    const auto e = generate_noise(params, n, derive_seed(seed, 2));
    for (std::size_t k = 0; k < n; ++k)
      out.pair.follower.positions[k] += e[k];
  }
  return out;
}

double measure_mae(const ArmaNoiseParams &params, std::size_t n_samples,
                   std::uint64_t seed) {
  if (n_samples < 10000)
    throw ConfigError("measure_mae: need at least 10^4 samples");
  const auto e = generate_noise(params, n_samples, seed);
  double sum = 0.0;
  for (double x : e)
    sum += std::abs(x);
  return sum / static_cast<double>(n_samples);
}

} // namespace idmf

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   gps_noise.hpp
 * @brief  Stationary ARMA(2,2) GPS position error and its injection into
 *         trajectory windows.
 */
#pragma once

#include <idmf/trajectory.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace idmf {

/**
 * e[t] = mean + y[t],
 * y[t] = ar1 y[t-1] + ar2 y[t-2] + eps[t] + ma1 eps[t-1] + ma2 eps[t-2],
 * eps ~ N(0, innovation_sd^2).
 */
struct ArmaNoiseParams {
  double ar1 = 0.0;
  double ar2 = 0.0;
  double ma1 = 0.0;
  double ma2 = 0.0;
  double innovation_sd = 0.0;
  double mean = 0.0;
  std::string level_name;

  bool operator==(const ArmaNoiseParams &) const = default;
};

/// Throws ConfigError for negative sd or a non-stationary AR polynomial.
void validate(const ArmaNoiseParams &params);

/// True iff both roots of 1 - ar1 z - ar2 z^2 lie outside the unit circle.
bool is_stationary(double ar1, double ar2);

/// Validated construction.
ArmaNoiseParams make_arma_noise(double ar1, double ar2, double ma1,
                                double ma2, double innovation_sd,
                                double mean, std::string level_name = {});

/// "small", "middle", "big".
ArmaNoiseParams noise_preset(std::string_view level);
std::vector<std::string> noise_preset_names();

std::string to_json(const ArmaNoiseParams &params);
ArmaNoiseParams noise_params_from_json(const std::string &text);

inline constexpr std::size_t kNoiseBurnIn = 200;

std::vector<double> generate_noise(const ArmaNoiseParams &params,
                                   std::size_t length, std::uint64_t seed);

struct NoiseChannelSpec {
  bool leader_positions = true;
  bool follower_positions = true;

  bool any() const noexcept { return leader_positions || follower_positions; }
};

/// Adds independent noise series to the selected position channels.
/// Velocities and the follower initial velocity are left untouched.
SequenceWindow apply_noise(const SequenceWindow &window,
                           const ArmaNoiseParams &params,
                           const NoiseChannelSpec &spec, std::uint64_t seed);

/// Mean absolute error of `n_samples` generated noise values.
double measure_mae(const ArmaNoiseParams &params, std::size_t n_samples,
                   std::uint64_t seed);

} // namespace idmf

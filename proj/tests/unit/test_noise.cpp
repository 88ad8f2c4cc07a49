// SPDX-License-Identifier: Apache-2.0
/**
 * @file   test_noise.cpp
 * @brief  ARMA(2,2) GPS error generation and injection.
 */
#include "test_support.hpp"

#include <idmf/error.hpp>
#include <idmf/gps_noise.hpp>

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace idmf;

namespace {

double mean_of(const std::vector<double> &x) {
  return std::accumulate(x.begin(), x.end(), 0.0) /
         static_cast<double>(x.size());
}

double variance_of(const std::vector<double> &x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x)
    s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Stationary variance of the small preset, solved offline from the
// ARMA(2,2) autocovariance equations.
constexpr double kSmallVariance = 1.3513686736784423;

} // namespace

TEST_SUITE("gps-noise") {

TEST_CASE("presets and validation") {
  const auto small = noise_preset("small");
  CHECK(small.ar1 == -0.9548);
  CHECK(small.mean == 1.7923);
  CHECK(noise_preset("middle").mean == 5.3769);
  CHECK(noise_preset("big").mean == 10.7538);
  CHECK_THROWS_AS(noise_preset("huge"), ConfigError);
  CHECK(is_stationary(small.ar1, small.ar2));
  CHECK_FALSE(is_stationary(1.0, 0.0));
  CHECK_FALSE(is_stationary(0.5, 0.6));
  CHECK_THROWS_AS(make_arma_noise(1.2, 0.0, 0, 0, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(make_arma_noise(0.2, 0.0, 0, 0, -1.0, 0.0), ConfigError);
  for (const auto &name : noise_preset_names())
    CHECK(noise_params_from_json(to_json(noise_preset(name))) ==
          noise_preset(name));
}

TEST_CASE("zero innovations give a constant series") {
  const auto p = make_arma_noise(0.5, 0.1, 0.3, 0.0, 0.0, 2.5);
  for (double e : generate_noise(p, 100, 1))
    CHECK(e == 2.5);
  CHECK(generate_noise(p, 1, 1).size() == 1);
  CHECK(measure_mae(make_arma_noise(0, 0, 0, 0, 0, 0), 10000, 3) == 0.0);
}

TEST_CASE("deterministic under seed") {
  const auto p = noise_preset("middle");
  CHECK(generate_noise(p, 500, 9) == generate_noise(p, 500, 9));
  CHECK(generate_noise(p, 500, 9) != generate_noise(p, 500, 10));
}

TEST_CASE("small preset: moments over a million samples") {
  const auto p = noise_preset("small");
  const auto e = generate_noise(p, 1000000, 2024);
  const double var = variance_of(e);
  CHECK(std::abs(var / kSmallVariance - 1.0) < 0.02);
  // Standard error of the mean from batch means (series is correlated).
  const std::size_t L = 1000;
  std::vector<double> blocks;
  for (std::size_t i = 0; i + L <= e.size(); i += L)
    blocks.push_back(std::accumulate(e.begin() + static_cast<long>(i),
                                     e.begin() + static_cast<long>(i + L),
                                     0.0) /
                     static_cast<double>(L));
  const double se = std::sqrt(variance_of(blocks) /
                              static_cast<double>(blocks.size()));
  CHECK(std::abs(mean_of(e) - p.mean) < 3.0 * se);
}

TEST_CASE("MAE near the tabulated values") {
  CHECK(measure_mae(noise_preset("small"), 200000, 5) ==
        doctest::Approx(1.79).epsilon(0.25));
  CHECK(measure_mae(noise_preset("middle"), 200000, 5) ==
        doctest::Approx(5.63).epsilon(0.25));
}

TEST_CASE("property: block-mean variance decays like one over block length") {
  const auto e = generate_noise(noise_preset("small"), 400000, 77);
  auto block_var = [&](std::size_t L) {
    std::vector<double> b;
    for (std::size_t i = 0; i + L <= e.size(); i += L) {
      double s = 0.0;
      for (std::size_t k = i; k < i + L; ++k)
        s += e[k];
      b.push_back(s / static_cast<double>(L));
    }
    return variance_of(b);
  };
  const double ratio = block_var(100) / block_var(1000);
  CHECK(ratio > 5.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("property: different seeds are uncorrelated") {
  const auto p = noise_preset("middle");
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto a = generate_noise(p, 10000, derive_seed(1, s));
    auto b = generate_noise(p, 10000, derive_seed(2, s));
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      sab += (a[k] - ma) * (b[k] - mb);
      saa += (a[k] - ma) * (a[k] - ma);
      sbb += (b[k] - mb) * (b[k] - mb);
    }
    CHECK(std::abs(sab / std::sqrt(saa * sbb)) < 0.05);
  }
}

TEST_CASE("apply_noise") {
  const TrajectoryPair pair = idmf::test::constant_gap_pair(20.0, 10.0, 80);
  const SequenceWindow w{pair, 10.0};

  const auto identity = make_arma_noise(0.3, 0.0, 0.0, 0.0, 0.0, 0.0);
  CHECK(apply_noise(w, identity, {}, 1) == w);
  CHECK(apply_noise(w, noise_preset("big"), {false, false}, 1) == w);

  const auto p = noise_preset("middle");
  const auto a = apply_noise(w, p, {}, 42);
  CHECK(a == apply_noise(w, p, {}, 42));
  CHECK(a.pair.leader.positions != w.pair.leader.positions);
  CHECK(a.pair.follower.positions != w.pair.follower.positions);
  CHECK(a.pair.leader.velocities == w.pair.leader.velocities);
  CHECK(a.follower_initial_velocity == w.follower_initial_velocity);
  CHECK(a.pair.pair_id == w.pair.pair_id);

  const auto lead_only = apply_noise(w, p, {true, false}, 42);
  CHECK(lead_only.pair.follower == w.pair.follower);
  CHECK(lead_only.pair.leader.positions != w.pair.leader.positions);
  const auto follow_only = apply_noise(w, p, {false, true}, 42);
  CHECK(follow_only.pair.leader == w.pair.leader);
}

} // TEST_SUITE

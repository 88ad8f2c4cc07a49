// SPDX-License-Identifier: Apache-2.0
/**
 * @file   follower_net.hpp
 * @brief  Dual-encoder, attention-decoder network predicting the follower
 *         position sequence from the leader's position and speed.
 *
 * Data flow for a batch of B windows of horizon H:
 *
 *   leader positions  (B x H x 1) -> position encoder (2-layer LSTM) --+
 *   leader velocities (B x H x 1) -> velocity encoder (2-layer LSTM) --+
 *        per-step concat (B x H x 2h) -> key map, value map (2h -> h)
 *   decoder (2-layer LSTM, input h) starts from the position encoder's
 *   final states; at each step the top hidden state queries the keys, the
 *   context is the next decoder input, and the output map reads
 *   [hidden | context] (2h -> 1).
 */
#pragma once

#include <idmf/layers.hpp>
#include <idmf/trajectory.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace idmf {

struct NetConfig {
  std::size_t hidden = 128;
  std::size_t layers = 2;
  std::size_t horizon = kDefaultHorizon;
  double position_scale = 100.0;
  double velocity_scale = 30.0;

  bool operator==(const NetConfig &) const = default;
};

void validate(const NetConfig &config);

/// Parameter count implied by the dimension list.
std::size_t expected_parameter_count(const NetConfig &config);

struct FollowerNet {
  NetConfig config;
  std::uint64_t seed = 0;
  nn::LstmStack position_encoder;
  nn::LstmStack velocity_encoder;
  nn::AffineMap key_map;
  nn::AffineMap value_map;
  nn::LstmStack decoder;
  nn::AffineMap output_map;

  /// Every parameter tensor in a fixed order.
  std::vector<nn::ParamRef> parameters();
  std::vector<nn::ConstParamRef> parameters() const;
  std::size_t parameter_count() const;

  bool operator==(const FollowerNet &other) const;
};

FollowerNet init_params(const NetConfig &config, std::uint64_t seed);

/// Parameter handles of a net registered on one tape.
struct NetVars {
  nn::LstmStackVars position_encoder;
  nn::LstmStackVars velocity_encoder;
  nn::AffineVars key_map;
  nn::AffineVars value_map;
  nn::LstmStackVars decoder;
  nn::AffineVars output_map;
};

NetVars bind(ad::Tape &tape, const FollowerNet &net, bool trainable = true);

/// Handles in FollowerNet::parameters() order.
std::vector<ad::Var> parameter_vars(const NetVars &vars);

/// Inverse of parameter_vars for a net with `layers` LSTM layers per stack.
NetVars net_vars_from(std::span<const ad::Var> params, std::size_t layers);

struct Encoded {
  ad::Var keys;   ///< B x H x h
  ad::Var values; ///< B x H x h
  std::vector<nn::LstmState> decoder_init;
};

/// positions, velocities: normalized leader channels, B x H x 1 each.
Encoded encode(const NetVars &net, ad::Var positions, ad::Var velocities);

struct Decoded {
  ad::Var predictions;                   ///< B x H x 1, normalized positions
  std::vector<ad::Var> attention_weights; ///< one B x H tensor per step
};

Decoded decode(const NetVars &net, const Encoded &encoded,
               std::size_t horizon);

/// Leader channels of a batch as two (B x H x 1) tensors.
struct BatchInput {
  ad::Tensor positions;
  ad::Tensor velocities;
};

BatchInput make_batch(std::span<const NormalizedWindow *const> windows);

/// Normalized prediction (B x H) for a batch, without gradients.
std::vector<std::vector<double>>
predict_normalized(const FollowerNet &net,
                   std::span<const NormalizedWindow *const> windows);

/// Follower positions in meters for one window.
std::vector<double> predict(const FollowerNet &net,
                            const SequenceWindow &window);

/// Batched form of predict; output order follows input order.
std::vector<std::vector<double>>
predict_many(const FollowerNet &net, std::span<const SequenceWindow> windows);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const FollowerNet &net, const std::filesystem::path &path);
FollowerNet load_checkpoint(const std::filesystem::path &path);

std::string checkpoint_bytes(const FollowerNet &net);
FollowerNet checkpoint_from_bytes(const std::string &bytes);

} // namespace idmf

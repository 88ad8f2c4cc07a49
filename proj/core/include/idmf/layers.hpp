// SPDX-License-Identifier: Apache-2.0
/**
 * @file   layers.hpp
 * @brief  Affine map, stacked LSTM and scaled dot-product attention on top
 *         of the autodiff tape.
 *
 * Layers own their parameter tensors. To run a pass, `bind` registers the
 * parameters on a tape and returns handles; the forward functions take the
 * handles.
 */
#pragma once

#include <idmf/autodiff.hpp>
#include <idmf/random.hpp>

#include <span>
#include <string>
#include <vector>

namespace idmf::nn {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Named view of one parameter tensor; used for checkpoints and optimizers.
struct ParamRef {
  std::string name;
  Tensor *tensor;
};

struct ConstParamRef {
  std::string name;
  const Tensor *tensor;
};

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng &rng);

struct AffineMap {
  Tensor weight; ///< out x in
  Tensor bias;   ///< out

  static AffineMap init(std::size_t in, std::size_t out, Rng &rng);
  std::size_t in_features() const { return weight.shape()[1]; }
  std::size_t out_features() const { return weight.shape()[0]; }
  void collect(const std::string &prefix, std::vector<ParamRef> &out);
  void collect(const std::string &prefix,
               std::vector<ConstParamRef> &out) const;
};

struct AffineVars {
  Var weight, bias;
};

AffineVars bind(Tape &tape, const AffineMap &map, bool trainable = true);
Var apply(const AffineVars &map, Var x);

struct LstmLayer {
  Tensor w_input;  ///< 4h x in, gate blocks (i, f, g, o)
  Tensor w_hidden; ///< 4h x h
  Tensor bias;     ///< 4h
};

struct LstmStack {
  std::size_t input_size = 1;
  std::size_t hidden = 0;
  std::vector<LstmLayer> layers;

  /// Forget-gate bias starts at +1, other biases at 0.
  static LstmStack init(std::size_t input_size, std::size_t hidden,
                        std::size_t num_layers, Rng &rng);
  void collect(const std::string &prefix, std::vector<ParamRef> &out);
  void collect(const std::string &prefix,
               std::vector<ConstParamRef> &out) const;
};

struct LstmLayerVars {
  Var w_input, w_hidden, bias;
};
using LstmStackVars = std::vector<LstmLayerVars>;

LstmStackVars bind(Tape &tape, const LstmStack &stack,
                   bool trainable = true);

struct LstmState {
  Var h, c;
};

/// Zero (B x hidden) states, one per layer.
std::vector<LstmState> zero_states(Tape &tape, std::size_t layers,
                                   std::size_t batch, std::size_t hidden);

/// One time step through every layer; returns the new per-layer states.
std::vector<LstmState> lstm_step(const LstmStackVars &stack, Var input,
                                 std::span<const LstmState> states);

struct LstmOutput {
  std::vector<Var> outputs;          ///< top-layer h per step, each B x h
  std::vector<LstmState> final_states;
};

/// Runs the stack over `inputs` (one B x in tensor per step). Initial
/// states default to zero.
LstmOutput lstm_forward(const LstmStackVars &stack, std::span<const Var> inputs,
                        std::span<const LstmState> initial = {});

/// Same as above for a (B x T x in) sequence.
LstmOutput lstm_forward(const LstmStackVars &stack, Var sequence,
                        std::span<const LstmState> initial = {});

struct AttentionOutput {
  Var context; ///< B x h
  Var weights; ///< B x T, each row sums to one
};

/// weights = softmax(query . keys^T / sqrt(h)); context = weights . values.
AttentionOutput scaled_dot_attention(Var query, Var keys, Var values);

} // namespace idmf::nn

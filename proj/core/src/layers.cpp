// SPDX-License-Identifier: Apache-2.0
#include <idmf/error.hpp>
#include <idmf/layers.hpp>

#include <cmath>

namespace idmf::nn {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng &rng) {
  Tensor t(shape);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i)
    t[i] = rng.uniform(-bound, bound);
  return t;
}

AffineMap AffineMap::init(std::size_t in, std::size_t out, Rng &rng) {
  return {uniform_init(Shape{out, in}, in, rng), Tensor(Shape{out}, 0.0)};
}

namespace {

template <typename Map, typename Ref>
void collect_affine(Map &m, const std::string &prefix, std::vector<Ref> &out) {
  out.push_back({prefix + ".weight", &m.weight});
  out.push_back({prefix + ".bias", &m.bias});
}

template <typename Stack, typename Ref>
void collect_lstm(Stack &s, const std::string &prefix, std::vector<Ref> &out) {
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    const std::string p = prefix + ".l" + std::to_string(l);
    out.push_back({p + ".w_input", &s.layers[l].w_input});
    out.push_back({p + ".w_hidden", &s.layers[l].w_hidden});
    out.push_back({p + ".bias", &s.layers[l].bias});
  }
}

} // namespace

void AffineMap::collect(const std::string &prefix,
                        std::vector<ParamRef> &out) {
  collect_affine(*this, prefix, out);
}

void AffineMap::collect(const std::string &prefix,
                        std::vector<ConstParamRef> &out) const {
  collect_affine(*this, prefix, out);
}

namespace {
Var register_tensor(Tape &tape, const Tensor &t, bool trainable) {
  return trainable ? tape.parameter(t) : tape.constant_ref(t);
}
} // namespace

AffineVars bind(Tape &tape, const AffineMap &map, bool trainable) {
  return {register_tensor(tape, map.weight, trainable),
          register_tensor(tape, map.bias, trainable)};
}

Var apply(const AffineVars &map, Var x) {
  return ad::affine(x, map.weight, map.bias);
}

LstmStack LstmStack::init(std::size_t input_size, std::size_t hidden,
                          std::size_t num_layers, Rng &rng) {
  if (hidden == 0 || num_layers == 0 || input_size == 0)
    throw ConfigError("LSTM dimensions must be positive");
  LstmStack s;
  s.input_size = input_size;
  s.hidden = hidden;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const std::size_t in = l == 0 ? input_size : hidden;
    LstmLayer layer;
    layer.w_input = uniform_init(Shape{4 * hidden, in}, in, rng);
    layer.w_hidden = uniform_init(Shape{4 * hidden, hidden}, hidden, rng);
    layer.bias = Tensor(Shape{4 * hidden}, 0.0);
    for (std::size_t j = hidden; j < 2 * hidden; ++j)
      layer.bias[j] = 1.0;
    s.layers.push_back(std::move(layer));
  }
  return s;
}

void LstmStack::collect(const std::string &prefix,
                        std::vector<ParamRef> &out) {
  collect_lstm(*this, prefix, out);
}

void LstmStack::collect(const std::string &prefix,
                        std::vector<ConstParamRef> &out) const {
  collect_lstm(*this, prefix, out);
}

LstmStackVars bind(Tape &tape, const LstmStack &stack, bool trainable) {
  LstmStackVars vars;
  vars.reserve(stack.layers.size());
  for (const auto &l : stack.layers)
    vars.push_back({register_tensor(tape, l.w_input, trainable),
                    register_tensor(tape, l.w_hidden, trainable),
                    register_tensor(tape, l.bias, trainable)});
  return vars;
}

std::vector<LstmState> zero_states(Tape &tape, std::size_t layers,
                                   std::size_t batch, std::size_t hidden) {
  std::vector<LstmState> states;
  states.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const Var z = tape.constant(Tensor(Shape{batch, hidden}, 0.0));
    states.push_back({z, z});
  }
  return states;
}

std::vector<LstmState> lstm_step(const LstmStackVars &stack, Var input,
                                 std::span<const LstmState> states) {
  if (states.size() != stack.size())
    throw ShapeError("lstm_step: expected " + std::to_string(stack.size()) +
                     " layer states, got " + std::to_string(states.size()));
  std::vector<LstmState> next;
  next.reserve(stack.size());
  Var x = input;
  for (std::size_t l = 0; l < stack.size(); ++l) {
    const auto &p = stack[l];
    const std::size_t hid = states[l].h.shape()[1];
    const Var hc = ad::lstm_cell(x, states[l].h, states[l].c, p.w_input,
                                 p.w_hidden, p.bias);
    LstmState s{ad::slice(hc, 0, hid), ad::slice(hc, hid, 2 * hid)};
    next.push_back(s);
    x = s.h;
  }
  return next;
}

LstmOutput lstm_forward(const LstmStackVars &stack, std::span<const Var> inputs,
                        std::span<const LstmState> initial) {
  if (inputs.empty())
    throw ShapeError("lstm_forward: empty input sequence");
  if (stack.empty())
    throw ShapeError("lstm_forward: empty stack");
  Tape &tape = inputs.front().tape();
  const std::size_t batch = inputs.front().shape()[0];
  const std::size_t hidden = stack.front().w_hidden.shape()[1];

  LstmOutput out;
  std::vector<LstmState> states =
    initial.empty() ? zero_states(tape, stack.size(), batch, hidden)
                    : std::vector<LstmState>(initial.begin(), initial.end());
  out.outputs.reserve(inputs.size());
  for (const Var &x : inputs) {
    states = lstm_step(stack, x, states);
    out.outputs.push_back(states.back().h);
  }
  out.final_states = std::move(states);
  return out;
}

LstmOutput lstm_forward(const LstmStackVars &stack, Var sequence,
                        std::span<const LstmState> initial) {
  if (sequence.shape().rank() != 3)
    throw ShapeError("lstm_forward: expected (B x T x in), got " +
                     sequence.shape().str());
  std::vector<Var> steps;
  for (std::size_t t = 0; t < sequence.shape()[1]; ++t)
    steps.push_back(ad::time_step(sequence, t));
  return lstm_forward(stack, std::span<const Var>(steps), initial);
}

AttentionOutput scaled_dot_attention(Var query, Var keys, Var values) {
  if (!(keys.shape() == values.shape()))
    throw ShapeError("attention: keys " + keys.shape().str() +
                     " and values " + values.shape().str() + " differ");
  const double h = static_cast<double>(query.shape().last());
  const Var logits = ad::scale(ad::batched_dot(query, keys), 1.0 / std::sqrt(h));
  const Var weights = ad::softmax(logits);
  return {ad::weighted_sum(weights, values), weights};
}

} // namespace idmf::nn

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   follower_net.cpp
 * @brief  Network assembly, batched inference and checkpoints.
 */
#include <idmf/error.hpp>
#include <idmf/follower_net.hpp>
#include <idmf/trajectory_io.hpp>

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace idmf {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

void validate(const NetConfig &c) {
  if (c.hidden < 2)
    throw ConfigError("hidden size must be at least 2");
  if (c.layers < 1)
    throw ConfigError("layer count must be at least 1");
  if (c.horizon < 1)
    throw ConfigError("horizon must be at least 1");
  if (!(c.position_scale > 0.0) || !(c.velocity_scale > 0.0))
    throw ConfigError("normalization scales must be positive");
}

std::size_t expected_parameter_count(const NetConfig &c) {
  const std::size_t h = c.hidden;
  auto lstm = [&](std::size_t in) {
    std::size_t n = 4 * h * in + 4 * h * h + 4 * h;
    n += (c.layers - 1) * (4 * h * h + 4 * h * h + 4 * h);
    return n;
  };
  const std::size_t encoders = 2 * lstm(1);
  const std::size_t kv = 2 * (h * 2 * h + h);
  const std::size_t decoder = lstm(h);
  const std::size_t output = 2 * h + 1;
  return encoders + kv + decoder + output;
}

namespace {
template <typename Net, typename Ref>
void collect_net(Net &net, std::vector<Ref> &out) {
  net.position_encoder.collect("position_encoder", out);
  net.velocity_encoder.collect("velocity_encoder", out);
  net.key_map.collect("key_map", out);
  net.value_map.collect("value_map", out);
  net.decoder.collect("decoder", out);
  net.output_map.collect("output_map", out);
}
} // namespace

std::vector<nn::ParamRef> FollowerNet::parameters() {
  std::vector<nn::ParamRef> out;
  collect_net(*this, out);
  return out;
}

std::vector<nn::ConstParamRef> FollowerNet::parameters() const {
  std::vector<nn::ConstParamRef> out;
  collect_net(*this, out);
  return out;
}

std::size_t FollowerNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto &p : parameters())
    n += p.tensor->numel();
  return n;
}

bool FollowerNet::operator==(const FollowerNet &other) const {
  if (!(config == other.config) || seed != other.seed)
    return false;
  const auto a = parameters();
  const auto b = other.parameters();
  if (a.size() != b.size())
    return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(*a[i].tensor == *b[i].tensor))
      return false;
  return true;
}

FollowerNet init_params(const NetConfig &config, std::uint64_t seed) {
  validate(config);
  Rng rng(seed);
  const std::size_t h = config.hidden;
  FollowerNet net;
  net.config = config;
  net.seed = seed;
  net.position_encoder = nn::LstmStack::init(1, h, config.layers, rng);
  net.velocity_encoder = nn::LstmStack::init(1, h, config.layers, rng);
  net.key_map = nn::AffineMap::init(2 * h, h, rng);
  net.value_map = nn::AffineMap::init(2 * h, h, rng);
  net.decoder = nn::LstmStack::init(h, h, config.layers, rng);
  net.output_map = nn::AffineMap::init(2 * h, 1, rng);
  return net;
}

NetVars bind(Tape &tape, const FollowerNet &net, bool trainable) {
  return {nn::bind(tape, net.position_encoder, trainable),
          nn::bind(tape, net.velocity_encoder, trainable),
          nn::bind(tape, net.key_map, trainable),
          nn::bind(tape, net.value_map, trainable),
          nn::bind(tape, net.decoder, trainable),
          nn::bind(tape, net.output_map, trainable)};
}

std::vector<Var> parameter_vars(const NetVars &vars) {
  std::vector<Var> out;
  const auto stack = [&](const nn::LstmStackVars &s) {
    for (const auto &l : s) {
      out.push_back(l.w_input);
      out.push_back(l.w_hidden);
      out.push_back(l.bias);
    }
  };
  const auto affine = [&](const nn::AffineVars &a) {
    out.push_back(a.weight);
    out.push_back(a.bias);
  };
  stack(vars.position_encoder);
  stack(vars.velocity_encoder);
  affine(vars.key_map);
  affine(vars.value_map);
  stack(vars.decoder);
  affine(vars.output_map);
  return out;
}

NetVars net_vars_from(std::span<const Var> params, std::size_t layers) {
  if (params.size() != 3 * layers * 3 + 6)
    throw ShapeError("net_vars_from: expected " +
                     std::to_string(9 * layers + 6) + " handles, got " +
                     std::to_string(params.size()));
  std::size_t i = 0;
  NetVars out;
  const auto stack = [&](nn::LstmStackVars &s) {
    for (std::size_t l = 0; l < layers; ++l, i += 3)
      s.push_back({params[i], params[i + 1], params[i + 2]});
  };
  const auto affine = [&](nn::AffineVars &a) {
    a = {params[i], params[i + 1]};
    i += 2;
  };
  stack(out.position_encoder);
  stack(out.velocity_encoder);
  affine(out.key_map);
  affine(out.value_map);
  stack(out.decoder);
  affine(out.output_map);
  return out;
}

Encoded encode(const NetVars &net, Var positions, Var velocities) {
  if (positions.shape().rank() != 3 || velocities.shape().rank() != 3)
    throw ShapeError("encode: inputs must be (B x H x 1), got " +
                     positions.shape().str() + " and " +
                     velocities.shape().str());
  if (!(positions.shape() == velocities.shape()))
    throw ShapeError("encode: position " + positions.shape().str() +
                     " and velocity " + velocities.shape().str() +
                     " channels disagree");
  const auto pos = nn::lstm_forward(net.position_encoder, positions);
  const auto vel = nn::lstm_forward(net.velocity_encoder, velocities);

  std::vector<Var> joint;
  joint.reserve(pos.outputs.size());
  for (std::size_t t = 0; t < pos.outputs.size(); ++t)
    joint.push_back(ad::concat(pos.outputs[t], vel.outputs[t]));
  const Var features = ad::stack_time(joint); // B x H x 2h

  return {nn::apply(net.key_map, features), nn::apply(net.value_map, features),
          pos.final_states};
}

Decoded decode(const NetVars &net, const Encoded &encoded,
               std::size_t horizon) {
  Decoded out;
  std::vector<nn::LstmState> states = encoded.decoder_init;
  std::vector<Var> steps;
  steps.reserve(horizon);
  out.attention_weights.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto att =
      nn::scaled_dot_attention(states.back().h, encoded.keys, encoded.values);
    states = nn::lstm_step(net.decoder, att.context, states);
    steps.push_back(
      nn::apply(net.output_map, ad::concat(states.back().h, att.context)));
    out.attention_weights.push_back(att.weights);
  }
  out.predictions = ad::stack_time(steps); // B x H x 1
  return out;
}

BatchInput make_batch(std::span<const NormalizedWindow *const> windows) {
  if (windows.empty())
    throw ShapeError("make_batch: empty batch");
  const std::size_t B = windows.size();
  const std::size_t H = windows.front()->leader_positions.size();
  BatchInput in{Tensor(Shape{B, H, 1}), Tensor(Shape{B, H, 1})};
  for (std::size_t b = 0; b < B; ++b) {
    const auto &w = *windows[b];
    if (w.leader_positions.size() != H || w.leader_velocities.size() != H)
      throw ShapeError("make_batch: windows differ in horizon");
    std::copy(w.leader_positions.begin(), w.leader_positions.end(),
              in.positions.data() + b * H);
    std::copy(w.leader_velocities.begin(), w.leader_velocities.end(),
              in.velocities.data() + b * H);
  }
  return in;
}

std::vector<std::vector<double>>
predict_normalized(const FollowerNet &net,
                   std::span<const NormalizedWindow *const> windows) {
  Tape tape;
  const NetVars vars = bind(tape, net, /*trainable=*/false);
  BatchInput in = make_batch(windows);
  const std::size_t B = windows.size();
  const std::size_t H = in.positions.shape()[1];
  if (H != net.config.horizon)
    throw InputError("window horizon " + std::to_string(H) +
                     " does not match network horizon " +
                     std::to_string(net.config.horizon));
  const Var p = tape.constant(std::move(in.positions));
  const Var v = tape.constant(std::move(in.velocities));
  const Decoded d = decode(vars, encode(vars, p, v), H);
  const Tensor &pred = d.predictions.value();
  std::vector<std::vector<double>> out(B, std::vector<double>(H));
  for (std::size_t b = 0; b < B; ++b)
    std::copy_n(pred.data() + b * H, H, out[b].begin());
  return out;
}

std::vector<double> predict(const FollowerNet &net,
                            const SequenceWindow &window) {
  return predict_many(net, std::span<const SequenceWindow>(&window, 1)).front();
}

std::vector<std::vector<double>>
predict_many(const FollowerNet &net, std::span<const SequenceWindow> windows) {
  constexpr std::size_t kChunk = 64;
  std::vector<std::vector<double>> out;
  out.reserve(windows.size());
  for (std::size_t begin = 0; begin < windows.size(); begin += kChunk) {
    const std::size_t end = std::min(windows.size(), begin + kChunk);
    std::vector<NormalizedWindow> norm;
    std::vector<Normalizer> nz;
    for (std::size_t i = begin; i < end; ++i) {
      auto [w, n] = normalize_window(windows[i], net.config.position_scale,
                                     net.config.velocity_scale);
      norm.push_back(std::move(w));
      nz.push_back(n);
    }
    std::vector<const NormalizedWindow *> ptrs;
    for (const auto &w : norm)
      ptrs.push_back(&w);
    auto pred = predict_normalized(net, ptrs);
    for (std::size_t i = 0; i < pred.size(); ++i)
      out.push_back(denormalize(pred[i], nz[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint layout: "IDMFCKPT" | u32 header length | JSON header |
// parameter values as little-endian IEEE-754 doubles in parameters() order.

namespace {

constexpr char kMagic[8] = {'I', 'D', 'M', 'F', 'C', 'K', 'P', 'T'};

void put_u32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string &in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i]))
         << (8 * i);
  return v;
}

void put_double(std::string &out, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_double(const std::string &in, std::size_t pos) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i]))
            << (8 * i);
  return std::bit_cast<double>(bits);
}

} // namespace

std::string checkpoint_bytes(const FollowerNet &net) {
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  header["hidden"] = net.config.hidden;
  header["layers"] = net.config.layers;
  header["horizon"] = net.config.horizon;
  header["position_scale"] = net.config.position_scale;
  header["velocity_scale"] = net.config.velocity_scale;
  header["seed"] = net.seed;
  header["parameter_count"] = net.parameter_count();
  auto &tensors = header["tensors"] = nlohmann::ordered_json::array();
  for (const auto &p : net.parameters()) {
    std::vector<std::size_t> dims;
    for (std::size_t a = 0; a < p.tensor->shape().rank(); ++a)
      dims.push_back(p.tensor->shape()[a]);
    tensors.push_back({{"name", p.name}, {"shape", dims}});
  }
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto &p : net.parameters())
    for (double x : p.tensor->values())
      put_double(out, x);
  return out;
}

FollowerNet checkpoint_from_bytes(const std::string &bytes) {
  if (bytes.size() < sizeof kMagic + 4 ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("checkpoint: bad magic");
  const std::uint32_t len = get_u32(bytes, sizeof kMagic);
  const std::size_t body = sizeof kMagic + 4 + len;
  if (bytes.size() < body)
    throw CheckpointError("checkpoint: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(sizeof kMagic + 4, len));
  } catch (const nlohmann::json::exception &e) {
    throw CheckpointError(std::string("checkpoint: corrupt header: ") +
                          e.what());
  }
  try {
    const auto version = header.at("format_version").get<std::uint32_t>();
    if (version != kCheckpointVersion)
      throw CheckpointError("checkpoint: unsupported format version " +
                            std::to_string(version));
    NetConfig cfg;
    cfg.hidden = header.at("hidden").get<std::size_t>();
    cfg.layers = header.at("layers").get<std::size_t>();
    cfg.horizon = header.at("horizon").get<std::size_t>();
    cfg.position_scale = header.at("position_scale").get<double>();
    cfg.velocity_scale = header.at("velocity_scale").get<double>();
    const auto seed = header.at("seed").get<std::uint64_t>();
    const auto count = header.at("parameter_count").get<std::size_t>();

    FollowerNet net = init_params(cfg, seed);
    if (net.parameter_count() != count)
      throw CheckpointError("checkpoint: parameter count mismatch");
    if (bytes.size() != body + 8 * count)
      throw CheckpointError("checkpoint: truncated parameter block");
    std::size_t pos = body;
    for (auto &p : net.parameters())
      for (double &x : p.tensor->values()) {
        x = get_double(bytes, pos);
        pos += 8;
      }
    return net;
  } catch (const nlohmann::json::exception &e) {
    throw CheckpointError(std::string("checkpoint: incomplete header: ") +
                          e.what());
  } catch (const ConfigError &e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const FollowerNet &net,
                     const std::filesystem::path &path) {
  write_text_file(path, checkpoint_bytes(net));
}

FollowerNet load_checkpoint(const std::filesystem::path &path) {
  return checkpoint_from_bytes(read_text_file(path));
}

} // namespace idmf

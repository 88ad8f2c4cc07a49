// SPDX-License-Identifier: Apache-2.0
/**
 * @file   trainer.cpp
 * @brief  Hybrid loss graph, Adam, and the epoch loop.
 */
#include <idmf/error.hpp>
#include <idmf/metrics.hpp>
#include <idmf/parallel.hpp>
#include <idmf/random.hpp>
#include <idmf/trainer.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace idmf {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

std::string to_string(ModelTargetMode mode) {
  return mode == ModelTargetMode::OpenLoop ? "open-loop" : "closed-loop";
}

ModelTargetMode model_target_mode_from_string(const std::string &name) {
  if (name == "open-loop")
    return ModelTargetMode::OpenLoop;
  if (name == "closed-loop")
    return ModelTargetMode::ClosedLoop;
  throw ConfigError("unknown model target mode '" + name + "'");
}

void validate(const TrainConfig &c) {
  if (!(c.mu >= 0.0 && c.mu <= 1.0))
    throw ConfigError("mu must lie in [0, 1]");
  if (!(c.learning_rate > 0.0))
    throw ConfigError("learning_rate must be positive");
  if (!(c.weight_decay >= 0.0))
    throw ConfigError("weight_decay must be non-negative");
  if (c.batch_size == 0 || c.chunk_size == 0)
    throw ConfigError("batch_size and chunk_size must be positive");
  if (c.max_epochs == 0)
    throw ConfigError("max_epochs must be positive");
}

// ---------------------------------------------------------------------------

void adam_step(std::span<Tensor *const> params, std::span<const Tensor> grads,
               AdamState &state, double learning_rate, double weight_decay) {
  if (params.size() != grads.size())
    throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (state.first_moment.empty()) {
    for (const Tensor *p : params) {
      state.first_moment.emplace_back(p->shape(), 0.0);
      state.second_moment.emplace_back(p->shape(), 0.0);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor &p = *params[k];
    const Tensor &g = grads[k];
    Tensor &m = state.first_moment[k];
    Tensor &v = state.second_moment[k];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double gi = g[i] + weight_decay * p[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor &g : grads)
    for (double x : g.values())
      sq += x * x;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (Tensor &g : grads)
      for (double &x : g.values())
        x *= f;
  }
  return norm;
}

// ---------------------------------------------------------------------------

std::vector<TrainingSample>
clean_samples(std::span<const SequenceWindow> windows) {
  std::vector<TrainingSample> out;
  out.reserve(windows.size());
  for (const auto &w : windows)
    out.push_back({w, w});
  return out;
}

ModelTargets precompute_model_targets(std::span<const SequenceWindow> observed,
                                      const IdmParams &params,
                                      ModelTargetMode mode) {
  validate(params);
  ModelTargets out;
  out.positions.resize(observed.size());
  out.valid.assign(observed.size(), false);
  parallel_for(observed.size(), [&](std::size_t i) {
    const auto &w = observed[i];
    try {
      if (mode == ModelTargetMode::OpenLoop) {
        out.positions[i] = open_loop_positions(w, params);
      } else {
        out.positions[i] =
          closed_loop_rollout(w.pair.leader, w.pair.follower.positions.front(),
                              w.follower_initial_velocity, params,
                              IntegrationConfig{w.pair.dt(), 0.0})
            .positions;
      }
      out.valid[i] = true;
    } catch (const DomainError &) {
      out.positions[i].assign(w.horizon(), 0.0);
    }
  });
  for (bool ok : out.valid)
    out.excluded += ok ? 0 : 1;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

/// Per-window RMSE in meters between normalized predictions (B x H) and a
/// constant normalized target; returns (B x 1).
Var rmse_rows(Var pred, const Tensor &target, double position_scale) {
  Tape &tape = pred.tape();
  const Var t = tape.constant(target);
  const Var diff = ad::scale(ad::sub(pred, t), position_scale);
  return ad::sqrt(ad::row_mean(ad::square(diff)));
}

} // namespace

Var hybrid_loss_graph(Tape &tape, const NetVars &vars, const NetConfig &config,
                      std::span<const SequenceWindow> batch,
                      std::span<const std::vector<double>> labels,
                      std::span<const std::vector<double>> model_targets,
                      const std::vector<bool> &model_valid, double mu) {
  const std::size_t B = batch.size();
  if (B == 0)
    throw InputError("hybrid loss: empty batch");
  if (labels.size() != B)
    throw InputError("hybrid loss: label count mismatch");
  const bool use_model = mu < 1.0;
  if (use_model && (model_targets.size() != B || model_valid.size() != B))
    throw InputError("hybrid loss: model target count mismatch");
  const std::size_t H = batch.front().horizon();

  std::vector<NormalizedWindow> norm;
  std::vector<Normalizer> nz;
  norm.reserve(B);
  for (const auto &w : batch) {
    if (w.horizon() != H)
      throw InputError("hybrid loss: windows differ in horizon");
    auto [n, z] =
      normalize_window(w, config.position_scale, config.velocity_scale);
    norm.push_back(std::move(n));
    nz.push_back(z);
  }
  std::vector<const NormalizedWindow *> ptrs;
  for (const auto &n : norm)
    ptrs.push_back(&n);
  BatchInput in = make_batch(ptrs);

  Tensor label_norm(Shape{B, H});
  Tensor model_norm(Shape{B, H});
  Tensor data_weight(Shape{B, 1}, mu);
  Tensor model_weight(Shape{B, 1}, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b].size() != H)
      throw InputError("hybrid loss: label length mismatch");
    for (std::size_t k = 0; k < H; ++k)
      label_norm.at(b, k) = nz[b].position(labels[b][k]);
    if (use_model) {
      if (model_targets[b].size() != H)
        throw InputError("hybrid loss: model target length mismatch");
      for (std::size_t k = 0; k < H; ++k)
        model_norm.at(b, k) = nz[b].position(model_targets[b][k]);
      model_weight[b] = model_valid[b] ? 1.0 - mu : 0.0;
    }
  }

  const Var p = tape.constant(std::move(in.positions));
  const Var v = tape.constant(std::move(in.velocities));
  const Decoded d = decode(vars, encode(vars, p, v), H);
  const Var pred = ad::reshape(d.predictions, Shape{B, H});

  Var total;
  if (mu > 0.0) {
    const Var data = rmse_rows(pred, label_norm, config.position_scale);
    total = ad::mul(data, tape.constant(std::move(data_weight)));
  }
  if (use_model) {
    const Var model = rmse_rows(pred, model_norm, config.position_scale);
    const Var weighted = ad::mul(model, tape.constant(std::move(model_weight)));
    total = total.valid() ? ad::add(total, weighted) : weighted;
  }
  return ad::scale(ad::sum(total), 1.0 / static_cast<double>(B));
}

BatchGradient batch_gradient(const FollowerNet &net,
                             std::span<const SequenceWindow> batch,
                             std::span<const std::vector<double>> labels,
                             std::span<const std::vector<double>> model_targets,
                             const std::vector<bool> &model_valid, double mu,
                             std::size_t chunk_size) {
  const std::size_t B = batch.size();
  const std::size_t chunks = (B + chunk_size - 1) / chunk_size;
  const bool use_model = mu < 1.0;

  struct ChunkResult {
    double loss = 0.0;
    std::vector<Tensor> grads;
  };
  std::vector<ChunkResult> results(chunks);

  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t n = std::min(chunk_size, B - begin);
    std::vector<bool> valid;
    std::span<const std::vector<double>> targets;
    if (use_model) {
      valid.assign(model_valid.begin() + static_cast<std::ptrdiff_t>(begin),
                   model_valid.begin() +
                     static_cast<std::ptrdiff_t>(begin + n));
      targets = model_targets.subspan(begin, n);
    }
    Tape tape;
    const NetVars vars = bind(tape, net);
    // Chunk loss is a mean over n windows; rescale to a sum so chunks add.
    const Var loss =
      ad::scale(hybrid_loss_graph(tape, vars, net.config,
                                  batch.subspan(begin, n),
                                  labels.subspan(begin, n), targets, valid, mu),
                static_cast<double>(n));
    tape.backward(loss);
    ChunkResult &r = results[c];
    r.loss = loss.value()[0];
    for (const Var &p : parameter_vars(vars))
      r.grads.push_back(tape.grad(p.id()));
  });

  BatchGradient out;
  const double inv = 1.0 / static_cast<double>(B);
  for (std::size_t c = 0; c < chunks; ++c) {
    out.loss += results[c].loss;
    if (c == 0) {
      out.grads = std::move(results[0].grads);
      continue;
    }
    for (std::size_t k = 0; k < out.grads.size(); ++k) {
      Tensor &g = out.grads[k];
      const Tensor &h = results[c].grads[k];
      for (std::size_t i = 0; i < g.numel(); ++i)
        g[i] += h[i];
    }
  }
  out.loss *= inv;
  for (Tensor &g : out.grads)
    for (double &x : g.values())
      x *= inv;
  return out;
}

double validation_loss(const FollowerNet &net,
                       std::span<const TrainingSample> samples) {
  if (samples.empty())
    return 0.0;
  std::vector<SequenceWindow> inputs;
  inputs.reserve(samples.size());
  for (const auto &s : samples)
    inputs.push_back(s.observed);
  const auto pred = predict_many(net, inputs);
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    sum += rmse(pred[i], samples[i].truth.pair.follower.positions);
  return sum / static_cast<double>(samples.size());
}

bool TrainRecord::same_losses(const TrainRecord &other) const {
  return train_loss == other.train_loss &&
         validation_loss == other.validation_loss &&
         best_epoch == other.best_epoch;
}

std::string train_record_csv(const TrainRecord &record) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (std::size_t e = 0; e < record.epochs(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e + 1,
                  record.train_loss[e], record.validation_loss[e]);
    out << buf;
  }
  return out.str();
}

TrainResult train(FollowerNet net, std::span<const TrainingSample> train_set,
                  std::span<const TrainingSample> validation_set,
                  const IdmParams &idm_params, const TrainConfig &config,
                  const std::function<void(const EpochReport &)> &on_epoch) {
  validate(config);
  if (train_set.empty())
    throw InputError("train: empty training set");
  const std::size_t H = net.config.horizon;
  for (const auto &s : train_set)
    if (s.observed.horizon() != H)
      throw InputError("train: window horizon " +
                       std::to_string(s.observed.horizon()) +
                       " does not match network horizon " + std::to_string(H));

  std::vector<SequenceWindow> observed;
  std::vector<std::vector<double>> labels;
  observed.reserve(train_set.size());
  for (const auto &s : train_set) {
    observed.push_back(s.observed);
    labels.push_back(s.observed.pair.follower.positions);
  }

  TrainResult result;
  ModelTargets targets;
  if (config.mu < 1.0) {
    targets = precompute_model_targets(observed, idm_params,
                                       config.model_target);
    result.model_target_excluded = targets.excluded;
  }

  AdamState adam;
  std::vector<Tensor *> params;
  for (auto &p : net.parameters())
    params.push_back(p.tensor);

  FollowerNet best = net;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<SequenceWindow> batch;
  std::vector<std::vector<double>> batch_labels, batch_targets;
  std::vector<bool> batch_valid;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(config.seed, epoch));
    rng.shuffle(order.begin(), order.end());

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      batch_labels.clear();
      batch_targets.clear();
      batch_valid.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t idx = order[i];
        batch.push_back(observed[idx]);
        batch_labels.push_back(labels[idx]);
        if (config.mu < 1.0) {
          batch_targets.push_back(targets.positions[idx]);
          batch_valid.push_back(targets.valid[idx]);
        }
      }
      BatchGradient g =
        batch_gradient(net, batch, batch_labels, batch_targets, batch_valid,
                       config.mu, config.chunk_size);
      if (!std::isfinite(g.loss))
        throw TrainingError("non-finite loss at epoch " +
                            std::to_string(epoch + 1) + ", batch " +
                            std::to_string(batch_index + 1));
      clip_global_norm(g.grads, config.grad_clip_norm);
      adam_step(params, g.grads, adam, config.learning_rate,
                config.weight_decay);
      epoch_loss += g.loss * static_cast<double>(end - begin);
    }
    epoch_loss /= static_cast<double>(order.size());

    const double val = validation_set.empty()
                         ? epoch_loss
                         : validation_loss(net, validation_set);
    const bool improved = val < best_val;
    if (improved) {
      best_val = val;
      best = net;
      result.record.best_epoch = epoch;
    }
    const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
    result.record.train_loss.push_back(epoch_loss);
    result.record.validation_loss.push_back(val);
    result.record.wall_seconds.push_back(secs);
    if (on_epoch)
      on_epoch({epoch + 1, epoch_loss, val, improved});
  }
  result.net = std::move(best);
  return result;
}

} // namespace idmf

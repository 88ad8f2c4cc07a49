// SPDX-License-Identifier: Apache-2.0
/**
 * @file   trainer.hpp
 * @brief  Hybrid data/physics training of FollowerNet with Adam.
 */
#pragma once

#include <idmf/follower_net.hpp>
#include <idmf/idm.hpp>
#include <idmf/trajectory.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace idmf {

/// How the physics target is built from a window.
enum class ModelTargetMode {
  OpenLoop,  ///< IDM accelerations along observed states, then integrated
  ClosedLoop ///< IDM follower re-simulated against the observed leader
};

std::string to_string(ModelTargetMode mode);
ModelTargetMode model_target_mode_from_string(const std::string &name);

struct TrainConfig {
  double mu = 0.7;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 200;
  double grad_clip_norm = 5.0; ///< <= 0 disables clipping
  std::uint64_t seed = 0;
  ModelTargetMode model_target = ModelTargetMode::OpenLoop;
  /// Windows per tape. Gradients are reduced chunk by chunk in index
  /// order, so this (not the thread count) fixes the summation order.
  std::size_t chunk_size = 16;
};

void validate(const TrainConfig &config);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<ad::Tensor> first_moment;
  std::vector<ad::Tensor> second_moment;
};

/// One Adam step with classic L2 coupling: g += weight_decay * theta.
void adam_step(std::span<ad::Tensor *const> params,
               std::span<const ad::Tensor> grads, AdamState &state,
               double learning_rate, double weight_decay);

/// Scales gradients so their global L2 norm is at most max_norm; returns
/// the norm before clipping.
double clip_global_norm(std::span<ad::Tensor> grads, double max_norm);

/// Observed (possibly noisy) window plus its clean ground truth.
struct TrainingSample {
  SequenceWindow observed;
  SequenceWindow truth;
};

/// Clean samples (observed == truth).
std::vector<TrainingSample> clean_samples(std::span<const SequenceWindow> w);

struct ModelTargets {
  std::vector<std::vector<double>> positions; ///< meters, per window
  std::vector<bool> valid;
  std::size_t excluded = 0;
};

/// Physics targets from the observed channels, the recorded initial
/// velocity and `params`. Windows whose gap leaves the IDM domain are
/// flagged invalid and counted.
ModelTargets precompute_model_targets(std::span<const SequenceWindow> observed,
                                      const IdmParams &params,
                                      ModelTargetMode mode);

struct TrainRecord {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::vector<double> wall_seconds;
  std::size_t best_epoch = 0;

  std::size_t epochs() const { return train_loss.size(); }
  /// Compares losses and best epoch; wall time is excluded.
  bool same_losses(const TrainRecord &other) const;
};

/// CSV with columns epoch,train_loss,val_loss.
std::string train_record_csv(const TrainRecord &record);

struct EpochReport {
  std::size_t epoch = 0; ///< 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
  bool improved = false;
};

struct TrainResult {
  FollowerNet net; ///< best-validation parameters
  TrainRecord record;
  std::size_t model_target_excluded = 0;
};

/// Loss and mean gradient of one batch. Exposed for gradient checks.
struct BatchGradient {
  double loss = 0.0;
  std::vector<ad::Tensor> grads; ///< parameters() order
};

/**
 * Mean hybrid loss over `batch` and its gradient w.r.t. every network
 * parameter. `labels` and `model_targets` are follower positions in meters
 * aligned with `batch`; `model_valid` masks the physics term per window.
 */
BatchGradient batch_gradient(const FollowerNet &net,
                             std::span<const SequenceWindow> batch,
                             std::span<const std::vector<double>> labels,
                             std::span<const std::vector<double>> model_targets,
                             const std::vector<bool> &model_valid, double mu,
                             std::size_t chunk_size = 16);

/// Builds the mean hybrid loss of a batch on a tape, given parameter handles
/// bound from `net`. Used by batch_gradient and by gradient checks.
ad::Var hybrid_loss_graph(ad::Tape &tape, const NetVars &vars,
                          const NetConfig &config,
                          std::span<const SequenceWindow> batch,
                          std::span<const std::vector<double>> labels,
                          std::span<const std::vector<double>> model_targets,
                          const std::vector<bool> &model_valid, double mu);

/// Mean data RMSE (meters) of predictions on the observed inputs against
/// the clean follower truth.
double validation_loss(const FollowerNet &net,
                       std::span<const TrainingSample> samples);

TrainResult train(FollowerNet net, std::span<const TrainingSample> train_set,
                  std::span<const TrainingSample> validation_set,
                  const IdmParams &idm_params, const TrainConfig &config,
                  const std::function<void(const EpochReport &)> &on_epoch = {});

} // namespace idmf

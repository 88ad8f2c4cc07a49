// SPDX-License-Identifier: Apache-2.0
/**
 * @file   metrics.cpp
 * @brief  Sequence error metrics.
 */
#include <idmf/error.hpp>
#include <idmf/metrics.hpp>

#include <cmath>
#include <string>

namespace idmf {

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw InputError("rmse: length mismatch " + std::to_string(pred.size()) +
                     " vs " + std::to_string(truth.size()));
  if (pred.empty())
    throw InputError("rmse: empty sequences");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double fde(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw InputError("fde: length mismatch or empty sequences");
  return std::abs(pred.back() - truth.back());
}

double hybrid_loss(std::span<const double> pred, std::span<const double> label,
                   std::span<const double> model_pred, double mu) {
  if (mu == 1.0)
    return rmse(pred, label);
  if (mu == 0.0)
    return rmse(pred, model_pred);
  return mu * rmse(pred, label) + (1.0 - mu) * rmse(pred, model_pred);
}

} // namespace idmf

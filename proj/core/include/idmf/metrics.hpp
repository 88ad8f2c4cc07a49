// SPDX-License-Identifier: Apache-2.0
/**
 * @file   metrics.hpp
 * @brief  Sequence error metrics in meters.
 */
#pragma once

#include <span>

namespace idmf {

/// Root mean squared pointwise difference. Throws InputError on length
/// mismatch or empty input.
double rmse(std::span<const double> pred, std::span<const double> truth);

/// Absolute error at the final sample.
double fde(std::span<const double> pred, std::span<const double> truth);

/// mu * rmse(pred, label) + (1 - mu) * rmse(pred, model_pred).
double hybrid_loss(std::span<const double> pred, std::span<const double> label,
                   std::span<const double> model_pred, double mu);

} // namespace idmf

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   svg_plot.hpp
 * @brief  Self-contained SVG line charts.
 */
#pragma once

#include <idmf/trainer.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace idmf {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color; ///< empty picks from the default palette
  bool dashed = false;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  int width = 720;
  int height = 440;
};

/// One polyline per series plus a legend. Non-finite points are skipped.
std::string line_chart_svg(const ChartSpec &chart);

/// Training and validation loss per epoch.
std::string loss_curve_svg(const TrainRecord &record,
                           const std::string &title = "Training loss");

/// Leader and follower truth plus the three predictors, over time.
struct TrajectoryOverlay {
  double dt = kDefaultDt;
  std::vector<double> leader;
  std::vector<double> follower;
  std::vector<double> learning;
  std::vector<double> model;
  std::vector<double> hybrid;
};

std::string trajectory_overlay_svg(const TrajectoryOverlay &overlay,
                                   const std::string &title = "Prediction");

void write_svg(const std::string &svg, const std::filesystem::path &path);

} // namespace idmf

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   svg_plot.cpp
 * @brief  Minimal SVG line charts.
 */
#include <idmf/error.hpp>
#include <idmf/svg_plot.hpp>
#include <idmf/trajectory_io.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace idmf {

namespace {

constexpr const char *kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string &s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    default: out += c;
    }
  }
  return out;
}

/// Rounded tick step giving roughly `target` intervals over span.
std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

double tick_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

} // namespace

std::string line_chart_svg(const ChartSpec &chart) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const auto &s : chart.series) {
    if (s.x.size() != s.y.size())
      throw InputError("plot: series '" + s.label + "' has " +
                       std::to_string(s.x.size()) + " x and " +
                       std::to_string(s.y.size()) + " y values");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
        continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x0 <= x1)) {
    x0 = 0.0;
    x1 = 1.0;
    y0 = 0.0;
    y1 = 1.0;
  }
  if (x1 - x0 < 1e-12) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 - y0 < 1e-12) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.04 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  const double W = chart.width, Hh = chart.height;
  const double left = 70, right = 170, top = 40, bottom = 55;
  const double pw = W - left - right, ph = Hh - top - bottom;
  const auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  const auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width
    << "\" height=\"" << chart.height << "\" viewBox=\"0 0 " << chart.width
    << ' ' << chart.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << num(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\""
    << " font-size=\"15\">" << escape(chart.title) << "</text>\n";

  // Axes and ticks.
  o << "<g stroke=\"#444\" fill=\"none\">\n<rect x=\"" << num(left) << "\" y=\""
    << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\"/>\n</g>\n<g fill=\"#444\">\n";
  const double xs = tick_step(x1 - x0, 6);
  for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs)
    o << "<text x=\"" << num(px(t)) << "\" y=\"" << num(top + ph + 16)
      << "\" text-anchor=\"middle\">" << fmt_tick(t) << "</text>\n";
  const double ys = tick_step(y1 - y0, 6);
  for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys)
    o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(t) + 4)
      << "\" text-anchor=\"end\">" << fmt_tick(t) << "</text>\n";
  o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(Hh - 12)
    << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n"
    << "<text x=\"16\" y=\"" << num(top + ph / 2)
    << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << num(top + ph / 2) << ")\">" << escape(chart.y_label) << "</text>\n"
    << "</g>\n";

  // Series.
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto &s = chart.series[k];
    const std::string color =
      s.color.empty() ? kPalette[k % std::size(kPalette)] : s.color;
    o << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.6\"" << (s.dashed ? " stroke-dasharray=\"6 4\"" : "")
      << " points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
        continue;
      o << (first ? "" : " ") << num(px(s.x[i])) << ',' << num(py(s.y[i]));
      first = false;
    }
    o << "\"/>\n";
  }

  // Legend.
  o << "<g class=\"legend\">\n";
  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto &s = chart.series[k];
    const std::string color =
      s.color.empty() ? kPalette[k % std::size(kPalette)] : s.color;
    const double y = top + 10 + 20.0 * static_cast<double>(k);
    o << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(y)
      << "\" x2=\"" << num(left + pw + 36) << "\" y2=\"" << num(y)
      << "\" stroke=\"" << color << "\" stroke-width=\"2\""
      << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n"
      << "<text x=\"" << num(left + pw + 42) << "\" y=\"" << num(y + 4)
      << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

std::string loss_curve_svg(const TrainRecord &record,
                           const std::string &title) {
  ChartSpec c;
  c.title = title;
  c.x_label = "epoch";
  c.y_label = "loss (m)";
  PlotSeries train{"training", {}, record.train_loss, "#1f77b4", false};
  PlotSeries val{"validation", {}, record.validation_loss, "#d62728", true};
  for (std::size_t e = 0; e < record.epochs(); ++e) {
    train.x.push_back(static_cast<double>(e + 1));
    val.x.push_back(static_cast<double>(e + 1));
  }
  c.series = {std::move(train), std::move(val)};
  return line_chart_svg(c);
}

std::string trajectory_overlay_svg(const TrajectoryOverlay &ov,
                                   const std::string &title) {
  ChartSpec c;
  c.title = title;
  c.x_label = "time (s)";
  c.y_label = "position (m)";
  const auto series = [&](const char *label, const std::vector<double> &y,
                          const char *color, bool dashed) {
    PlotSeries s{label, {}, y, color, dashed};
    for (std::size_t i = 0; i < y.size(); ++i)
      s.x.push_back(static_cast<double>(i) * ov.dt);
    return s;
  };
  c.series = {series("leader (truth)", ov.leader, "#7f7f7f", false),
              series("follower (truth)", ov.follower, "#000000", false),
              series("learning", ov.learning, "#1f77b4", true),
              series("IDM", ov.model, "#2ca02c", true),
              series("hybrid", ov.hybrid, "#d62728", true)};
  return line_chart_svg(c);
}

void write_svg(const std::string &svg, const std::filesystem::path &path) {
  write_text_file(path, svg);
}

} // namespace idmf

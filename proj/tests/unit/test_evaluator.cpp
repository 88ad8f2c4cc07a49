// SPDX-License-Identifier: Apache-2.0
/**
 * @file   test_evaluator.cpp
 * @brief  Metrics, baselines, sweeps, reports and SVG output.
 */
#include "test_support.hpp"

#include <idmf/error.hpp>
#include <idmf/evaluator.hpp>
#include <idmf/metrics.hpp>
#include <idmf/scenario.hpp>
#include <idmf/svg_plot.hpp>
#include <idmf/trajectory_io.hpp>

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <regex>

using namespace idmf;

namespace {

const IdmParams kSumo = idm_preset("sumo");

// Tags must nest properly; self-closing and declaration tags are skipped.
bool balanced_xml(const std::string &text) {
  static const std::regex tag(R"(<(/?)([a-zA-Z]+)[^>]*?(/?)>)");
  std::vector<std::string> stack;
  for (std::sregex_iterator it(text.begin(), text.end(), tag), end; it != end;
       ++it) {
    const auto &m = *it;
    if (m[3] == "/")
      continue;
    if (m[1] == "/") {
      if (stack.empty() || stack.back() != m[2])
        return false;
      stack.pop_back();
    } else {
      stack.push_back(m[2]);
    }
  }
  return stack.empty();
}

std::size_t count_of(const std::string &s, const std::string &needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos;
       p = s.find(needle, p + 1))
    ++n;
  return n;
}

DatasetSplit small_split(std::size_t scenarios, std::size_t H,
                         std::uint64_t seed) {
  const SimDataset d = build_dataset(scenarios, {}, kSumo, seed);
  return split_dataset(window_pairs(d.pairs, H, H), {}, seed);
}

} // namespace

TEST_SUITE("evaluator") {

TEST_CASE("rmse and fde examples") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(rmse(a, a) == 0.0);
  CHECK(fde(a, a) == 0.0);
  std::vector<double> b = a;
  for (double &x : b)
    x += 2.5;
  CHECK(rmse(a, b) == 2.5);
  b = a;
  b.back() -= 3.0;
  CHECK(fde(a, b) == 3.0);
  CHECK_THROWS_AS(rmse(a, std::vector<double>{1, 2}), InputError);
  CHECK_THROWS_AS(fde(std::vector<double>{}, std::vector<double>{}), InputError);
}

TEST_CASE("property: metrics agree with brute force") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(100);
    std::vector<double> p(n), t(n);
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = rng.uniform(-50, 50);
      t[k] = rng.uniform(-50, 50);
    }
    long double acc = 0.0L;
    double max_err = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += static_cast<long double>(p[k] - t[k]) * (p[k] - t[k]);
      max_err = std::max(max_err, std::abs(p[k] - t[k]));
    }
    const double brute = std::sqrt(static_cast<double>(acc / n));
    const double r = rmse(p, t);
    const double f = fde(p, t);
    CHECK(std::abs(r - brute) <= 1e-12 * std::max(1.0, brute));
    CHECK(f == std::abs(p.back() - t.back()));
    CHECK(f <= max_err);
    CHECK(max_err <= std::sqrt(static_cast<double>(n)) * r * (1 + 1e-12));
  }
}

TEST_CASE("model evaluation") {
  NetConfig nc;
  nc.hidden = 4;
  nc.horizon = 20;
  const FollowerNet net = init_params(nc, 3);
  const DatasetSplit d = small_split(20, 20, 2);
  std::vector<TrainingSample> memorized;
  for (const auto &w : d.test) {
    TrainingSample s{w, w};
    s.truth.pair.follower.positions = predict(net, w);
    memorized.push_back(s);
  }
  const MetricRow zero = evaluate_model(net, memorized);
  CHECK(zero.rmse < 1e-12);
  CHECK(zero.count == memorized.size());
  CHECK(zero.tag == "learning");

  const auto samples = clean_samples(d.test);
  const MetricRow row = evaluate_model(net, samples);
  double r = 0.0, f = 0.0;
  for (const auto &s : samples) {
    const auto y = predict(net, s.observed);
    r += rmse(y, s.truth.pair.follower.positions);
    f += fde(y, s.truth.pair.follower.positions);
  }
  CHECK(std::abs(row.rmse - r / samples.size()) < 1e-12);
  CHECK(std::abs(row.fde - f / samples.size()) < 1e-12);

  const auto long_windows = clean_samples(small_split(5, 40, 2).test);
  CHECK_THROWS_AS(evaluate_model(net, long_windows), InputError);
}

TEST_CASE("IDM baseline") {
  const DatasetSplit d = small_split(300, 80, 4);
  const auto clean = clean_samples(d.test);
  const MetricRow row = evaluate_idm_baseline(clean, kSumo);
  CHECK(row.rmse < 0.05);
  CHECK(row.excluded == 0);
  CHECK(row.tag == "idm");
  CHECK(evaluate_idm_baseline(clean, kSumo) == row);

  double prev = row.rmse;
  for (const char *level : {"small", "middle", "big"}) {
    const auto noisy = noisy_samples(d.test, noise_preset(level), {}, 17);
    const MetricRow r = evaluate_idm_baseline(noisy, kSumo);
    CAPTURE(level);
    CHECK(r.rmse > prev);
    prev = r.rmse;
  }
}

TEST_CASE("noisy samples and splits") {
  const DatasetSplit d = small_split(40, 80, 5);
  const auto a = noisy_samples(d.train, noise_preset("small"), {}, 3);
  CHECK(a.size() == d.train.size());
  CHECK(a[0].truth == d.train[0]);
  CHECK(a[0].observed.pair.leader.velocities == d.train[0].pair.leader.velocities);
  CHECK_FALSE(a[0].observed == d.train[0]);
  CHECK(noisy_samples(d.train, noise_preset("small"), {}, 3)[1].observed ==
        a[1].observed);

  CHECK(label_seed("middle") == label_seed("middle"));
  CHECK(label_seed("middle") != label_seed("small"));

  const SampleSplit none = make_sample_split(d, "none", {}, 1);
  CHECK(none.test.size() == d.test.size());
  CHECK(none.test[0].observed == none.test[0].truth);
  const SampleSplit capped = make_sample_split(d, "middle", {}, 1, 3, 2);
  CHECK(capped.train.size() == 3);
  CHECK(capped.validation.size() == 2);
  CHECK(capped.test.size() == d.test.size());
  CHECK(make_sample_split(d, "middle", {}, 1).test[0].observed ==
        capped.test[0].observed);
  CHECK_THROWS_AS(make_sample_split(d, "loud", {}, 1), ConfigError);
}

TEST_CASE("sweep layout and determinism") {
  const DatasetSplit d = small_split(40, 20, 6);
  SweepSpec spec;
  spec.mu_values = {0.7};
  spec.noise_levels = {"small"};
  spec.data_seed = 3;
  SweepSetup setup;
  setup.net.hidden = 3;
  setup.net.horizon = 20;
  setup.train.max_epochs = 2;
  setup.train.batch_size = 16;
  setup.max_train_windows = 20;
  setup.max_validation_windows = 10;

  std::size_t cells = 0, with_record = 0;
  const MetricReport r = sweep(spec, d, setup, [&](const SweepCell &c) {
    ++cells;
    with_record += c.record != nullptr;
  });
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].tag == "learning");
  CHECK(r.rows[1].tag == "hybrid");
  CHECK(r.rows[1].mu == 0.7);
  CHECK(r.rows[2].tag == "idm");
  CHECK(cells == 3);
  CHECK(with_record == 2);
  for (const auto &row : r.rows) {
    CHECK_FALSE(row.failed);
    CHECK(row.fde <= std::sqrt(20.0) * row.rmse);
  }
  CHECK(sweep(spec, d, setup) == r);

  spec.mu_values = {1.0, 0.7, 0.5, 0.3, 0.0};
  spec.noise_levels = {"small", "middle"};
  spec.idm_presets = {"sumo", "ngsim-yang2022"};
  setup.train.max_epochs = 1;
  const MetricReport full = sweep(spec, d, setup);
  CHECK(full.rows.size() == 2 * (1 + 2 * 4));

  const std::string table = report_table_csv(full);
  CHECK(table.rfind("tag,mu,idm_preset,rmse_small,rmse_middle\n", 0) == 0);
  CHECK(count_of(table, "\n") == 1 + 9);
}

TEST_CASE("a failing cell is recorded and the sweep continues") {
  const DatasetSplit d = small_split(20, 20, 7);
  SweepSpec spec;
  spec.mu_values = {0.5};
  spec.noise_levels = {"small"};
  SweepSetup setup;
  setup.net.hidden = 3;
  setup.net.horizon = 20;
  setup.train.max_epochs = 1;
  setup.train.learning_rate = -1.0; // rejected by train()
  const MetricReport r = sweep(spec, d, setup);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].failed);
  CHECK(r.rows[1].failed);
  CHECK_FALSE(r.rows[0].error.empty());
  CHECK_FALSE(r.rows[2].failed); // IDM baseline needs no training
}

TEST_CASE("report emission") {
  const MetricReport empty;
  CHECK(report_csv(empty) ==
        "tag,mu,noise_level,idm_preset,rmse,fde,count,excluded,failed,error\n");
  MetricReport r;
  r.rows.push_back({"hybrid", 0.7, "middle", "sumo", 5.5, 3.25, 10, 1, false, ""});
  r.rows.push_back({"idm", 0.0, "middle", "sumo", 0, 0, 0, 0, true, "boom, \"x\""});
  const std::string csv = report_csv(r);
  CHECK(count_of(csv, "\n") == 3);
  CHECK(csv.find("hybrid,0.7,middle,sumo,") != std::string::npos);
  const auto dir = std::filesystem::temp_directory_path() / "idmf_report_test";
  std::filesystem::remove_all(dir);
  emit_report(r, dir);
  for (const char *f : {"report.csv", "report.json", "table.csv"})
    CHECK(std::filesystem::exists(dir / f));
  CHECK(read_text_file(dir / "report.csv") == csv);
  std::filesystem::remove_all(dir);
}

TEST_CASE("SVG charts") {
  ChartSpec chart;
  chart.title = "a < b & c";
  chart.series.push_back({"one", {0, 1, 2}, {1, 4, 9}, "", false});
  chart.series.push_back({"two", {0, 1, 2}, {2, std::nan(""), 3}, "#123456", true});
  const std::string svg = line_chart_svg(chart);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(balanced_xml(svg));
  CHECK(count_of(svg, "<polyline") == 2);
  CHECK(svg.find("class=\"legend\"") != std::string::npos);
  CHECK(svg.find("a &lt; b &amp; c") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);

  chart.series.push_back({"bad", {0, 1}, {1}, "", false});
  CHECK_THROWS_AS(line_chart_svg(chart), InputError);

  TrainRecord rec;
  rec.train_loss = {3, 2, 1};
  rec.validation_loss = {3.5, 2.5, 2.0};
  const std::string loss = loss_curve_svg(rec);
  CHECK(balanced_xml(loss));
  CHECK(count_of(loss, "<polyline") == 2);

  TrajectoryOverlay ov;
  for (int k = 0; k < 80; ++k) {
    ov.leader.push_back(20 + k);
    ov.follower.push_back(k);
    ov.learning.push_back(k + 0.5);
    ov.model.push_back(k - 0.5);
    ov.hybrid.push_back(k + 0.1);
  }
  const std::string t = trajectory_overlay_svg(ov);
  CHECK(balanced_xml(t));
  CHECK(count_of(t, "<polyline") == 5);
  for (const char *label : {"leader (truth)", "follower (truth)", "learning",
                            "IDM", "hybrid"})
    CHECK(t.find(label) != std::string::npos);
}

} // TEST_SUITE

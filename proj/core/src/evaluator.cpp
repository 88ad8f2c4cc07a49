// SPDX-License-Identifier: Apache-2.0
/**
 * @file   evaluator.cpp
 * @brief  Scoring, baselines, sweeps and reports.
 */
#include <idmf/error.hpp>
#include <idmf/evaluator.hpp>
#include <idmf/metrics.hpp>
#include <idmf/parallel.hpp>
#include <idmf/random.hpp>
#include <idmf/trajectory_io.hpp>

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace idmf {

namespace {

// Shortest text that round-trips.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(const char *spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

} // namespace

MetricRow evaluate_model(const FollowerNet &net,
                         std::span<const TrainingSample> samples) {
  MetricRow row;
  row.tag = "learning";
  if (samples.empty())
    return row;
  std::vector<SequenceWindow> inputs;
  inputs.reserve(samples.size());
  for (const auto &s : samples) {
    if (s.observed.horizon() != net.config.horizon)
      throw InputError("evaluate: window horizon " +
                       std::to_string(s.observed.horizon()) +
                       " does not match network horizon " +
                       std::to_string(net.config.horizon));
    inputs.push_back(s.observed);
  }
  const auto pred = predict_many(net, inputs);
  double r = 0.0, f = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto &truth = samples[i].truth.pair.follower.positions;
    r += rmse(pred[i], truth);
    f += fde(pred[i], truth);
  }
  const double n = static_cast<double>(samples.size());
  row.rmse = r / n;
  row.fde = f / n;
  row.count = samples.size();
  return row;
}

MetricRow evaluate_idm_baseline(std::span<const TrainingSample> samples,
                                const IdmParams &params) {
  validate(params);
  MetricRow row;
  row.tag = "idm";
  row.mu = 0.0;
  struct Score {
    double rmse = 0.0, fde = 0.0;
    bool ok = false;
  };
  std::vector<Score> scores(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const SequenceWindow &w = samples[i].observed;
    try {
      const Trajectory f = closed_loop_rollout(
        w.pair.leader, w.pair.follower.positions.front(),
        w.follower_initial_velocity, params,
        IntegrationConfig{w.pair.dt(), 0.0});
      const auto &truth = samples[i].truth.pair.follower.positions;
      scores[i] = {rmse(f.positions, truth), fde(f.positions, truth), true};
    } catch (const DomainError &) {
    }
  });
  double r = 0.0, fd = 0.0;
  for (const Score &s : scores) {
    if (!s.ok) {
      ++row.excluded;
      continue;
    }
    r += s.rmse;
    fd += s.fde;
    ++row.count;
  }
  if (row.count > 0) {
    row.rmse = r / static_cast<double>(row.count);
    row.fde = fd / static_cast<double>(row.count);
  }
  return row;
}

std::vector<TrainingSample>
noisy_samples(std::span<const SequenceWindow> clean,
              const ArmaNoiseParams &noise, const NoiseChannelSpec &channels,
              std::uint64_t seed) {
  std::vector<TrainingSample> out(clean.size());
  parallel_for(clean.size(), [&](std::size_t i) {
    out[i].truth = clean[i];
    out[i].observed = channels.any()
                        ? apply_noise(clean[i], noise, channels,
                                      derive_seed(seed, i))
                        : clean[i];
  });
  return out;
}

std::uint64_t label_seed(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::span<const SequenceWindow> head(const std::vector<SequenceWindow> &v,
                                     std::size_t cap) {
  std::span<const SequenceWindow> all(v);
  return (cap == 0 || cap >= v.size()) ? all : all.first(cap);
}

} // namespace

SampleSplit make_sample_split(const DatasetSplit &clean,
                              const std::string &level,
                              const NoiseChannelSpec &channels,
                              std::uint64_t data_seed, std::size_t max_train,
                              std::size_t max_validation) {
  const auto tr = head(clean.train, max_train);
  const auto va = head(clean.validation, max_validation);
  SampleSplit out;
  if (level == "none") {
    out.train = clean_samples(tr);
    out.validation = clean_samples(va);
    out.test = clean_samples(clean.test);
    return out;
  }
  const ArmaNoiseParams noise = noise_preset(level);
  const std::uint64_t base = derive_seed(data_seed, label_seed(level));
  out.train = noisy_samples(tr, noise, channels, derive_seed(base, 0));
  out.validation = noisy_samples(va, noise, channels, derive_seed(base, 1));
  out.test = noisy_samples(clean.test, noise, channels, derive_seed(base, 2));
  return out;
}

void validate(const SweepSpec &spec) {
  if (spec.mu_values.empty())
    throw ConfigError("sweep: mu list is empty");
  if (spec.noise_levels.empty())
    throw ConfigError("sweep: noise level list is empty");
  if (spec.idm_presets.empty())
    throw ConfigError("sweep: IDM preset list is empty");
  for (double mu : spec.mu_values)
    if (!(mu >= 0.0 && mu <= 1.0))
      throw ConfigError("sweep: mu " + fmt("%g", mu) + " outside [0, 1]");
  for (const auto &l : spec.noise_levels)
    (void)noise_preset(l);
  for (const auto &p : spec.idm_presets)
    (void)idm_preset(p);
}


MetricReport sweep(const SweepSpec &spec, const DatasetSplit &clean,
                   const SweepSetup &setup,
                   const std::function<void(const SweepCell &)> &on_cell) {
  validate(spec);
  validate(setup.net);

  std::vector<double> hybrid_mus;
  for (double mu : spec.mu_values)
    if (mu > 0.0 && mu < 1.0 &&
        std::find(hybrid_mus.begin(), hybrid_mus.end(), mu) ==
          hybrid_mus.end())
      hybrid_mus.push_back(mu);

  const FollowerNet init = init_params(setup.net, setup.net_seed);
  MetricReport report;

  for (const auto &level : spec.noise_levels) {
    const SampleSplit samples =
      make_sample_split(clean, level, spec.channels, spec.data_seed,
                        setup.max_train_windows, setup.max_validation_windows);
    const auto &train_s = samples.train;
    const auto &val_s = samples.validation;
    const auto &test_s = samples.test;

    const auto run_cell = [&](double mu, const std::string &preset,
                              const std::string &tag) {
      MetricRow row;
      row.tag = tag;
      row.mu = mu;
      row.noise_level = level;
      row.idm_preset = preset;
      TrainResult result;
      bool trained = false;
      try {
        if (tag == "idm") {
          const MetricRow r = evaluate_idm_baseline(test_s, idm_preset(preset));
          row.rmse = r.rmse;
          row.fde = r.fde;
          row.count = r.count;
          row.excluded = r.excluded;
        } else {
          TrainConfig tc = setup.train;
          tc.mu = mu;
          const IdmParams params =
            preset.empty() ? idm_preset("sumo") : idm_preset(preset);
          result = train(init, train_s, val_s, params, tc);
          trained = true;
          const MetricRow r = evaluate_model(result.net, test_s);
          row.rmse = r.rmse;
          row.fde = r.fde;
          row.count = r.count;
          row.excluded = result.model_target_excluded;
        }
      } catch (const std::exception &e) {
        row.failed = true;
        row.error = e.what();
        trained = false;
      }
      report.rows.push_back(row);
      if (on_cell)
        on_cell({report.rows.back(), trained ? &result.record : nullptr,
                 trained ? &result.net : nullptr});
    };

    run_cell(1.0, "", "learning");
    for (const auto &preset : spec.idm_presets) {
      for (double mu : hybrid_mus)
        run_cell(mu, preset, "hybrid");
      run_cell(0.0, preset, "idm");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string report_csv(const MetricReport &report) {
  std::ostringstream out;
  out << "tag,mu,noise_level,idm_preset,rmse,fde,count,excluded,failed,error\n";
  for (const auto &r : report.rows)
    out << r.tag << ',' << num(r.mu) << ',' << r.noise_level << ','
        << r.idm_preset << ',' << num(r.rmse) << ','
        << num(r.fde) << ',' << r.count << ',' << r.excluded << ','
        << (r.failed ? 1 : 0) << ',' << csv_field(r.error) << '\n';
  return out.str();
}

std::string report_json(const MetricReport &report) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto &r : report.rows) {
    nlohmann::ordered_json j;
    j["tag"] = r.tag;
    j["mu"] = r.mu;
    j["noise_level"] = r.noise_level;
    j["idm_preset"] = r.idm_preset;
    j["rmse"] = r.rmse;
    j["fde"] = r.fde;
    j["count"] = r.count;
    j["excluded"] = r.excluded;
    j["failed"] = r.failed;
    j["error"] = r.error;
    rows.push_back(std::move(j));
  }
  nlohmann::ordered_json doc;
  doc["rows"] = std::move(rows);
  return doc.dump(2) + "\n";
}

std::string report_table_csv(const MetricReport &report) {
  std::vector<std::string> levels;
  std::vector<std::string> keys;
  std::map<std::string, std::map<std::string, std::string>> cells;
  for (const auto &r : report.rows) {
    if (std::find(levels.begin(), levels.end(), r.noise_level) == levels.end())
      levels.push_back(r.noise_level);
    const std::string key =
      r.tag + ',' + fmt("%g", r.mu) + ',' + r.idm_preset;
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      keys.push_back(key);
    cells[key][r.noise_level] = r.failed ? "failed" : fmt("%.4f", r.rmse);
  }
  std::ostringstream out;
  out << "tag,mu,idm_preset";
  for (const auto &l : levels)
    out << ",rmse_" << l;
  out << '\n';
  for (const auto &k : keys) {
    out << k;
    for (const auto &l : levels) {
      const auto it = cells[k].find(l);
      out << ',' << (it == cells[k].end() ? "" : it->second);
    }
    out << '\n';
  }
  return out.str();
}

void emit_report(const MetricReport &report,
                 const std::filesystem::path &dir) {
  write_text_file(dir / "report.csv", report_csv(report));
  write_text_file(dir / "report.json", report_json(report));
  write_text_file(dir / "table.csv", report_table_csv(report));
}

} // namespace idmf

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   run_config.cpp
 * @brief  RunConfig JSON schema and precedence chain.
 */
#include "run_config.hpp"

#include <idmf/error.hpp>
#include <idmf/trajectory_io.hpp>

#include <json.hpp>

#include <sstream>

namespace idmf::cli {

using Json = nlohmann::ordered_json;

namespace {

Json to_tree(const RunConfig &c) {
  Json j;
  j["seed"] = c.seed;
  j["data"] = {{"n_scenarios", c.n_scenarios},
               {"duration", c.mix.duration},
               {"mix",
                {{"constant", c.mix.constant},
                 {"sinusoidal", c.mix.sinusoidal},
                 {"signal_stop_go", c.mix.signal_stop_go}}},
               {"horizon", c.horizon},
               {"stride", c.stride},
               {"gap_threshold", c.gap_threshold},
               {"split",
                {{"train", c.split.train},
                 {"validation", c.split.validation},
                 {"test", c.split.test}}}};
  j["noise"] = {{"level", c.noise_level},
                {"leader_positions", c.channels.leader_positions},
                {"follower_positions", c.channels.follower_positions}};
  j["idm_preset"] = c.idm_preset;
  j["net"] = {{"hidden", c.net.hidden},
              {"layers", c.net.layers},
              {"position_scale", c.net.position_scale},
              {"velocity_scale", c.net.velocity_scale}};
  j["train"] = {{"mu", c.train.mu},
                {"learning_rate", c.train.learning_rate},
                {"weight_decay", c.train.weight_decay},
                {"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},
                {"grad_clip_norm", c.train.grad_clip_norm},
                {"model_target", to_string(c.train.model_target)},
                {"chunk_size", c.train.chunk_size},
                {"max_train_windows", c.max_train_windows},
                {"max_validation_windows", c.max_validation_windows}};
  j["sweep"] = {{"mu", c.sweep.mu_values},
                {"levels", c.sweep.noise_levels},
                {"idm_presets", c.sweep.idm_presets}};
  j["calibrate"] = {{"max_pairs", c.calibrate_max_pairs},
                    {"max_sweeps", c.calibrate_budget.max_sweeps},
                    {"max_evaluations", c.calibrate_budget.max_evaluations}};
  j["plot"] = {{"window", c.plot_window},
               {"learning_checkpoint", c.plot_learning_checkpoint},
               {"hybrid_checkpoint", c.plot_hybrid_checkpoint},
               {"record", c.plot_record}};
  j["paths"] = {{"data", c.data_dir},
                {"checkpoint", c.checkpoint},
                {"out", c.out_dir}};
  return j;
}

/// Rejects keys absent from `schema`; recurses into objects.
void check_keys(const Json &doc, const Json &schema, const std::string &path) {
  if (!doc.is_object())
    throw ConfigError("config " + (path.empty() ? "root" : "key '" + path + "'") +
                      " must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!schema.contains(it.key()))
      throw ConfigError("unknown config key '" + key + "'");
    if (schema[it.key()].is_object())
      check_keys(it.value(), schema[it.key()], key);
  }
}

void overlay(Json &dst, const Json &src) {
  for (auto it = src.begin(); it != src.end(); ++it) {
    if (it.value().is_object() && dst[it.key()].is_object())
      overlay(dst[it.key()], it.value());
    else
      dst[it.key()] = it.value();
  }
}

template <typename T>
T get(const Json &tree, const std::string &dotted) {
  const Json *node = &tree;
  std::istringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.'))
    node = &node->at(part);
  try {
    if constexpr (std::is_same_v<T, std::size_t> ||
                  std::is_same_v<T, std::uint64_t>) {
      if (!node->is_number_unsigned())
        throw ConfigError("config key '" + dotted +
                          "' must be a non-negative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!node->is_number())
        throw ConfigError("config key '" + dotted + "' must be a number");
    }
    return node->get<T>();
  } catch (const nlohmann::json::exception &) {
    throw ConfigError("config key '" + dotted + "' has the wrong type");
  }
}

RunConfig from_tree(const Json &j) {
  RunConfig c;
  c.seed = get<std::uint64_t>(j, "seed");
  c.n_scenarios = get<std::size_t>(j, "data.n_scenarios");
  c.mix.duration = get<double>(j, "data.duration");
  c.mix.constant = get<double>(j, "data.mix.constant");
  c.mix.sinusoidal = get<double>(j, "data.mix.sinusoidal");
  c.mix.signal_stop_go = get<double>(j, "data.mix.signal_stop_go");
  c.horizon = get<std::size_t>(j, "data.horizon");
  c.stride = get<std::size_t>(j, "data.stride");
  c.gap_threshold = get<double>(j, "data.gap_threshold");
  c.split.train = get<double>(j, "data.split.train");
  c.split.validation = get<double>(j, "data.split.validation");
  c.split.test = get<double>(j, "data.split.test");
  c.noise_level = get<std::string>(j, "noise.level");
  c.channels.leader_positions = get<bool>(j, "noise.leader_positions");
  c.channels.follower_positions = get<bool>(j, "noise.follower_positions");
  c.idm_preset = get<std::string>(j, "idm_preset");
  c.net.hidden = get<std::size_t>(j, "net.hidden");
  c.net.layers = get<std::size_t>(j, "net.layers");
  c.net.position_scale = get<double>(j, "net.position_scale");
  c.net.velocity_scale = get<double>(j, "net.velocity_scale");
  c.train.mu = get<double>(j, "train.mu");
  c.train.learning_rate = get<double>(j, "train.learning_rate");
  c.train.weight_decay = get<double>(j, "train.weight_decay");
  c.train.batch_size = get<std::size_t>(j, "train.batch_size");
  c.train.max_epochs = get<std::size_t>(j, "train.max_epochs");
  c.train.grad_clip_norm = get<double>(j, "train.grad_clip_norm");
  c.train.model_target =
    model_target_mode_from_string(get<std::string>(j, "train.model_target"));
  c.train.chunk_size = get<std::size_t>(j, "train.chunk_size");
  c.max_train_windows = get<std::size_t>(j, "train.max_train_windows");
  c.max_validation_windows =
    get<std::size_t>(j, "train.max_validation_windows");
  c.sweep.mu_values = get<std::vector<double>>(j, "sweep.mu");
  c.sweep.noise_levels = get<std::vector<std::string>>(j, "sweep.levels");
  c.sweep.idm_presets = get<std::vector<std::string>>(j, "sweep.idm_presets");
  c.calibrate_max_pairs = get<std::size_t>(j, "calibrate.max_pairs");
  c.calibrate_budget.max_sweeps = get<std::size_t>(j, "calibrate.max_sweeps");
  c.calibrate_budget.max_evaluations =
    get<std::size_t>(j, "calibrate.max_evaluations");
  c.plot_window = get<std::size_t>(j, "plot.window");
  c.plot_learning_checkpoint = get<std::string>(j, "plot.learning_checkpoint");
  c.plot_hybrid_checkpoint = get<std::string>(j, "plot.hybrid_checkpoint");
  c.plot_record = get<std::string>(j, "plot.record");
  c.data_dir = get<std::string>(j, "paths.data");
  c.checkpoint = get<std::string>(j, "paths.checkpoint");
  c.out_dir = get<std::string>(j, "paths.out");
  return c;
}

} // namespace

std::string default_out_dir(const std::string &command) {
  if (command == "simulate" || command == "noise")
    return "data";
  return "runs/" + command;
}

std::string to_json(const RunConfig &config) {
  return to_tree(config).dump(2) + "\n";
}

RunConfig merge_json(const RunConfig &base, const std::string &text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Json tree = to_tree(base);
  check_keys(doc, tree, "");
  overlay(tree, doc);
  return from_tree(tree);
}

void apply_desk_preset(RunConfig &config) {
  config.net.hidden = 32;
  config.max_train_windows = 200;
  config.max_validation_windows = 200;
  config.train.max_epochs = 30;
}

std::vector<double> parse_double_list(const std::string &text) {
  std::vector<double> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != item.size())
      throw ConfigError("'" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty())
    throw ConfigError("empty number list");
  return out;
}

std::vector<std::string> parse_name_list(const std::string &text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty())
      out.push_back(item);
  if (out.empty())
    throw ConfigError("empty name list");
  return out;
}

void apply_flags(RunConfig &c, const FlagOverrides &f,
                 const std::string &command) {
  if (f.seed)
    c.seed = *f.seed;
  if (f.out)
    c.out_dir = *f.out;
  if (f.mu) {
    if (command == "sweep")
      c.sweep.mu_values = parse_double_list(*f.mu);
    else {
      const auto v = parse_double_list(*f.mu);
      if (v.size() != 1)
        throw ConfigError("--mu takes a single value for '" + command + "'");
      c.train.mu = v.front();
    }
  }
  if (f.level) {
    if (command == "sweep")
      c.sweep.noise_levels = parse_name_list(*f.level);
    else
      c.noise_level = *f.level;
  }
  if (f.idm_preset) {
    if (command == "sweep")
      c.sweep.idm_presets = parse_name_list(*f.idm_preset);
    else
      c.idm_preset = *f.idm_preset;
  }
  if (f.epochs)
    c.train.max_epochs = *f.epochs;
  if (f.hidden)
    c.net.hidden = *f.hidden;
  if (f.n)
    c.n_scenarios = *f.n;
  if (f.data)
    c.data_dir = *f.data;
  if (f.checkpoint)
    c.checkpoint = *f.checkpoint;
}

void validate(const RunConfig &c) {
  if (c.n_scenarios == 0)
    throw ConfigError("data.n_scenarios must be positive");
  if (c.horizon < 2)
    throw ConfigError("data.horizon must be at least 2");
  if (c.stride == 0)
    throw ConfigError("data.stride must be positive");
  if (!(c.gap_threshold > 0.0))
    throw ConfigError("data.gap_threshold must be positive");
  if (c.noise_level != "none")
    (void)noise_preset(c.noise_level);
  (void)idm_preset(c.idm_preset);
  NetConfig net = c.net;
  net.horizon = c.horizon;
  validate(net);
  validate(c.train);
  validate(c.sweep);
  if (c.out_dir.empty())
    throw ConfigError("paths.out must not be empty");
}

RunConfig resolve(const std::string &command,
                  const std::optional<std::string> &config_path,
                  const FlagOverrides &flags) {
  RunConfig c;
  c.out_dir = default_out_dir(command);
  if (config_path)
    c = merge_json(c, read_text_file(*config_path));
  if (flags.desk)
    apply_desk_preset(c);
  apply_flags(c, flags, command);
  c.net.horizon = c.horizon;
  validate(c);
  return c;
}

} // namespace idmf::cli

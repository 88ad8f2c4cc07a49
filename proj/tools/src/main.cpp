// SPDX-License-Identifier: Apache-2.0
/**
 * @file   main.cpp
 * @brief  idmf command-line entry point.
 */
#include "commands.hpp"

#include <idmf/error.hpp>

#include <CLI11.hpp>

#include <cstdio>

int main(int argc, char **argv) {
  using namespace idmf::cli;
  CLI::App app{"IDM-follower: hybrid physics/learning car-following "
               "trajectory prediction"};
  app.require_subcommand(1);

  struct Options {
    std::string config;
    FlagOverrides flags;
  };
  std::vector<std::pair<CLI::App *, Options>> subs;
  subs.reserve(command_names().size());

  const std::vector<std::pair<std::string, std::string>> help{
    {"simulate", "simulate IDM follower pairs into a dataset directory"},
    {"noise", "write a noisy copy of every window at one noise level"},
    {"train", "train the network and write a checkpoint"},
    {"eval", "score a checkpoint and the IDM baseline on the test split"},
    {"sweep", "train and score every (mu, level, preset) cell"},
    {"calibrate", "fit IDM parameters to the dataset by final-error search"},
    {"plot", "render loss curves and trajectory overlays as SVG"}};

  for (const auto &[name, text] : help) {
    CLI::App *sub = app.add_subcommand(name, text);
    subs.emplace_back(sub, Options{});
  }
  for (auto &[sub, o] : subs) {
    FlagOverrides &f = o.flags;
    sub->add_option("--config", o.config, "JSON RunConfig file");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--mu", f.mu, "data-loss weight (a list for sweep)");
    sub->add_option("--level,--levels", f.level,
                    "noise level (a list for sweep)");
    sub->add_option("--idm-preset,--idm-presets", f.idm_preset,
                    "IDM parameter preset (a list for sweep)");
    sub->add_option("--epochs", f.epochs, "training epochs");
    sub->add_option("--hidden", f.hidden, "LSTM hidden size");
    sub->add_option("--n", f.n, "number of simulated scenarios");
    sub->add_option("--data", f.data, "dataset directory");
    sub->add_option("--checkpoint", f.checkpoint, "model checkpoint");
    sub->add_flag("--desk", f.desk,
                  "desk preset: h=32, 200 windows, 30 epochs");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    idmf::ConfigError err(e.what());
    std::fprintf(stderr, "%s\n", error_line(err).c_str());
    return 2;
  }

  for (auto &[sub, o] : subs) {
    if (!sub->parsed())
      continue;
    const std::string name = sub->get_name();
    try {
      const RunConfig config = resolve(
        name, o.config.empty() ? std::nullopt : std::optional(o.config),
        o.flags);
      run_command(name, config);
      return 0;
    } catch (const std::exception &e) {
      std::fprintf(stderr, "%s\n", error_line(e).c_str());
      return exit_code(e);
    }
  }
  return 1;
}

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   commands.hpp
 * @brief  idmf subcommands. Each reads a resolved RunConfig, writes its
 *         outputs plus run_config.json under config.out_dir.
 */
#pragma once

#include "run_config.hpp"

#include <string>
#include <vector>

namespace idmf::cli {

void run_simulate(const RunConfig &config);
void run_noise(const RunConfig &config);
void run_train(const RunConfig &config);
void run_eval(const RunConfig &config);
void run_sweep(const RunConfig &config);
void run_calibrate(const RunConfig &config);
void run_plot(const RunConfig &config);

const std::vector<std::string> &command_names();
void run_command(const std::string &name, const RunConfig &config);

/// One-line JSON error record for stderr.
std::string error_line(const std::exception &e);
/// Process exit code for an exception.
int exit_code(const std::exception &e);

/// Parses the CSV written by train_record_csv.
TrainRecord train_record_from_csv(const std::string &text);

} // namespace idmf::cli

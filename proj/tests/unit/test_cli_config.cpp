// SPDX-License-Identifier: Apache-2.0
/**
 * @file   test_cli_config.cpp
 * @brief  Run configuration merging, precedence and error mapping.
 */
#include "commands.hpp"
#include "run_config.hpp"

#include <idmf/error.hpp>

#include <doctest.h>

using namespace idmf;
using namespace idmf::cli;

TEST_SUITE("cli") {

TEST_CASE("defaults carry the training hyperparameters") {
  RunConfig c;
  c.out_dir = default_out_dir("train");
  CHECK(c.out_dir == "runs/train");
  CHECK(c.train.learning_rate == 1e-3);
  CHECK(c.train.weight_decay == 1e-5);
  CHECK(c.train.batch_size == 64);
  CHECK(c.net.hidden == 128);
  CHECK(c.horizon == 80);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("JSON round trip is lossless") {
  RunConfig c;
  c.seed = 123;
  c.train.mu = 0.3;
  c.sweep.noise_levels = {"big"};
  c.noise_level = "small";
  const RunConfig back = merge_json(RunConfig{}, to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.train.mu == 0.3);
}

TEST_CASE("unknown keys fail fast and name the key") {
  try {
    merge_json(RunConfig{}, R"({"train": {"mu": 0.5, "lr": 0.1}})");
    FAIL("expected a config error");
  } catch (const ConfigError &e) {
    CHECK(std::string(e.what()).find("train.lr") != std::string::npos);
  }
  CHECK_THROWS_AS(merge_json(RunConfig{}, "{not json"), ConfigError);
}

TEST_CASE("flags override file values; desk preset sits between") {
  RunConfig c = merge_json(RunConfig{}, R"({"train": {"max_epochs": 5}, "net": {"hidden": 64}})");
  apply_desk_preset(c);
  CHECK(c.net.hidden == 32);
  CHECK(c.train.max_epochs == 30);
  CHECK(c.max_train_windows == 200);
  CHECK(c.max_validation_windows == 200);
  FlagOverrides f;
  f.epochs = 4;
  f.mu = "0.5";
  f.level = "big";
  apply_flags(c, f, "train");
  CHECK(c.train.max_epochs == 4);
  CHECK(c.train.mu == 0.5);
  CHECK(c.noise_level == "big");

  RunConfig s;
  FlagOverrides sf;
  sf.mu = "1.0,0.7,0.5,0.3,0.0";
  sf.level = "small,middle";
  apply_flags(s, sf, "sweep");
  CHECK(s.sweep.mu_values == std::vector<double>{1.0, 0.7, 0.5, 0.3, 0.0});
  CHECK(s.sweep.noise_levels == std::vector<std::string>{"small", "middle"});
}

TEST_CASE("validation") {
  RunConfig c;
  c.noise_level = "loud";
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.idm_preset = "nope";
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.train.mu = -0.1;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("list parsing") {
  CHECK(parse_double_list("0.1, 0.2,0.3") == std::vector<double>{0.1, 0.2, 0.3});
  CHECK_THROWS_AS(parse_double_list("0.1,x"), ConfigError);
  CHECK(parse_name_list("a,b") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("error mapping") {
  CHECK(exit_code(ConfigError("x")) == 2);
  CHECK(exit_code(InputError("x")) == 3);
  CHECK(exit_code(ParseError("x", 3)) == 3);
  CHECK(exit_code(CheckpointError("x")) == 3);
  const std::string line = error_line(ConfigError("bad \"key\""));
  CHECK(line.find("\"status\":\"error\"") != std::string::npos);
  CHECK(line.find('\n') == std::string::npos);
}

TEST_CASE("training record CSV round trip") {
  TrainRecord r;
  r.train_loss = {3.25, 1.0 / 3.0};
  r.validation_loss = {4.0, 2.0};
  r.best_epoch = 1;
  const TrainRecord back = train_record_from_csv(train_record_csv(r));
  CHECK(back.train_loss == r.train_loss);
  CHECK(back.validation_loss == r.validation_loss);
}

} // TEST_SUITE

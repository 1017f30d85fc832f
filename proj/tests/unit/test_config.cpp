/* Copyright 2026 The LieGConv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "liegconv/config.hpp"

using namespace liegconv;

namespace {

std::string error_key(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults") {
  const ExperimentConfig c = parse_config("");
  CHECK(c.model.group == GroupTag::kSE2);
  CHECK(c.model.factorization == Factorization::kSeparable);
  CHECK(c.model.lift_channels == 32);
  CHECK(c.model.block1_channels == 32);
  CHECK(c.model.block2_channels == 64);
  CHECK(c.model.omega0 == 10.0);
  CHECK(c.data.dataset == "rotated");
}

TEST_CASE("key value parsing with comments") {
  const ExperimentConfig c = parse_config(
      "# model\n"
      "group = sim2\n"
      "factorization = hseparable   # trailing comment\n"
      "n_rotations = 8\n"
      "n_scales=3\n"
      "siren_hidden = 32, 16\n"
      "sampling = random\n"
      "\n"
      "padding = circular\n"
      "lr = 3e-3\n"
      "lr_schedule = cosine\n"
      "seed = 7\n");
  CHECK(c.model.group == GroupTag::kSim2);
  CHECK(c.model.factorization == Factorization::kHSeparable);
  CHECK(c.model.n_rotations == 8);
  CHECK(c.model.n_scales == 3);
  CHECK(c.model.siren_hidden == std::vector<std::size_t>{32, 16});
  CHECK(c.model.sampling == SamplingMode::kRandom);
  CHECK(c.model.padding == Padding::kCircular);
  CHECK(c.train.lr == 3e-3);
  CHECK(c.train.cosine_schedule);
  CHECK(c.model.seed == 7);
  CHECK(c.train.seed == 7);
}

TEST_CASE("errors name the offending key") {
  CHECK(error_key([] { parse_config("no_such_key = 1"); }) == "no_such_key");
  CHECK(error_key([] { parse_config("n_rotations = four"); }) == "n_rotations");
  CHECK(error_key([] { parse_config("n_rotations = -2"); }) == "n_rotations");
  CHECK(error_key([] { parse_config("omega0 = fast"); }) == "omega0");
  CHECK(error_key([] { parse_config("group = so3"); }) == "group");
  CHECK(error_key([] { parse_config("padding = reflect"); }) == "padding");
  CHECK(error_key([] { parse_config("batch_size = 0"); }) == "batch_size");
  CHECK(error_key([] { parse_config("k = 4"); }) == "k");
  CHECK(error_key([] { parse_config("dataset = cifar"); }) == "dataset");
  CHECK(error_key([] { load_config("", {"factorization=hseparable"}); }) == "factorization");
  CHECK(error_key([] { load_config("", {"n_rotations"}); }) == "n_rotations");
  CHECK(error_key([] { load_config("/nonexistent.cfg", {}); }) == "config");
}

TEST_CASE("overrides apply after the file") {
  const auto path = std::filesystem::temp_directory_path() / "lg_test.cfg";
  std::ofstream(path) << "n_rotations = 8\nepochs = 3\n";
  const ExperimentConfig c = load_config(path.string(), {"n_rotations=16", "out_dir = runs/x"});
  CHECK(c.model.n_rotations == 16);
  CHECK(c.train.epochs == 3);
  CHECK(c.out_dir == "runs/x");
}

TEST_CASE("resolved settings round trip") {
  ExperimentConfig c = parse_config("group = sim2\nn_scales = 2\nomega0 = 12.5\nsampling = random\n");
  std::string text;
  for (const auto& [k, v] : to_settings(c)) text += k + " = " + v + "\n";
  const ExperimentConfig back = parse_config(text);
  CHECK(to_settings(back) == to_settings(c));
  const std::string header = settings_header(c);
  CHECK(header.rfind("# ", 0) == 0);
  CHECK(header.find("# omega0 = 12.5\n") != std::string::npos);
}

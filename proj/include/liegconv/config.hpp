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

// Flat key=value experiment configuration. Lines are `key = value`; `#`
// starts a comment. Unknown keys and unparsable values raise ConfigError.

#ifndef LIEGCONV_CONFIG_HPP_
#define LIEGCONV_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "liegconv/model.hpp"

#ifndef LIEGCONV_DEFAULT_DATA_DIR
#define LIEGCONV_DEFAULT_DATA_DIR "data"
#endif

namespace liegconv {

using Settings = std::vector<std::pair<std::string, std::string>>;

struct DataConfig {
  // rotated | scaled | rot_scaled | upright | bars
  std::string dataset = "rotated";
  std::string data_dir = LIEGCONV_DEFAULT_DATA_DIR;
  std::size_t n_train = 2000;
  std::size_t n_test = 2000;
  std::uint64_t data_seed = 0;
};

struct AnalysisConfig {
  std::string checkpoint;          // model to load for eval / equivariance / redundancy
  std::string sweep = "rotation";  // rotation | scale
  std::size_t n_steps = 100;
  std::vector<Factorization> bench_factorizations = {Factorization::kNonseparable,
                                                     Factorization::kSeparable};
  std::vector<std::size_t> n_h = {4, 8, 16};
  std::size_t k = 5;
  std::size_t bench_channels = 1;
  std::size_t bench_batch = 8;
  std::size_t bench_size = 28;
  std::size_t bench_repeats = 5;
};

struct ExperimentConfig {
  GCNNConfig model;
  TrainConfig train;
  DataConfig data;
  AnalysisConfig analysis;
  std::string out_dir = "out";
};

struct ExperimentData {
  Dataset train;
  Dataset test;
};
// Train and test sets for `cfg`. MNIST variants draw disjoint subsets of the
// bundled digits with data_seed and transform them with independent seeds;
// "bars" synthesizes both sets.
ExperimentData load_experiment_data(const DataConfig& cfg);

// Resolved settings in a fixed key order.
Settings model_settings(const GCNNConfig& cfg);
Settings to_settings(const ExperimentConfig& cfg);

// Returns false when `key` is not a model key.
bool apply_model_setting(GCNNConfig& cfg, const std::string& key, const std::string& value);
// Throws ConfigError for unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Parses `key = value` lines on top of the defaults.
ExperimentConfig parse_config(const std::string& text);
// Reads `path` (empty means defaults only), applies KEY=VALUE overrides in
// order, then validates the model section.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

// "# key = value" lines, one per resolved setting.
std::string settings_header(const ExperimentConfig& cfg);

}  // namespace liegconv

#endif  // LIEGCONV_CONFIG_HPP_

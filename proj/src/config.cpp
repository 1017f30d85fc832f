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

#include "liegconv/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace liegconv {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> to_uint_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(v)) out.push_back(to_uint(key, item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, Factorization>) {
      out += to_string(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename Parse>
auto parse_enum(const std::string& key, const std::string& v, Parse parse) {
  try {
    return parse(v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

Settings model_settings(const GCNNConfig& c) {
  return {
      {"group", std::string(to_string(c.group))},
      {"factorization", std::string(to_string(c.factorization))},
      {"n_rotations", std::to_string(c.n_rotations)},
      {"n_scales", std::to_string(c.n_scales)},
      {"scale_truncation", fmt_double(c.scale_truncation)},
      {"sampling", std::string(to_string(c.sampling))},
      {"allow_noncompact", c.allow_noncompact ? "true" : "false"},
      {"stencil", std::to_string(c.stencil)},
      {"in_channels", std::to_string(c.in_channels)},
      {"lift_channels", std::to_string(c.lift_channels)},
      {"block1_channels", std::to_string(c.block1_channels)},
      {"block2_channels", std::to_string(c.block2_channels)},
      {"siren_hidden", join(c.siren_hidden)},
      {"omega0", fmt_double(c.omega0)},
      {"omega0_spatial", fmt_double(c.omega0_spatial)},
      {"omega0_subgroup", fmt_double(c.omega0_subgroup)},
      {"activation", std::string(to_string(c.activation))},
      {"head_hidden", std::to_string(c.head_hidden)},
      {"n_classes", std::to_string(c.n_classes)},
      {"scale_support", std::to_string(c.scale_support)},
      {"padding", c.padding == Padding::kZero ? "zero" : "circular"},
      {"seed", std::to_string(c.seed)},
  };
}

Settings to_settings(const ExperimentConfig& c) {
  Settings s = model_settings(c.model);
  const Settings rest = {
      {"epochs", std::to_string(c.train.epochs)},
      {"batch_size", std::to_string(c.train.batch_size)},
      {"lr", fmt_double(c.train.lr)},
      {"weight_decay", fmt_double(c.train.weight_decay)},
      {"lr_schedule", c.train.cosine_schedule ? "cosine" : "constant"},
      {"eval_every", std::to_string(c.train.eval_every)},
      {"dataset", c.data.dataset},
      {"data_dir", c.data.data_dir},
      {"n_train", std::to_string(c.data.n_train)},
      {"n_test", std::to_string(c.data.n_test)},
      {"data_seed", std::to_string(c.data.data_seed)},
      {"checkpoint", c.analysis.checkpoint},
      {"sweep", c.analysis.sweep},
      {"n_steps", std::to_string(c.analysis.n_steps)},
      {"bench_factorizations", join(c.analysis.bench_factorizations)},
      {"n_h", join(c.analysis.n_h)},
      {"k", std::to_string(c.analysis.k)},
      {"bench_channels", std::to_string(c.analysis.bench_channels)},
      {"bench_batch", std::to_string(c.analysis.bench_batch)},
      {"bench_size", std::to_string(c.analysis.bench_size)},
      {"bench_repeats", std::to_string(c.analysis.bench_repeats)},
      {"out_dir", c.out_dir},
  };
  s.insert(s.end(), rest.begin(), rest.end());
  return s;
}

bool apply_model_setting(GCNNConfig& c, const std::string& key, const std::string& v) {
  if (key == "group") {
    c.group = parse_enum(key, v, [](const std::string& s) { return parse_group_tag(s); });
  } else if (key == "factorization") {
    c.factorization = parse_enum(key, v, [](const std::string& s) { return parse_factorization(s); });
  } else if (key == "n_rotations") {
    c.n_rotations = to_uint(key, v);
  } else if (key == "n_scales") {
    c.n_scales = to_uint(key, v);
  } else if (key == "scale_truncation") {
    c.scale_truncation = to_double(key, v);
  } else if (key == "sampling") {
    c.sampling = parse_enum(key, v, [](const std::string& s) { return parse_sampling(s); });
  } else if (key == "allow_noncompact") {
    c.allow_noncompact = to_bool(key, v);
  } else if (key == "stencil") {
    c.stencil = to_uint(key, v);
  } else if (key == "in_channels") {
    c.in_channels = to_uint(key, v);
  } else if (key == "lift_channels") {
    c.lift_channels = to_uint(key, v);
  } else if (key == "block1_channels") {
    c.block1_channels = to_uint(key, v);
  } else if (key == "block2_channels") {
    c.block2_channels = to_uint(key, v);
  } else if (key == "siren_hidden") {
    c.siren_hidden = to_uint_list(key, v);
  } else if (key == "omega0") {
    c.omega0 = to_double(key, v);
  } else if (key == "omega0_spatial") {
    c.omega0_spatial = to_double(key, v);
  } else if (key == "omega0_subgroup") {
    c.omega0_subgroup = to_double(key, v);
  } else if (key == "activation") {
    c.activation = parse_enum(key, v, [](const std::string& s) { return parse_activation(s); });
  } else if (key == "head_hidden") {
    c.head_hidden = to_uint(key, v);
  } else if (key == "n_classes") {
    c.n_classes = to_uint(key, v);
  } else if (key == "scale_support") {
    c.scale_support = to_uint(key, v);
  } else if (key == "padding") {
    if (v == "zero") {
      c.padding = Padding::kZero;
    } else if (v == "circular") {
      c.padding = Padding::kCircular;
    } else {
      throw ConfigError(key, "expected zero or circular, got '" + v + "'");
    }
  } else if (key == "seed") {
    c.seed = to_uint(key, v);
  } else {
    return false;
  }
  return true;
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& v) {
  if (apply_model_setting(c.model, key, v)) {
    if (key == "seed") c.train.seed = c.model.seed;
    return;
  }
  if (key == "epochs") {
    c.train.epochs = to_uint(key, v);
  } else if (key == "batch_size") {
    c.train.batch_size = to_uint(key, v);
    if (c.train.batch_size == 0) throw ConfigError(key, "must be > 0");
  } else if (key == "lr") {
    c.train.lr = to_double(key, v);
  } else if (key == "weight_decay") {
    c.train.weight_decay = to_double(key, v);
  } else if (key == "lr_schedule") {
    if (v != "constant" && v != "cosine") throw ConfigError(key, "expected constant or cosine");
    c.train.cosine_schedule = v == "cosine";
  } else if (key == "eval_every") {
    c.train.eval_every = to_uint(key, v);
  } else if (key == "dataset") {
    if (v != "rotated" && v != "scaled" && v != "rot_scaled" && v != "upright" && v != "bars") {
      throw ConfigError(key, "expected rotated, scaled, rot_scaled, upright or bars, got '" + v + "'");
    }
    c.data.dataset = v;
  } else if (key == "data_dir") {
    c.data.data_dir = v;
  } else if (key == "n_train") {
    c.data.n_train = to_uint(key, v);
  } else if (key == "n_test") {
    c.data.n_test = to_uint(key, v);
  } else if (key == "data_seed") {
    c.data.data_seed = to_uint(key, v);
  } else if (key == "checkpoint") {
    c.analysis.checkpoint = v;
  } else if (key == "sweep") {
    if (v != "rotation" && v != "scale") throw ConfigError(key, "expected rotation or scale");
    c.analysis.sweep = v;
  } else if (key == "n_steps") {
    c.analysis.n_steps = to_uint(key, v);
    if (c.analysis.n_steps == 0) throw ConfigError(key, "must be > 0");
  } else if (key == "bench_factorizations") {
    c.analysis.bench_factorizations.clear();
    for (const auto& item : split_list(v)) {
      c.analysis.bench_factorizations.push_back(
          parse_enum(key, item, [](const std::string& s) { return parse_factorization(s); }));
    }
  } else if (key == "n_h") {
    c.analysis.n_h = to_uint_list(key, v);
    if (c.analysis.n_h.empty()) throw ConfigError(key, "needs at least one value");
  } else if (key == "k") {
    c.analysis.k = to_uint(key, v);
    if (c.analysis.k % 2 == 0) throw ConfigError(key, "stencil size must be odd");
  } else if (key == "bench_channels") {
    c.analysis.bench_channels = to_uint(key, v);
  } else if (key == "bench_batch") {
    c.analysis.bench_batch = to_uint(key, v);
  } else if (key == "bench_size") {
    c.analysis.bench_size = to_uint(key, v);
  } else if (key == "bench_repeats") {
    c.analysis.bench_repeats = to_uint(key, v);
  } else if (key == "out_dir") {
    c.out_dir = v;
  } else {
    throw ConfigError(key, "unknown key");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line, "line " + std::to_string(lineno) + " is not key = value");
    }
    apply_setting(cfg, trim(std::string_view(line).substr(0, eq)),
                  trim(std::string_view(line).substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config", "cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  ExperimentConfig cfg = parse_config(text);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "override is not KEY=VALUE");
    apply_setting(cfg, trim(std::string_view(kv).substr(0, eq)),
                  trim(std::string_view(kv).substr(eq + 1)));
  }
  cfg.model.validate();
  return cfg;
}

std::string settings_header(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_settings(cfg)) out += "# " + k + " = " + v + "\n";
  return out;
}

ExperimentData load_experiment_data(const DataConfig& cfg) {
  if (cfg.dataset == "bars") {
    return {synth_oriented_bars(cfg.n_train, cfg.data_seed),
            synth_oriented_bars(cfg.n_test, cfg.data_seed + 1)};
  }
  const Dataset all = load_mnist(cfg.data_dir + "/mnist10k-images-idx3-ubyte.gz",
                                 cfg.data_dir + "/mnist10k-labels-idx1-ubyte.gz");
  Splits s = split_sizes(all, cfg.n_train, 0, cfg.n_test, cfg.data_seed);
  const std::uint64_t tr = cfg.data_seed + 1, te = cfg.data_seed + 2;
  if (cfg.dataset == "rotated") return {make_rotated(s.train, tr), make_rotated(s.test, te)};
  if (cfg.dataset == "scaled") return {make_scaled(s.train, tr), make_scaled(s.test, te)};
  if (cfg.dataset == "rot_scaled") {
    return {make_rot_scaled(s.train, tr), make_rot_scaled(s.test, te)};
  }
  return {std::move(s.train), std::move(s.test)};
}

}  // namespace liegconv

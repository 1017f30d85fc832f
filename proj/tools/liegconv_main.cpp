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

// liegconv: train / eval / equivariance / redundancy / bench / selftest.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <random>

#include "CLI11.hpp"
#include "liegconv/analysis.hpp"
#include "liegconv/config.hpp"
#include "liegconv/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace liegconv;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string checkpoint;
};

ExperimentConfig resolve(const Options& opt) {
  std::vector<std::string> overrides = opt.overrides;
  if (opt.seed) overrides.push_back("seed=" + std::to_string(*opt.seed));
  if (!opt.out_dir.empty()) overrides.push_back("out_dir=" + opt.out_dir);
  if (!opt.checkpoint.empty()) overrides.push_back("checkpoint=" + opt.checkpoint);
  return load_config(opt.config_path, overrides);
}

// CSV file whose first lines echo the resolved configuration.
class CsvWriter {
 public:
  CsvWriter(const ExperimentConfig& cfg, const std::string& name, const std::string& columns)
      : path_(fs::path(cfg.out_dir) / name), out_(path_) {
    if (!out_) throw std::runtime_error("cannot write " + path_.string());
    out_ << settings_header(cfg) << columns << '\n';
    out_ << std::setprecision(10);
  }
  template <typename... Ts>
  void row(const Ts&... values) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << values), ...);
    out_ << '\n' << std::flush;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::ofstream out_;
};

std::string checkpoint_path(const ExperimentConfig& cfg) {
  return cfg.analysis.checkpoint.empty() ? (fs::path(cfg.out_dir) / "model.ckpt").string()
                                         : cfg.analysis.checkpoint;
}

// Loads the checkpoint and makes the model section of cfg describe it.
Model load_model(ExperimentConfig& cfg) {
  Model model = load_checkpoint(checkpoint_path(cfg));
  cfg.model = model.config();
  return model;
}

const std::vector<std::string> kLayerNames = {"block1.conv1", "block1.conv2", "block2.conv1",
                                              "block2.conv2"};

int run_train(ExperimentConfig cfg) {
  const ExperimentData data = load_experiment_data(cfg.data);
  Model model(cfg.model);
  CsvWriter metrics(cfg, "metrics.csv", "epoch,train_loss,train_accuracy,eval_accuracy");
  CsvWriter timing(cfg, "timing.csv", "epoch,seconds");
  std::cout << "training " << model.parameter_count() << " parameters on " << data.train.size()
            << " images\n";
  train(model, cfg.train, data.train, &data.test, [&](const EpochMetrics& m) {
    metrics.row(m.epoch, m.train_loss, m.train_accuracy, m.eval_accuracy);
    timing.row(m.epoch, m.seconds);
    std::cout << "epoch " << m.epoch << "  loss " << m.train_loss << "  train_acc "
              << m.train_accuracy << "  eval_acc " << m.eval_accuracy << "  (" << m.seconds
              << " s)" << std::endl;
  });
  const std::string ckpt = (fs::path(cfg.out_dir) / "model.ckpt").string();
  save_checkpoint(ckpt, model);
  std::cout << "wrote " << metrics.path().string() << " and " << ckpt << '\n';
  return 0;
}

int run_eval(ExperimentConfig cfg) {
  Model model = load_model(cfg);
  const ExperimentData data = load_experiment_data(cfg.data);
  const double acc = evaluate(model, data.test);
  CsvWriter out(cfg, "eval.csv", "dataset,n,accuracy");
  out.row(cfg.data.dataset, data.test.size(), acc);
  std::cout << "accuracy " << acc << " on " << data.test.size() << " " << cfg.data.dataset
            << " images\n";
  return 0;
}

int run_equivariance(ExperimentConfig cfg) {
  Model model = load_model(cfg);
  const ExperimentData data = load_experiment_data(cfg.data);
  CsvWriter sweep(cfg, "equivariance.csv", "param,value,test_error");
  for (const SweepPoint& p :
       equivariance_sweep(model, data.test, cfg.analysis.sweep, cfg.analysis.n_steps)) {
    sweep.row(cfg.analysis.sweep, p.param, p.test_error);
  }
  CsvWriter layers(cfg, "layerwise.csv", "angle,layer,error");
  const Tensor images = data.test.head(8).images;
  std::mt19937_64 rng(cfg.train.seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < 20; ++i) {
    const double theta = angle(rng);
    for (const LayerError& e : layerwise_equivariance(model, images, theta)) {
      layers.row(theta, e.layer, e.error);
    }
  }
  std::cout << "wrote " << sweep.path().string() << " and " << layers.path().string() << '\n';
  return 0;
}

int run_redundancy(ExperimentConfig cfg) {
  Model trained = load_model(cfg);
  const Model init(trained.config());
  const SubgroupGrid grid = trained.config().base_grid();
  const bool has_kh = trained.config().factorization != Factorization::kNonseparable &&
                      trained.config().factorization != Factorization::kDseparable;
  CsvWriter ratios(cfg, "redundancy.csv", "layer,kernel_id,ratio,phase");
  std::optional<CsvWriter> kh;
  if (has_kh) kh.emplace(cfg, "kh_variance.csv", "layer,kernel_id,variance,phase");
  for (const auto& [phase, model] :
       {std::pair<std::string, const Model*>{"init", &init}, {"trained", &trained}}) {
    const auto layers = model->group_conv_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const SampledKernel sk = layers[l]->sample(grid, &grid);
      const std::vector<double> r = layer_redundancy(sk);
      double mean = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) {
        ratios.row(kLayerNames[l], i, r[i], phase);
        mean += r[i] / static_cast<double>(r.size());
      }
      std::cout << phase << " " << kLayerNames[l] << "  mean first-PC ratio " << mean;
      if (kh) {
        const std::vector<double> v = layer_kh_variance(sk);
        double vm = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
          kh->row(kLayerNames[l], i, v[i], phase);
          vm += v[i] / static_cast<double>(v.size());
        }
        std::cout << "  mean k_H variance " << vm;
      }
      std::cout << '\n';
    }
  }
  return 0;
}

int run_bench(ExperimentConfig cfg) {
  const AnalysisConfig& a = cfg.analysis;
  std::vector<CostConfig> configs;
  for (Factorization f : a.bench_factorizations) {
    for (std::size_t n : a.n_h) {
      CostConfig c;
      c.factorization = f;
      c.batch = a.bench_batch;
      c.c_in = a.bench_channels;
      c.c_out = a.bench_channels;
      c.n_h = n;
      c.n_scales = f == Factorization::kHSeparable ? cfg.model.n_scales : 1;
      c.k = a.k;
      c.height = a.bench_size;
      c.width = a.bench_size;
      configs.push_back(c);
    }
  }
  const std::vector<CostReport> reports = benchmark(configs, a.bench_repeats);
  std::map<std::size_t, double> dense;
  for (const CostReport& r : reports) {
    if (r.config.factorization == Factorization::kNonseparable) {
      dense[r.config.n_h] = static_cast<double>(r.macs);
    }
  }
  CsvWriter out(cfg, "bench.csv", "factorization,n_h,k,channels,macs,macs_ratio,seconds");
  for (const CostReport& r : reports) {
    const auto it = dense.find(r.config.n_h);
    const double ratio =
        it == dense.end() ? std::nan("") : static_cast<double>(r.macs) / it->second;
    out.row(to_string(r.config.factorization), r.config.n_h, r.config.k, r.config.c_in, r.macs,
            ratio, r.seconds);
    std::cout << std::setw(13) << to_string(r.config.factorization) << "  |H|=" << std::setw(3)
              << r.config.n_h << "  macs " << std::setw(12) << r.macs << "  ratio " << ratio
              << "  " << r.seconds << " s\n";
  }
  return 0;
}

int run_selftest(const ExperimentConfig& cfg) {
  const std::uint64_t seed = cfg.train.seed;
  const std::vector<CheckResult> results = {
      check_group_axioms(200, seed),
      check_factorization_equivalence(10, seed),
      check_c4_equivariance(3, seed),
      check_gradients(seed),
  };
  std::size_t failed = 0;
  for (const CheckResult& r : results) {
    failed += !r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  worst " << r.worst << " (tol "
              << r.tolerance << ", " << r.seconds << " s)  " << r.detail << '\n';
  }
  std::cout << results.size() - failed << " passed, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("LIEGCONV_THREADS")) {
    try {
      set_num_threads(std::stoi(threads));
    } catch (const std::exception&) {
      std::cerr << "error: LIEGCONV_THREADS must be an integer, got '" << threads << "'\n";
      return 2;
    }
  }

  CLI::App app{"Separable group convolutions on affine Lie groups"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "key = value configuration file");
    sub->add_option("--set", opt.overrides, "KEY=VALUE override (repeatable)")->take_all();
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "seed for model, training and analysis");
  };
  std::map<std::string, std::function<int(ExperimentConfig)>> commands = {
      {"train", run_train},
      {"eval", run_eval},
      {"equivariance", run_equivariance},
      {"redundancy", run_redundancy},
      {"bench", run_bench},
      {"selftest", [](ExperimentConfig c) { return run_selftest(c); }},
  };
  const std::map<std::string, std::string> help = {
      {"train", "train a model; writes metrics.csv, timing.csv and model.ckpt"},
      {"eval", "accuracy of a checkpoint on the configured test set"},
      {"equivariance", "test error under transformed inputs and layerwise error"},
      {"redundancy", "kernel PCA redundancy and k_H variance, init vs trained"},
      {"bench", "MAC counts and timings per factorization and |H|"},
      {"selftest", "quick oracle and property suites"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, text] : help) {
    CLI::App* sub = app.add_subcommand(name, text);
    add_common(sub);
    if (name == "eval" || name == "equivariance" || name == "redundancy") {
      sub->add_option("--checkpoint", opt.checkpoint, "checkpoint (default OUT/model.ckpt)");
    }
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ExperimentConfig cfg = resolve(opt);
    for (const auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      if (name != "selftest" && name != "bench") fs::create_directories(cfg.out_dir);
      if (name == "bench") fs::create_directories(cfg.out_dir);
      return commands.at(name)(std::move(cfg));
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

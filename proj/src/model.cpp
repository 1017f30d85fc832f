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

#include "liegconv/model.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "liegconv/config.hpp"

namespace liegconv {

namespace {

std::vector<std::uint64_t> derive_seeds(std::uint64_t seed, std::size_t n) {
  std::seed_seq seq{seed, std::uint64_t{0x6c69656763}};
  std::vector<std::uint64_t> out(n);
  seq.generate(out.begin(), out.end());
  return out;
}

KernelSpec layer_spec(const GCNNConfig& cfg, std::size_t c_in, std::size_t c_out,
                      std::size_t stencil, bool lifting) {
  KernelSpec spec;
  spec.group = cfg.group;
  spec.factorization = cfg.factorization;
  spec.c_in = c_in;
  spec.c_out = c_out;
  spec.stencil = stencil;
  spec.lifting = lifting;
  spec.hidden = cfg.siren_hidden;
  spec.omega0 = cfg.omega0;
  spec.omega0_spatial = cfg.omega0_spatial;
  spec.omega0_subgroup = cfg.omega0_subgroup;
  spec.activation = cfg.activation;
  spec.scale_support = cfg.scale_support;
  return spec;
}

const GCNNConfig& checked(const GCNNConfig& cfg) {
  cfg.validate();
  return cfg;
}

void add_kernel(std::vector<std::pair<std::string, DiffTensor>>& out, const std::string& prefix,
                const GroupKernel& k) {
  for (auto& [name, p] : k.named_parameters()) out.emplace_back(prefix + "." + name, p);
}

void add_bn(std::vector<std::pair<std::string, DiffTensor>>& out, const std::string& prefix,
            const BatchNorm& bn) {
  out.emplace_back(prefix + ".gamma", bn.gamma);
  out.emplace_back(prefix + ".beta", bn.beta);
}

int argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t k = logits.dim(1);
  const double* p = logits.data() + row * k;
  return static_cast<int>(std::max_element(p, p + k) - p);
}

constexpr char kMagic[4] = {'L', 'G', 'C', 'K'};

}  // namespace

ConfigError::ConfigError(std::string key, const std::string& message)
    : std::invalid_argument("config key '" + key + "': " + message), key_(std::move(key)) {}

std::string_view to_string(SamplingMode m) {
  return m == SamplingMode::kDiscretize ? "discretize" : "random";
}

SamplingMode parse_sampling(std::string_view name) {
  if (name == "discretize") return SamplingMode::kDiscretize;
  if (name == "random") return SamplingMode::kRandom;
  throw std::invalid_argument("unknown sampling mode: " + std::string(name));
}

void GCNNConfig::validate() const {
  if (group != GroupTag::kSE2 && group != GroupTag::kR2xRplus && group != GroupTag::kSim2) {
    throw ConfigError("group", "expected SE2, R2xRplus or Sim2");
  }
  if (factorization == Factorization::kHSeparable && group != GroupTag::kSim2) {
    throw ConfigError("factorization", "hseparable needs group = Sim2");
  }
  if (n_rotations == 0) throw ConfigError("n_rotations", "must be >= 1");
  if (n_scales == 0) throw ConfigError("n_scales", "must be >= 1");
  if (group == GroupTag::kSE2 && n_scales != 1) throw ConfigError("n_scales", "SE2 has no scale axis");
  if (group == GroupTag::kR2xRplus && n_rotations != 1) {
    throw ConfigError("n_rotations", "R2xRplus has no rotation axis");
  }
  if (n_scales > 1 && !(scale_truncation > 1.0)) {
    throw ConfigError("scale_truncation", "must be > 1 when n_scales > 1");
  }
  if (sampling == SamplingMode::kRandom && group == GroupTag::kR2xRplus && !allow_noncompact) {
    throw ConfigError("sampling", "random sampling over R+ needs allow_noncompact = true");
  }
  if (stencil % 2 == 0) throw ConfigError("stencil", "must be odd");
  if (in_channels == 0) throw ConfigError("in_channels", "must be > 0");
  if (lift_channels == 0) throw ConfigError("lift_channels", "must be > 0");
  if (block1_channels == 0) throw ConfigError("block1_channels", "must be > 0");
  if (block2_channels == 0) throw ConfigError("block2_channels", "must be > 0");
  for (std::size_t w : siren_hidden) {
    if (w == 0) throw ConfigError("siren_hidden", "widths must be > 0");
  }
  if (!(omega0 > 0.0)) throw ConfigError("omega0", "must be > 0");
  if (!(omega0_spatial >= 0.0)) throw ConfigError("omega0_spatial", "must be >= 0");
  if (!(omega0_subgroup >= 0.0)) throw ConfigError("omega0_subgroup", "must be >= 0");
  if (head_hidden == 0) throw ConfigError("head_hidden", "must be > 0");
  if (n_classes < 2) throw ConfigError("n_classes", "must be >= 2");
}

SubgroupGrid GCNNConfig::base_grid() const {
  const std::optional<double> trunc =
      n_scales > 1 ? std::optional<double>(scale_truncation) : std::nullopt;
  switch (group) {
    case GroupTag::kSE2: return uniform_rotation_grid(n_rotations);
    case GroupTag::kR2xRplus: return uniform_scale_grid(n_scales, trunc);
    default: return uniform_grid(GroupTag::kRplusSO2, n_scales, n_rotations, trunc);
  }
}

BatchNorm::BatchNorm(std::size_t channels)
    : gamma(DiffTensor::parameter(Tensor({channels}, 1.0))),
      beta(DiffTensor::parameter(Tensor({channels}, 0.0))) {
  state.running_mean = Tensor({channels}, 0.0);
  state.running_var = Tensor({channels}, 1.0);
}

DiffTensor BatchNorm::forward(const DiffTensor& x, bool training) {
  return batch_norm(x, gamma, beta, state, training);
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor w({out, in}), b({out});
  for (auto& v : w.storage()) v = u(rng);
  for (auto& v : b.storage()) v = u(rng);
  weight = DiffTensor::parameter(std::move(w));
  bias = DiffTensor::parameter(std::move(b));
}

GFeatureMap group_shortcut(const GFeatureMap& f, const GroupKernel& kernel,
                           const SubgroupGrid& out_grid) {
  if (kernel.spec().stencil != 1) throw std::invalid_argument("group shortcut needs a 1x1 stencil");
  return group_conv(f, kernel, out_grid, Padding::kZero);
}

ResBlock::ResBlock(const GCNNConfig& cfg, std::size_t c_in, std::size_t c_out, std::uint64_t seed)
    : conv1(layer_spec(cfg, c_in, c_out, cfg.stencil, false), derive_seeds(seed, 3)[0]),
      conv2(layer_spec(cfg, c_out, c_out, cfg.stencil, false), derive_seeds(seed, 3)[1]),
      shortcut(layer_spec(cfg, c_in, c_out, 1, false), derive_seeds(seed, 3)[2]),
      bn1(c_out),
      bn2(c_out) {}

GFeatureMap ResBlock::forward(const GFeatureMap& x, const SubgroupGrid& mid,
                              const SubgroupGrid& out, Padding padding, bool training,
                              std::vector<GFeatureMap>* trace) {
  GFeatureMap h = group_conv(x, conv1, mid, padding);
  h.data = relu(bn1.forward(h.data, training));
  if (trace) trace->push_back(h);
  GFeatureMap o = group_conv(h, conv2, out, padding);
  const GFeatureMap skip = group_shortcut(x, shortcut, out);
  o.data = relu(add(bn2.forward(o.data, training), skip.data));
  return o;
}

Model::Model(GCNNConfig cfg)
    : cfg_(checked(cfg)),
      grid_(cfg_.base_grid()),
      lift_(layer_spec(cfg_, cfg_.in_channels, cfg_.lift_channels, cfg_.stencil, true),
            derive_seeds(cfg_.seed, 5)[0]),
      lift_bn_(cfg_.lift_channels),
      block1_(cfg_, cfg_.lift_channels, cfg_.block1_channels, derive_seeds(cfg_.seed, 5)[1]),
      block2_(cfg_, cfg_.block1_channels, cfg_.block2_channels, derive_seeds(cfg_.seed, 5)[2]),
      fc1_([&] {
        std::mt19937_64 rng(derive_seeds(cfg_.seed, 5)[3]);
        return Linear(cfg_.block2_channels, cfg_.head_hidden, rng);
      }()),
      fc_bn_(cfg_.head_hidden),
      fc2_([&] {
        std::mt19937_64 rng(derive_seeds(cfg_.seed, 5)[4]);
        return Linear(cfg_.head_hidden, cfg_.n_classes, rng);
      }()) {}

SubgroupGrid Model::draw_grid(bool training, std::mt19937_64* rng) const {
  if (!training || freeze_grids_ || cfg_.sampling == SamplingMode::kDiscretize) return grid_;
  if (!rng) throw std::invalid_argument("random sampling needs a generator");
  return random_perturb(grid_, *rng, PerturbOptions{cfg_.allow_noncompact});
}

DiffTensor Model::forward(const Tensor& images, bool training, std::mt19937_64* rng,
                          ForwardTrace* trace) {
  if (images.rank() != 4 || images.dim(1) != cfg_.in_channels) {
    throw std::invalid_argument("model expects images [B, " + std::to_string(cfg_.in_channels) +
                                ", Y, X], got " + shape_string(images.shape()));
  }
  std::vector<GFeatureMap> mids;
  auto record = [&](const std::string& name, const GFeatureMap& f) {
    if (!trace) return;
    trace->names.push_back(name);
    trace->maps.push_back(f);
  };
  const SubgroupGrid g0 = draw_grid(training, rng);
  GFeatureMap f = lift_conv(DiffTensor(images), lift_.sample(g0, nullptr), cfg_.padding);
  f.data = relu(lift_bn_.forward(f.data, training));
  record("lift", f);

  const SubgroupGrid g1 = draw_grid(training, rng), g2 = draw_grid(training, rng);
  f = block1_.forward(f, g1, g2, cfg_.padding, training, trace ? &mids : nullptr);
  if (trace) record("block1.conv1", mids.back());
  record("block1", f);
  f.data = max_pool2d(f.data, 2);

  const SubgroupGrid g3 = draw_grid(training, rng), g4 = draw_grid(training, rng);
  f = block2_.forward(f, g3, g4, cfg_.padding, training, trace ? &mids : nullptr);
  if (trace) record("block2.conv1", mids.back());
  record("block2", f);

  const DiffTensor pooled = invariant_project(f, ProjectionMode::kMax, true);
  const DiffTensor hidden = relu(fc_bn_.forward(fc1_.forward(pooled), training));
  return fc2_.forward(hidden);
}

std::vector<std::pair<std::string, DiffTensor>> Model::named_parameters() const {
  std::vector<std::pair<std::string, DiffTensor>> out;
  add_kernel(out, "lift", lift_);
  add_bn(out, "lift_bn", lift_bn_);
  for (const auto& [name, block] : {std::pair{"block1", &block1_}, std::pair{"block2", &block2_}}) {
    const std::string p(name);
    add_kernel(out, p + ".conv1", block->conv1);
    add_bn(out, p + ".bn1", block->bn1);
    add_kernel(out, p + ".conv2", block->conv2);
    add_bn(out, p + ".bn2", block->bn2);
    add_kernel(out, p + ".shortcut", block->shortcut);
  }
  out.emplace_back("fc1.weight", fc1_.weight);
  out.emplace_back("fc1.bias", fc1_.bias);
  add_bn(out, "fc_bn", fc_bn_);
  out.emplace_back("fc2.weight", fc2_.weight);
  out.emplace_back("fc2.bias", fc2_.bias);
  return out;
}

std::vector<DiffTensor> Model::parameters() const {
  std::vector<DiffTensor> out;
  for (auto& [name, p] : named_parameters()) out.push_back(p);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, p] : named_parameters()) n += p.value().size();
  return n;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_buffers() {
  std::vector<std::pair<std::string, Tensor*>> out;
  auto add = [&](const std::string& prefix, BatchNorm& bn) {
    out.emplace_back(prefix + ".running_mean", &bn.state.running_mean);
    out.emplace_back(prefix + ".running_var", &bn.state.running_var);
  };
  add("lift_bn", lift_bn_);
  add("block1.bn1", block1_.bn1);
  add("block1.bn2", block1_.bn2);
  add("block2.bn1", block2_.bn1);
  add("block2.bn2", block2_.bn2);
  add("fc_bn", fc_bn_);
  return out;
}

std::vector<BatchNorm*> Model::batch_norms() {
  return {&lift_bn_, &block1_.bn1, &block1_.bn2, &block2_.bn1, &block2_.bn2, &fc_bn_};
}

void Model::recalibrate_batch_norm(const Tensor& images, std::size_t batch_size) {
  const std::size_t total = images.dim(0);
  if (total == 0 || batch_size == 0) return;
  const std::size_t plane = images.size() / total;
  const std::vector<BatchNorm*> norms = batch_norms();
  std::vector<double> saved;
  for (BatchNorm* bn : norms) saved.push_back(bn->state.momentum);
  NoGradGuard guard;
  freeze_grids_ = true;
  try {
    std::size_t k = 0;
    for (std::size_t start = 0; start + 1 < total; start += batch_size, ++k) {
      const std::size_t n = std::min(batch_size, total - start);
      if (n < 2) break;
      Shape shape = images.shape();
      shape[0] = n;
      Tensor batch(shape);
      std::copy_n(images.data() + start * plane, n * plane, batch.data());
      // Cumulative mean: batch k enters with weight 1 / (k + 1).
      for (BatchNorm* bn : norms) bn->state.momentum = 1.0 / static_cast<double>(k + 1);
      forward(batch, true);
    }
  } catch (...) {
    freeze_grids_ = false;
    for (std::size_t i = 0; i < norms.size(); ++i) norms[i]->state.momentum = saved[i];
    throw;
  }
  freeze_grids_ = false;
  for (std::size_t i = 0; i < norms.size(); ++i) norms[i]->state.momentum = saved[i];
}

std::vector<const GroupKernel*> Model::group_conv_layers() const {
  return {&block1_.conv1, &block1_.conv2, &block2_.conv1, &block2_.conv2};
}

std::vector<EpochMetrics> train(Model& model, const TrainConfig& cfg, const Dataset& train_set,
                                const Dataset* eval_set,
                                const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be > 0");
  if (train_set.size() == 0) throw std::invalid_argument("training set is empty");
  Adam opt(model.parameters(), AdamConfig{.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t steps_per_epoch = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  std::size_t step = 0;
  std::vector<EpochMetrics> history;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      const Dataset batch =
          train_set.subset(std::span<const std::size_t>(order).subspan(start, n));
      if (cfg.cosine_schedule) {
        opt.set_lr(cfg.lr * 0.5 *
                   (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                   static_cast<double>(total_steps))));
      }
      const DiffTensor logits = model.forward(batch.images, true, &rng);
      DiffTensor loss = softmax_cross_entropy(logits, batch.labels);
      const double lv = loss.value().item();
      if (!std::isfinite(lv)) {
        throw std::runtime_error("non-finite training loss " + std::to_string(lv) + " at epoch " +
                                 std::to_string(epoch) + ", step " + std::to_string(step) +
                                 " (lr " + std::to_string(opt.config().lr) + ")");
      }
      opt.zero_grad();
      loss.backward();
      opt.step();
      ++step;
      loss_sum += lv * static_cast<double>(n);
      for (std::size_t r = 0; r < n; ++r) correct += argmax_row(logits.value(), r) == batch.labels[r];
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(order.size());
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool eval_now =
        eval_set && cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs);
    if (model.config().sampling == SamplingMode::kRandom && (eval_now || epoch == cfg.epochs)) {
      model.recalibrate_batch_norm(train_set.head(1000).images);
    }
    if (eval_now) m.eval_accuracy = evaluate(model, *eval_set);
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return history;
}

double evaluate(Model& model, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) return std::nan("");
  NoGradGuard guard;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, data.size() - start);
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), start);
    const Dataset batch = data.subset(idx);
    const Tensor logits = model.forward(batch.images, false).value();
    for (std::size_t r = 0; r < n; ++r) correct += argmax_row(logits, r) == batch.labels[r];
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void save_checkpoint(const std::string& path, Model& model) {
  nlohmann::json header;
  header["format"] = "liegconv-checkpoint";
  header["version"] = 1;
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : model_settings(model.config())) cfg[k] = v;
  header["config"] = cfg;
  std::vector<std::pair<std::string, const Tensor*>> arrays;
  for (auto& [name, p] : model.named_parameters()) arrays.emplace_back(name, &p.value());
  for (auto& [name, t] : model.named_buffers()) arrays.emplace_back(name, t);
  std::size_t offset = 0;
  header["arrays"] = nlohmann::json::array();
  for (const auto& [name, t] : arrays) {
    header["arrays"].push_back(
        {{"name", name}, {"shape", t->shape()}, {"dtype", "f64"}, {"offset", offset}});
    offset += t->size() * sizeof(double);
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  const auto len = static_cast<std::uint32_t>(text.size());
  const unsigned char len_le[4] = {static_cast<unsigned char>(len), static_cast<unsigned char>(len >> 8),
                                   static_cast<unsigned char>(len >> 16),
                                   static_cast<unsigned char>(len >> 24)};
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(len_le), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : arrays) {
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[4];
  unsigned char len_le[4];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(len_le), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("not a checkpoint file: " + path, 0);
  }
  const std::uint32_t len = len_le[0] | (len_le[1] << 8) | (len_le[2] << 16) |
                            (std::uint32_t(len_le[3]) << 24);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw FormatError("truncated checkpoint header", 8);
  const nlohmann::json header = nlohmann::json::parse(text);
  GCNNConfig cfg;
  for (const auto& [k, v] : header.at("config").items()) {
    if (!apply_model_setting(cfg, k, v.get<std::string>())) {
      throw FormatError("unknown config key in checkpoint: " + k, 8);
    }
  }
  Model model(cfg);
  std::map<std::string, Tensor*> targets;
  for (auto& [name, p] : model.named_parameters()) targets[name] = &p.mutable_value();
  for (auto& [name, t] : model.named_buffers()) targets[name] = t;
  const std::size_t base = 8 + len;
  for (const auto& entry : header.at("arrays")) {
    const std::string name = entry.at("name");
    const auto it = targets.find(name);
    if (it == targets.end()) throw FormatError("unexpected array " + name, base);
    const Shape shape = entry.at("shape").get<Shape>();
    if (shape != it->second->shape()) {
      throw FormatError("array " + name + " has shape " + shape_string(shape) + ", model expects " +
                            shape_string(it->second->shape()),
                        base);
    }
    const std::size_t offset = entry.at("offset");
    in.seekg(static_cast<std::streamoff>(base + offset));
    in.read(reinterpret_cast<char*>(it->second->data()),
            static_cast<std::streamsize>(it->second->size() * sizeof(double)));
    if (!in) throw FormatError("truncated payload for " + name, base + offset);
    targets.erase(it);
  }
  if (!targets.empty()) throw FormatError("checkpoint lacks array " + targets.begin()->first, base);
  return model;
}

}  // namespace liegconv

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

// Residual G-CNN: lift -> BN -> ReLU -> block -> maxpool 2 -> block ->
// max over (H, Y, X) -> linear -> BN -> ReLU -> linear.

#ifndef LIEGCONV_MODEL_HPP_
#define LIEGCONV_MODEL_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "liegconv/data.hpp"
#include "liegconv/gconv.hpp"
#include "liegconv/kernelnet.hpp"
#include "liegconv/lie.hpp"
#include "liegconv/ops.hpp"

namespace liegconv {

// Invalid configuration value; key() names the offending setting.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& message);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class SamplingMode { kDiscretize, kRandom };
std::string_view to_string(SamplingMode m);
SamplingMode parse_sampling(std::string_view name);

struct GCNNConfig {
  GroupTag group = GroupTag::kSE2;
  Factorization factorization = Factorization::kSeparable;
  std::size_t n_rotations = 4;
  std::size_t n_scales = 1;
  double scale_truncation = std::sqrt(3.0);
  SamplingMode sampling = SamplingMode::kDiscretize;
  // Random sampling over R+ is refused unless this is set.
  bool allow_noncompact = false;
  std::size_t stencil = 5;
  std::size_t in_channels = 1;
  std::size_t lift_channels = 32;
  std::size_t block1_channels = 32;
  std::size_t block2_channels = 64;
  std::vector<std::size_t> siren_hidden = {64, 64};
  double omega0 = 10.0;
  double omega0_spatial = 0.0;   // 0 inherits omega0
  double omega0_subgroup = 0.0;  // 0 inherits omega0
  Activation activation = Activation::kSine;
  std::size_t head_hidden = 64;
  std::size_t n_classes = 10;
  std::size_t scale_support = 2;
  Padding padding = Padding::kZero;
  std::uint64_t seed = 0;

  // Throws ConfigError on an invalid combination.
  void validate() const;
  // The uniform grid on H implied by the group and resolution settings.
  SubgroupGrid base_grid() const;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  bool cosine_schedule = false;
  std::size_t eval_every = 1;  // 0 disables per-epoch evaluation
  std::uint64_t seed = 0;
};

class BatchNorm {
 public:
  explicit BatchNorm(std::size_t channels);
  DiffTensor forward(const DiffTensor& x, bool training);
  DiffTensor gamma, beta;
  BatchNormState state;
};

class Linear {
 public:
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng);
  DiffTensor forward(const DiffTensor& x) const { return linear(x, weight, bias); }
  DiffTensor weight, bias;
};

// 1x1 group convolution mapping f (on its own grid) onto out_grid; the
// kernel must have stencil 1.
GFeatureMap group_shortcut(const GFeatureMap& f, const GroupKernel& kernel,
                           const SubgroupGrid& out_grid);

// conv1 -> BN -> ReLU -> conv2 -> BN, plus a group shortcut, then ReLU.
class ResBlock {
 public:
  ResBlock(const GCNNConfig& cfg, std::size_t c_in, std::size_t c_out, std::uint64_t seed);
  // mid/out are the output grids of conv1/conv2; the shortcut maps onto out.
  GFeatureMap forward(const GFeatureMap& x, const SubgroupGrid& mid, const SubgroupGrid& out,
                      Padding padding, bool training, std::vector<GFeatureMap>* trace);

  GroupKernel conv1, conv2, shortcut;
  BatchNorm bn1, bn2;
};

// Feature maps recorded during a forward pass, in execution order.
struct ForwardTrace {
  std::vector<std::string> names;
  std::vector<GFeatureMap> maps;
};

class Model {
 public:
  explicit Model(GCNNConfig cfg);

  // images [B, C, Y, X] -> logits [B, n_classes]. In training mode with
  // random sampling every layer's output grid is redrawn from rng.
  DiffTensor forward(const Tensor& images, bool training, std::mt19937_64* rng = nullptr,
                     ForwardTrace* trace = nullptr);

  const GCNNConfig& config() const { return cfg_; }
  std::vector<std::pair<std::string, DiffTensor>> named_parameters() const;
  std::vector<DiffTensor> parameters() const;
  std::size_t parameter_count() const;
  // BatchNorm running statistics.
  std::vector<std::pair<std::string, Tensor*>> named_buffers();
  // The four group-convolution layers in order: block1.conv1, block1.conv2,
  // block2.conv1, block2.conv2.
  std::vector<const GroupKernel*> group_conv_layers() const;
  const GroupKernel& lifting_layer() const { return lift_; }

  // Replaces the BatchNorm running statistics by their exact average over
  // `images`, computed on the frozen evaluation grids.
  void recalibrate_batch_norm(const Tensor& images, std::size_t batch_size = 200);

 private:
  SubgroupGrid draw_grid(bool training, std::mt19937_64* rng) const;
  std::vector<BatchNorm*> batch_norms();

  bool freeze_grids_ = false;

  GCNNConfig cfg_;
  SubgroupGrid grid_;
  GroupKernel lift_;
  BatchNorm lift_bn_;
  ResBlock block1_, block2_;
  Linear fc1_;
  BatchNorm fc_bn_;
  Linear fc2_;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double eval_accuracy = std::nan("");
  double seconds = 0.0;
};

// Adam with L2 weight decay; throws std::runtime_error on a non-finite loss.
// With random sampling the BatchNorm statistics are recalibrated on frozen
// grids over (up to 1000 of) the training images before each evaluation and
// after the last epoch.
std::vector<EpochMetrics> train(Model& model, const TrainConfig& cfg, const Dataset& train_set,
                                const Dataset* eval_set,
                                const std::function<void(const EpochMetrics&)>& on_epoch = {});
// Fraction of correctly classified samples with frozen grids.
double evaluate(Model& model, const Dataset& data, std::size_t batch_size = 200);

// Binary container: "LGCK", uint32 little-endian header length, JSON header
// (names, shapes, dtype, offsets, config), then float64 payload.
void save_checkpoint(const std::string& path, Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace liegconv

#endif  // LIEGCONV_MODEL_HPP_

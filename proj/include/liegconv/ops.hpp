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

// Differentiable operations over DiffTensor. Every op validates shapes and
// throws std::invalid_argument on mismatch.

#ifndef LIEGCONV_OPS_HPP_
#define LIEGCONV_OPS_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "liegconv/tensor.hpp"

namespace liegconv {

enum class Padding { kZero, kCircular };

// Elementwise, equal shapes.
DiffTensor add(const DiffTensor& a, const DiffTensor& b);
DiffTensor sub(const DiffTensor& a, const DiffTensor& b);
DiffTensor mul(const DiffTensor& a, const DiffTensor& b);
DiffTensor scale(const DiffTensor& a, double factor);

// a [M, K] x b [K, N].
DiffTensor matmul(const DiffTensor& a, const DiffTensor& b);
// x [B, in], weight [out, in], bias [out] (bias may be undefined).
DiffTensor linear(const DiffTensor& x, const DiffTensor& weight, const DiffTensor& bias);
// x [B, N] + bias [N] broadcast over rows.
DiffTensor add_row_bias(const DiffTensor& x, const DiffTensor& bias);

DiffTensor sin(const DiffTensor& x);
DiffTensor relu(const DiffTensor& x);
DiffTensor leaky_relu(const DiffTensor& x, double slope = 0.01);
DiffTensor swish(const DiffTensor& x);

DiffTensor reshape(const DiffTensor& x, Shape shape);
// Axis permutation: result axis d is input axis perm[d].
DiffTensor permute(const DiffTensor& x, std::span<const std::size_t> perm);

// x [B, G*Cg, Y, X], weight [G*Og, Cg, k, k] with k odd; stride 1, output
// [B, G*Og, Y, X]. Group g reads input channels [g*Cg, (g+1)*Cg) and writes
// output channels [g*Og, (g+1)*Og). Computes cross-correlation:
// out(y, x) = sum_{dy, dx} w(dy, dx) * in(y + dy - r, x + dx - r).
DiffTensor conv2d_grouped(const DiffTensor& x, const DiffTensor& weight, std::size_t groups,
                          Padding padding);
inline DiffTensor conv2d(const DiffTensor& x, const DiffTensor& weight, Padding padding) {
  return conv2d_grouped(x, weight, 1, padding);
}

// Non-overlapping max pooling over the last two axes; trailing rows/columns
// that do not fill a window are dropped.
DiffTensor max_pool2d(const DiffTensor& x, std::size_t window = 2);

// Reductions over the listed axes, which are removed from the result shape.
DiffTensor reduce_sum(const DiffTensor& x, std::span<const std::size_t> axes);
DiffTensor reduce_mean(const DiffTensor& x, std::span<const std::size_t> axes);
DiffTensor reduce_max(const DiffTensor& x, std::span<const std::size_t> axes);
DiffTensor sum_all(const DiffTensor& x);

// Per-channel (axis 1) normalization over every other axis.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};
DiffTensor batch_norm(const DiffTensor& x, const DiffTensor& gamma, const DiffTensor& beta,
                      BatchNormState& state, bool training);

// Mean cross-entropy of softmax(logits [B, K]) against integer labels.
DiffTensor softmax_cross_entropy(const DiffTensor& logits, std::span<const int> labels);

// out[k] = index[k] < 0 ? 0 : coef[k] * src[index[k]], shaped `shape`.
// Materializes structured weights (transformed kernels, masks) from a flat
// parameter source.
struct GatherPlan {
  Shape shape;
  std::vector<std::int64_t> index;
  std::vector<double> coef;
};
DiffTensor gather_scaled(const DiffTensor& src, std::shared_ptr<const GatherPlan> plan);

// Tallies the multiply-accumulates of convolution ops executed on this thread
// while alive. Scopes nest; every active scope sees every op.
class MacCounter {
 public:
  MacCounter();
  ~MacCounter();
  MacCounter(const MacCounter&) = delete;
  MacCounter& operator=(const MacCounter&) = delete;

  std::uint64_t count() const { return count_; }
  static void record(std::uint64_t macs);

 private:
  std::uint64_t count_ = 0;
  MacCounter* parent_;
};

// Adam with the L2 term wd * w added to the gradient.
struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

class Adam {
 public:
  Adam(std::vector<DiffTensor> params, AdamConfig config);
  // Applies one update from the gradients currently held by the params.
  void step();
  void zero_grad();
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  std::size_t steps() const { return t_; }

 private:
  std::vector<DiffTensor> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamConfig config_;
  std::size_t t_ = 0;
};

// Caps the BLAS worker count.
void set_num_threads(int n);

// Maximum relative error between the reverse-mode gradient of `fn` at `input`
// and central differences with step eps. The error for one coordinate is
// |g - n| / max(|g|, |n|, floor) with floor = 1e-3 * max |n| (and at least
// 1e-12) so that near-zero entries are judged on an absolute scale.
double grad_check(const std::function<DiffTensor(const DiffTensor&)>& fn, const Tensor& input,
                  double eps = 1e-5);

}  // namespace liegconv

#endif  // LIEGCONV_OPS_HPP_

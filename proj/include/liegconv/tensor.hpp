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

// Dense row-major float64 arrays and a tape-free reverse-mode graph on top of
// them. A DiffTensor is a shared handle to a graph node; ops in ops.hpp build
// new nodes whose backward closures accumulate into their inputs' gradients.

#ifndef LIEGCONV_TENSOR_HPP_
#define LIEGCONV_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace liegconv {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;
  double item() const;

  // Same buffer, new extents; the element count must match.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  void fill(double v);

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

// Gradient recording is on by default; NoGradGuard disables it on this thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class DiffTensor {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this node's grad and accumulates into inputs that require grad.
    std::function<void(Node&)> backward;

    Tensor& grad_buffer();
  };

  DiffTensor() = default;
  explicit DiffTensor(Tensor value, bool requires_grad = false);
  static DiffTensor parameter(Tensor value) { return DiffTensor(std::move(value), true); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  // Leaves only; used by optimizers and weight overrides.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  // Zeros-shaped-like-value when nothing has been accumulated.
  Tensor grad() const;
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  void zero_grad();

  // Seeds d(self)/d(self) = 1; self must hold a single element.
  void backward() const;
  void backward(const Tensor& seed) const;

  const std::shared_ptr<Node>& node() const { return node_; }

  // Builds a result node. Without grad mode, or when no input needs a
  // gradient, the result is a constant leaf and `backward` is dropped.
  static DiffTensor make(Tensor value, std::vector<DiffTensor> inputs,
                         std::function<void(Node&)> backward);

 private:
  std::shared_ptr<Node> node_;
};

// Accumulates `g` into `into`, allocating it like `g` if needed.
void accumulate(Tensor& into, const Tensor& g);

}  // namespace liegconv

#endif  // LIEGCONV_TENSOR_HPP_

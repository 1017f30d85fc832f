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

// Lifting, group and factorized group convolutions over sampled kernels.
//
// Feature maps on G = R^2 x| H are stored as [B, C, |H|, Y, X]; Sim(2) grids
// flatten (scale, rotation) scale-major. The spatial offset of stencil cell
// (dy, dx) is u = (dx - r, dy - r), and the discrete group convolution is
//
//   out_j(x, h) = sum_{i, u, h~} f_i(x + u, h~) k^{ij}(h^-1 u, h^-1 h~) / |h|.

#ifndef LIEGCONV_GCONV_HPP_
#define LIEGCONV_GCONV_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "liegconv/kernelnet.hpp"
#include "liegconv/lie.hpp"
#include "liegconv/ops.hpp"
#include "liegconv/tensor.hpp"

namespace liegconv {

struct GFeatureMap {
  DiffTensor data;  // [B, C, |H|, Y, X]; [B, C, Y, X] for plain images
  std::optional<SubgroupGrid> grid;

  std::size_t batch() const { return data.shape().at(0); }
  std::size_t channels() const { return data.shape().at(1); }
  std::size_t group_size() const { return grid ? grid->size() : 1; }
  std::size_t height() const { return data.shape().at(data.shape().size() - 2); }
  std::size_t width() const { return data.shape().back(); }
};

// Image [B, Ci, Y, X] -> [B, Co, Ho, Y, X] with the kernel (1/|h|) k(h^-1 u).
GFeatureMap lift_conv(const DiffTensor& image, const SampledKernel& sk, Padding padding);

// Direct group convolution with a dense kernel [Co, Ci, Ho, Hi, k, k] defined
// on (out_grid x f.grid). This is the reference path every factorization is
// checked against.
GFeatureMap group_conv_dense(const GFeatureMap& f, const DiffTensor& kernel,
                             const SubgroupGrid& out_grid, Padding padding);

// Dispatches on the sampled kernel's factorization.
GFeatureMap group_conv(const GFeatureMap& f, const SampledKernel& sk, Padding padding);

// Separable, Dseparable, Gseparable and DGseparable: subgroup (and channel)
// contraction first, then a per-h spatial convolution.
GFeatureMap separable_group_conv(const GFeatureMap& f, const SampledKernel& sk,
                                 Padding padding);

// Sim(2) only: contraction over R+, then SO(2), then per-(s, theta) spatial.
GFeatureMap h_separable_conv(const GFeatureMap& f, const SampledKernel& sk, Padding padding);

// Samples `kernel` on (out_grid, f.grid) and runs the matching executor.
GFeatureMap group_conv(const GFeatureMap& f, const GroupKernel& kernel,
                       const SubgroupGrid& out_grid, Padding padding);

enum class ProjectionMode { kMax, kMean, kSum };
std::string_view to_string(ProjectionMode m);

// Reduces over the H axis ([B, C, Y, X]) or over H and space ([B, C]).
DiffTensor invariant_project(const GFeatureMap& f, ProjectionMode mode, bool include_spatial);

struct CostConfig {
  Factorization factorization = Factorization::kSeparable;
  bool lifting = false;
  std::size_t batch = 1;
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::size_t n_h = 1;     // output grid size
  std::size_t n_h_in = 0;  // input grid size; 0 means n_h
  std::size_t n_scales = 1;  // HSeparable: scale count of both grids
  std::size_t k = 5;
  std::size_t height = 1;
  std::size_t width = 1;
};

struct CostReport {
  std::uint64_t macs = 0;
  double seconds = 0.0;
  CostConfig config;
};

// Exact multiply-accumulate count of the executor for `config`, counting
// dense kernels (entries zeroed by scale support included).
CostReport flop_estimate(const CostConfig& config);

}  // namespace liegconv

#endif  // LIEGCONV_GCONV_HPP_

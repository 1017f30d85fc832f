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

// Kernel redundancy, k_H variability, equivariance error and cost benchmarks.

#ifndef LIEGCONV_ANALYSIS_HPP_
#define LIEGCONV_ANALYSIS_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "liegconv/data.hpp"
#include "liegconv/gconv.hpp"
#include "liegconv/model.hpp"

namespace liegconv {

enum class PcaCentering {
  kNone,     // second-moment matrix of the raw kernels
  kAcrossH,  // subtract the mean kernel over the H axis first
};

// Explained-variance ratio lambda_1 / sum(lambda) of a stack of |H| spatial
// kernels given as rows of `stack` ([|H|, ...], flattened per row). A stack
// with no energy reports 1.
double pca_redundancy(const Tensor& stack, PcaCentering centering = PcaCentering::kNone);

// One ratio per (output, input) channel pair, from the kernel seen at the
// identity output element: k^{ij}(u, h~) for h~ over the input grid.
std::vector<double> layer_redundancy(const SampledKernel& sk,
                                     PcaCentering centering = PcaCentering::kNone);

// Population variance of a set of values.
double kh_variance(std::span<const double> values);
// Variance of k_H^{ij}(h~) over the input grid at the identity output
// element, one entry per channel pair (per output channel for DGseparable).
// Throws for factorizations without a subgroup factor.
std::vector<double> layer_kh_variance(const SampledKernel& sk);

// Fraction of values in each of `bins` equal-width bins over [0, 1].
std::vector<double> histogram(std::span<const double> values, std::size_t bins);

// Left-regular action of a planar rotation by theta on a feature map:
// bilinear in space, linear along the cyclic rotation axis of the grid.
GFeatureMap rotate_feature_map(const GFeatureMap& f, double theta);

// Relative error ||Phi(L f) - L Phi(f)|| / ||Phi(f)|| per convolution layer
// (lift, block1.conv1, block1.conv2, block2.conv1, block2.conv2), each
// layer fed the model's own intermediate input for `images`. Norms are taken
// over the disk inscribed in the image, away from the corners that rotation
// carries outside the frame. Uses frozen grids.
struct LayerError {
  std::string layer;
  double error = 0.0;
};
std::vector<LayerError> layerwise_equivariance(Model& model, const Tensor& images, double theta);

// Test error of the model on `data` transformed by each parameter value:
// rotation angles 2 pi t / n_steps, or scales on [0.3, 1].
struct SweepPoint {
  double param = 0.0;
  double test_error = 0.0;
};
std::vector<SweepPoint> equivariance_sweep(Model& model, const Dataset& data,
                                           const std::string& sweep, std::size_t n_steps);

// Warmed-up forward timings (median of `repeats`) and counted MACs for each
// configuration. HSeparable configurations run on Sim(2) with
// config.n_scales scales; every other factorization runs on SE(2).
std::vector<CostReport> benchmark(const std::vector<CostConfig>& configs, std::size_t repeats);

}  // namespace liegconv

#endif  // LIEGCONV_ANALYSIS_HPP_

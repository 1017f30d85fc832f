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

// Continuous kernels on affine groups. A kernel is one or more SIRENs queried
// at algebra coordinates: spatial factors at log(h^-1 u) for stencil offsets
// u, subgroup factors at log(h^-1 h~). Sampling produces a SampledKernel whose
// factor arrays are consumed by the executors in gconv.hpp.

#ifndef LIEGCONV_KERNELNET_HPP_
#define LIEGCONV_KERNELNET_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "liegconv/lie.hpp"
#include "liegconv/tensor.hpp"

namespace liegconv {

enum class Activation { kSine, kRelu, kLeakyRelu, kSwish };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

// Fully connected network with hidden layers act(omega0 * W x + b) and an
// affine output layer. `widths` lists every layer width including input and
// output, e.g. {2, 64, 64, c}.
class Siren {
 public:
  Siren(std::vector<std::size_t> widths, double omega0, std::uint64_t seed,
        Activation activation = Activation::kSine);

  // coords [N, widths.front()] -> [N, widths.back()].
  DiffTensor forward(const DiffTensor& coords) const;
  Tensor evaluate(const Tensor& coords) const;

  const std::vector<std::size_t>& widths() const { return widths_; }
  double omega0() const { return omega0_; }
  Activation activation() const { return activation_; }
  std::size_t n_layers() const { return weights_.size(); }
  // weight(l) is [widths[l+1], widths[l]], bias(l) is [widths[l+1]].
  DiffTensor& weight(std::size_t l) { return weights_.at(l); }
  DiffTensor& bias(std::size_t l) { return biases_.at(l); }
  const DiffTensor& weight(std::size_t l) const { return weights_.at(l); }
  const DiffTensor& bias(std::size_t l) const { return biases_.at(l); }
  std::vector<DiffTensor> parameters() const;

 private:
  std::vector<std::size_t> widths_;
  double omega0_;
  Activation activation_;
  std::vector<DiffTensor> weights_;
  std::vector<DiffTensor> biases_;
};

enum class Factorization {
  kNonseparable,  // k^{ij}(x, h)
  kDseparable,    // k_C^{ij} k^j(x, h)
  kSeparable,     // k_H^{ij}(h) k_R2^j(x)
  kGseparable,    // k_H^{ij}(h) k_R2^{ij}(x)
  kDGseparable,   // k_C^{ij} k_H^j(h) k_R2^j(x)
  kHSeparable,    // k_R+^{ij}(s) k_SO2^j(theta) k_R2^j(x), Sim(2) only
};

std::string_view to_string(Factorization f);
Factorization parse_factorization(std::string_view name);

struct KernelSpec {
  GroupTag group = GroupTag::kSE2;  // the full group G = R^2 x| H
  Factorization factorization = Factorization::kSeparable;
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::size_t stencil = 5;  // odd
  // Lifting kernels are spatial only: k^{ij}(h^-1 u).
  bool lifting = false;
  std::vector<std::size_t> hidden = {64, 64};
  double omega0 = 10.0;
  // Per-factor overrides for the spatial and the subgroup (scale, rotation)
  // networks; 0 inherits omega0.
  double omega0_spatial = 0.0;
  double omega0_subgroup = 0.0;
  Activation activation = Activation::kSine;
  // Number of input scale indices d = i~ - i in [0, scale_support) with
  // nonzero kernel; 0 keeps the full support.
  std::size_t scale_support = 2;
};

// Kernel values on concrete grids. Unused factors are left undefined.
// Layouts (j output channel, i input channel, h output element, h~ input
// element, u stencil offset as (dy, dx)):
//   lifting       full      [Co, Ci, Ho, k, k]
//   Nonseparable  full      [Co, Ci, Ho, Hi, k, k]
//   Dseparable    channel   [Co, Ci], full [Co, Ho, Hi, k, k]
//   Separable     subgroup  [Co, Ci, Ho, Hi], spatial [Co, Ho, k, k]
//   Gseparable    subgroup  [Co, Ci, Ho, Hi], spatial [Co, Ci, Ho, k, k]
//   DGseparable   channel   [Co, Ci], subgroup [Co, Ho, Hi], spatial [Co, Ho, k, k]
//   HSeparable    scale     [Co, Ci, So, Si], rotation [Co, Ro, Ri], spatial [Co, Ho, k, k]
// Values are raw kernel values; the 1/|h| normalization is applied by the
// executors. Entries outside the scale support are zero.
struct SampledKernel {
  Factorization factorization = Factorization::kNonseparable;
  bool lifting = false;
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::size_t stencil = 1;
  SubgroupGrid out_grid;
  std::optional<SubgroupGrid> in_grid;

  DiffTensor full;
  DiffTensor channel;
  DiffTensor subgroup;
  DiffTensor spatial;
  DiffTensor scale;
  DiffTensor rotation;
};

// Algebra coordinates fed to a spatial SIREN for a k x k stencil seen from h:
// row (dy * k + dx) holds log(h^-1 u) / r with u = (dx - r, dy - r) and
// r = (k - 1) / 2 (no scaling when k = 1). Shape [k*k, 2].
Tensor spatial_coordinates(std::size_t k, const GroupElement& h);

// True when the pair (h, h~) lies inside the truncated scale support.
bool in_scale_support(const SubgroupGrid& out_grid, const SubgroupGrid& in_grid,
                      std::size_t h, std::size_t h_in, std::size_t scale_support);

// The continuous kernel of one layer: its SIRENs plus, for D/DG-separable, a
// learned channel matrix.
class GroupKernel {
 public:
  GroupKernel(KernelSpec spec, std::uint64_t seed);

  const KernelSpec& spec() const { return spec_; }
  // Evaluates every factor on the given grids. in_grid is ignored (and may be
  // null) for lifting kernels.
  SampledKernel sample(const SubgroupGrid& out_grid, const SubgroupGrid* in_grid) const;

  std::vector<DiffTensor> parameters() const;
  std::vector<std::pair<std::string, DiffTensor>> named_parameters() const;

  // Networks by role; null when the factorization does not use them.
  const Siren* full_net() const { return opt(full_); }
  const Siren* subgroup_net() const { return opt(subgroup_); }
  const Siren* spatial_net() const { return opt(spatial_); }
  const Siren* scale_net() const { return opt(scale_); }
  const Siren* rotation_net() const { return opt(rotation_); }
  const DiffTensor& channel() const { return channel_; }

 private:
  static const Siren* opt(const std::optional<Siren>& s) { return s ? &*s : nullptr; }

  KernelSpec spec_;
  std::optional<Siren> full_;
  std::optional<Siren> subgroup_;
  std::optional<Siren> spatial_;
  std::optional<Siren> scale_;
  std::optional<Siren> rotation_;
  DiffTensor channel_;
};

// Dense k^{ij}(x, h, h~) obtained by multiplying the factors; shape
// [Co, Ci, Ho, Hi, k, k] ([Co, Ci, Ho, k, k] for lifting). Test oracle only.
Tensor materialize_full_kernel(const SampledKernel& sk);

}  // namespace liegconv

#endif  // LIEGCONV_KERNELNET_HPP_

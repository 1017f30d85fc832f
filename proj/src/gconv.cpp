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

#include "liegconv/gconv.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace liegconv {

namespace {

// Builds a weight tensor whose entry f reads src[index] * coef, with
// index < 0 meaning zero.
template <typename Map>
DiffTensor arrange(const DiffTensor& src, Shape shape, Map map) {
  auto plan = std::make_shared<GatherPlan>();
  const std::size_t total = shape_numel(shape);
  plan->shape = std::move(shape);
  plan->index.resize(total);
  plan->coef.resize(total);
  for (std::size_t f = 0; f < total; ++f) {
    const auto [index, coef] = map(f);
    plan->index[f] = index;
    plan->coef[f] = coef;
  }
  return gather_scaled(src, std::move(plan));
}

std::vector<double> inverse_determinants(const SubgroupGrid& grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (const auto& h : grid.elements()) out.push_back(1.0 / determinant(h));
  return out;
}

bool same_grid(const SubgroupGrid& a, const SubgroupGrid& b) {
  if (a.tag() != b.tag() || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const GroupElement& x = a[i];
    const GroupElement& y = b[i];
    double dtheta = std::abs(x.theta() - y.theta());
    dtheta = std::min(dtheta, kTwoPi - dtheta);
    if (dtheta > 1e-9 || std::abs(std::log(x.scale() / y.scale())) > 1e-9) return false;
  }
  return true;
}

void check_group_input(const GFeatureMap& f, const SampledKernel& sk) {
  if (sk.lifting) throw std::invalid_argument("a lifting kernel cannot act on a group feature map");
  if (!f.grid) throw std::invalid_argument("group convolution needs a feature map with a grid");
  if (f.data.shape().size() != 5) {
    throw std::invalid_argument("group feature maps are [B, C, |H|, Y, X], got " +
                                shape_string(f.data.shape()));
  }
  if (f.channels() != sk.c_in) {
    throw std::invalid_argument("feature map has " + std::to_string(f.channels()) +
                                " channels, kernel expects " + std::to_string(sk.c_in));
  }
  if (f.data.shape()[2] != f.grid->size() || !sk.in_grid || !same_grid(*f.grid, *sk.in_grid)) {
    throw std::invalid_argument("feature map grid does not match the kernel's input grid");
  }
}

GFeatureMap to_group_map(const DiffTensor& flat, std::size_t co, const SubgroupGrid& grid) {
  const Shape& s = flat.shape();
  return {reshape(flat, {s[0], co, grid.size(), s[2], s[3]}), grid};
}

}  // namespace

GFeatureMap lift_conv(const DiffTensor& image, const SampledKernel& sk, Padding padding) {
  if (!sk.lifting) throw std::invalid_argument("lift_conv needs a lifting kernel");
  if (sk.out_grid.empty()) throw std::invalid_argument("lifting grid is empty");
  const Shape& s = image.shape();
  if (s.size() != 4 || s[1] != sk.c_in) {
    throw std::invalid_argument("lift_conv expects an image [B, " + std::to_string(sk.c_in) +
                                ", Y, X], got " + shape_string(s));
  }
  const std::size_t co = sk.c_out, ci = sk.c_in, ho = sk.out_grid.size(), kk = sk.stencil * sk.stencil;
  const std::vector<double> inv_det = inverse_determinants(sk.out_grid);
  // W[(j, h), i, u] = full[j, i, h, u] / |h|.
  const DiffTensor w = arrange(sk.full, {co * ho, ci, sk.stencil, sk.stencil}, [&](std::size_t f) {
    const std::size_t u = f % kk, i = (f / kk) % ci, h = (f / (kk * ci)) % ho, j = f / (kk * ci * ho);
    return std::pair{static_cast<std::int64_t>(((j * ci + i) * ho + h) * kk + u), inv_det[h]};
  });
  return to_group_map(conv2d(image, w, padding), co, sk.out_grid);
}

GFeatureMap group_conv_dense(const GFeatureMap& f, const DiffTensor& kernel,
                             const SubgroupGrid& out_grid, Padding padding) {
  if (!f.grid || f.data.shape().size() != 5) {
    throw std::invalid_argument("group_conv_dense needs a [B, C, |H|, Y, X] map with a grid");
  }
  const Shape& ks = kernel.shape();
  const std::size_t ci = f.channels(), hi = f.grid->size(), ho = out_grid.size();
  if (ks.size() != 6 || ks[1] != ci || ks[2] != ho || ks[3] != hi || ks[4] != ks[5]) {
    throw std::invalid_argument("dense kernel shape " + shape_string(ks) +
                                " does not match the feature map and output grid");
  }
  const std::size_t co = ks[0], k = ks[4], kk = k * k;
  const std::vector<double> inv_det = inverse_determinants(out_grid);
  // W[(j, h), (i, h~), u] = k[j, i, h, h~, u] / |h|.
  const DiffTensor w = arrange(kernel, {co * ho, ci * hi, k, k}, [&](std::size_t fl) {
    const std::size_t u = fl % kk, ht = (fl / kk) % hi, i = (fl / (kk * hi)) % ci;
    const std::size_t h = (fl / (kk * hi * ci)) % ho, j = fl / (kk * hi * ci * ho);
    return std::pair{static_cast<std::int64_t>((((j * ci + i) * ho + h) * hi + ht) * kk + u),
                     inv_det[h]};
  });
  const Shape& s = f.data.shape();
  const DiffTensor x = reshape(f.data, {s[0], ci * hi, s[3], s[4]});
  return to_group_map(conv2d(x, w, padding), co, out_grid);
}

GFeatureMap separable_group_conv(const GFeatureMap& f, const SampledKernel& sk,
                                 Padding padding) {
  check_group_input(f, sk);
  const std::size_t co = sk.c_out, ci = sk.c_in, k = sk.stencil, kk = k * k;
  const std::size_t ho = sk.out_grid.size(), hi = f.grid->size();
  const Shape& s = f.data.shape();
  const std::size_t b = s[0], ny = s[3], nx = s[4];
  const std::vector<double> inv_det = inverse_determinants(sk.out_grid);
  auto idx = [](std::size_t v) { return static_cast<std::int64_t>(v); };

  switch (sk.factorization) {
    case Factorization::kSeparable: {
      // Stage 1: 1x1 conv (i, h~) -> (j, h) with k_H^{ij}(h^-1 h~).
      const DiffTensor w1 = arrange(sk.subgroup, {co * ho, ci * hi, 1, 1}, [&](std::size_t fl) {
        const std::size_t ht = fl % hi, i = (fl / hi) % ci, h = (fl / (hi * ci)) % ho;
        const std::size_t j = fl / (hi * ci * ho);
        return std::pair{idx(((j * ci + i) * ho + h) * hi + ht), 1.0};
      });
      const DiffTensor mid = conv2d(reshape(f.data, {b, ci * hi, ny, nx}), w1, padding);
      // Stage 2: depthwise k_R2^j(h^-1 u) / |h| per (j, h).
      const DiffTensor w2 = arrange(sk.spatial, {co * ho, 1, k, k}, [&](std::size_t fl) {
        const std::size_t h = (fl / kk) % ho;
        return std::pair{idx(fl), inv_det[h]};
      });
      return to_group_map(conv2d_grouped(mid, w2, co * ho, padding), co, sk.out_grid);
    }
    case Factorization::kGseparable: {
      // Stage 1: per input channel i, (h~) -> (j, h); output laid out (i, j, h).
      const DiffTensor w1 = arrange(sk.subgroup, {ci * co * ho, hi, 1, 1}, [&](std::size_t fl) {
        const std::size_t ht = fl % hi, h = (fl / hi) % ho, j = (fl / (hi * ho)) % co;
        const std::size_t i = fl / (hi * ho * co);
        return std::pair{idx(((j * ci + i) * ho + h) * hi + ht), 1.0};
      });
      const DiffTensor mid = conv2d_grouped(reshape(f.data, {b, ci * hi, ny, nx}), w1, ci, padding);
      const std::array<std::size_t, 4> perm{0, 2, 1, 3};
      const DiffTensor regrouped =
          reshape(permute(reshape(mid, {b, ci, co * ho, ny * nx}), perm), {b, co * ho * ci, ny, nx});
      // Stage 2: per (j, h), sum_i k_R2^{ij}(h^-1 u) / |h|.
      const DiffTensor w2 = arrange(sk.spatial, {co * ho, ci, k, k}, [&](std::size_t fl) {
        const std::size_t u = fl % kk, i = (fl / kk) % ci, h = (fl / (kk * ci)) % ho;
        const std::size_t j = fl / (kk * ci * ho);
        return std::pair{idx(((j * ci + i) * ho + h) * kk + u), inv_det[h]};
      });
      return to_group_map(conv2d_grouped(regrouped, w2, co * ho, padding), co, sk.out_grid);
    }
    case Factorization::kDseparable:
    case Factorization::kDGseparable: {
      // Stage 1: channel mix k_C^{ij}, treating (h~, y, x) as pixels.
      const DiffTensor wc = reshape(sk.channel, {co, ci, 1, 1});
      const DiffTensor mixed =
          reshape(conv2d(reshape(f.data, {b, ci, hi, ny * nx}), wc, padding), {b, co * hi, ny, nx});
      if (sk.factorization == Factorization::kDseparable) {
        // Stage 2: per j, (h~) -> (h) with k^j(h^-1 u, h^-1 h~) / |h|.
        const DiffTensor w2 = arrange(sk.full, {co * ho, hi, k, k}, [&](std::size_t fl) {
          const std::size_t h = (fl / (kk * hi)) % ho;
          return std::pair{idx(fl), inv_det[h]};
        });
        return to_group_map(conv2d_grouped(mixed, w2, co, padding), co, sk.out_grid);
      }
      // Stage 2: per j, 1x1 (h~) -> (h) with k_H^j(h^-1 h~).
      const DiffTensor w2 = reshape(sk.subgroup, {co * ho, hi, 1, 1});
      const DiffTensor mid = conv2d_grouped(mixed, w2, co, padding);
      // Stage 3: depthwise k_R2^j(h^-1 u) / |h|.
      const DiffTensor w3 = arrange(sk.spatial, {co * ho, 1, k, k}, [&](std::size_t fl) {
        const std::size_t h = (fl / kk) % ho;
        return std::pair{idx(fl), inv_det[h]};
      });
      return to_group_map(conv2d_grouped(mid, w3, co * ho, padding), co, sk.out_grid);
    }
    default:
      throw std::invalid_argument("separable_group_conv does not run the " +
                                  std::string(to_string(sk.factorization)) + " factorization");
  }
}

GFeatureMap h_separable_conv(const GFeatureMap& f, const SampledKernel& sk, Padding padding) {
  if (sk.factorization != Factorization::kHSeparable) {
    throw std::invalid_argument("h_separable_conv needs an hseparable kernel");
  }
  check_group_input(f, sk);
  if (f.grid->tag() != GroupTag::kRplusSO2) {
    throw std::invalid_argument("h_separable_conv runs on Sim2 feature maps only");
  }
  const std::size_t co = sk.c_out, ci = sk.c_in, k = sk.stencil, kk = k * k;
  const std::size_t so = sk.out_grid.n_scales(), ro = sk.out_grid.n_rotations();
  const std::size_t si = f.grid->n_scales(), ri = f.grid->n_rotations();
  const std::size_t ho = so * ro;
  const Shape& s = f.data.shape();
  const std::size_t b = s[0], ny = s[3], nx = s[4];
  const std::vector<double> inv_det = inverse_determinants(sk.out_grid);

  // Stage 1: (i, s~) -> (j, s) with k_R+^{ij}, treating (r~, y, x) as pixels.
  const DiffTensor w1 = arrange(sk.scale, {co * so, ci * si, 1, 1}, [&](std::size_t fl) {
    const std::size_t st = fl % si, i = (fl / si) % ci, sc = (fl / (si * ci)) % so;
    const std::size_t j = fl / (si * ci * so);
    return std::pair{static_cast<std::int64_t>(((j * ci + i) * so + sc) * si + st), 1.0};
  });
  const DiffTensor x1 = reshape(f.data, {b, ci * si, ri, ny * nx});
  const DiffTensor m1 = reshape(conv2d(x1, w1, padding), {b, co * so * ri, ny, nx});
  // Stage 2: per (j, s), (r~) -> (r) with k_SO2^j.
  const DiffTensor w2 = arrange(sk.rotation, {co * so * ro, ri, 1, 1}, [&](std::size_t fl) {
    const std::size_t rt = fl % ri, r = (fl / ri) % ro, j = fl / (ri * ro * so);
    return std::pair{static_cast<std::int64_t>((j * ro + r) * ri + rt), 1.0};
  });
  const DiffTensor m2 = conv2d_grouped(m1, w2, co * so, padding);
  // Stage 3: depthwise k_R2^j(h^-1 u) / s^2 per (j, s, r).
  const DiffTensor w3 = arrange(sk.spatial, {co * ho, 1, k, k}, [&](std::size_t fl) {
    const std::size_t h = (fl / kk) % ho;
    return std::pair{static_cast<std::int64_t>(fl), inv_det[h]};
  });
  return to_group_map(conv2d_grouped(m2, w3, co * ho, padding), co, sk.out_grid);
}

GFeatureMap group_conv(const GFeatureMap& f, const SampledKernel& sk, Padding padding) {
  switch (sk.factorization) {
    case Factorization::kNonseparable:
      check_group_input(f, sk);
      return group_conv_dense(f, sk.full, sk.out_grid, padding);
    case Factorization::kHSeparable:
      return h_separable_conv(f, sk, padding);
    default:
      return separable_group_conv(f, sk, padding);
  }
}

GFeatureMap group_conv(const GFeatureMap& f, const GroupKernel& kernel,
                       const SubgroupGrid& out_grid, Padding padding) {
  if (!f.grid) throw std::invalid_argument("group convolution needs a feature map with a grid");
  return group_conv(f, kernel.sample(out_grid, &*f.grid), padding);
}

std::string_view to_string(ProjectionMode m) {
  switch (m) {
    case ProjectionMode::kMax: return "max";
    case ProjectionMode::kMean: return "mean";
    case ProjectionMode::kSum: return "sum";
  }
  return "?";
}

DiffTensor invariant_project(const GFeatureMap& f, ProjectionMode mode, bool include_spatial) {
  if (!f.grid || f.data.shape().size() != 5) {
    throw std::invalid_argument("invariant_project needs a feature map with an H axis");
  }
  static constexpr std::array<std::size_t, 1> kH{2};
  static constexpr std::array<std::size_t, 3> kHSpace{2, 3, 4};
  const std::span<const std::size_t> axes =
      include_spatial ? std::span<const std::size_t>(kHSpace) : std::span<const std::size_t>(kH);
  switch (mode) {
    case ProjectionMode::kMax: return reduce_max(f.data, axes);
    case ProjectionMode::kMean: return reduce_mean(f.data, axes);
    case ProjectionMode::kSum: return reduce_sum(f.data, axes);
  }
  throw std::invalid_argument("unknown projection mode");
}

CostReport flop_estimate(const CostConfig& c) {
  using U = std::uint64_t;
  const U p = U(c.batch) * c.height * c.width;
  const U co = c.c_out, ci = c.c_in, ho = c.n_h, hi = c.n_h_in ? c.n_h_in : c.n_h;
  const U kk = U(c.k) * c.k;
  CostReport r;
  r.config = c;
  if (c.lifting) {
    r.macs = p * co * ho * ci * kk;
    return r;
  }
  switch (c.factorization) {
    case Factorization::kNonseparable:
      r.macs = p * co * ho * ci * hi * kk;
      break;
    case Factorization::kSeparable:
      r.macs = p * co * ho * ci * hi + p * co * ho * kk;
      break;
    case Factorization::kGseparable:
      r.macs = p * ci * co * ho * hi + p * co * ho * ci * kk;
      break;
    case Factorization::kDseparable:
      r.macs = p * co * ci * hi + p * co * ho * hi * kk;
      break;
    case Factorization::kDGseparable:
      r.macs = p * hi * co * ci + p * co * ho * hi + p * co * ho * kk;
      break;
    case Factorization::kHSeparable: {
      const U sc = c.n_scales;
      if (sc == 0 || ho % sc != 0 || hi % sc != 0) {
        throw std::invalid_argument("hseparable cost needs grid sizes divisible by n_scales");
      }
      const U ro = ho / sc, ri = hi / sc;
      r.macs = p * ri * co * sc * ci * sc + p * co * sc * ro * ri + p * co * sc * ro * kk;
      break;
    }
  }
  return r;
}

}  // namespace liegconv

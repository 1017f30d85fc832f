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

#include "liegconv/kernelnet.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "liegconv/ops.hpp"

namespace liegconv {

namespace {

// Rows of SIREN output gathered into a factor layout. `cell(flat)` returns
// (row, column) or row < 0 for a masked entry.
template <typename Cell>
DiffTensor gather_factor(const DiffTensor& net_out, Shape shape, Cell cell) {
  auto plan = std::make_shared<GatherPlan>();
  const std::size_t total = shape_numel(shape);
  const auto cols = static_cast<std::int64_t>(net_out.shape()[1]);
  plan->shape = std::move(shape);
  plan->index.resize(total);
  plan->coef.assign(total, 1.0);
  for (std::size_t f = 0; f < total; ++f) {
    const auto [row, col] = cell(f);
    plan->index[f] = row < 0 ? -1 : row * cols + col;
  }
  return gather_scaled(net_out, std::move(plan));
}

void append_algebra(std::vector<double>& buf, const GroupElement& rel) {
  for (double c : log(rel).coords) buf.push_back(c);
}

DiffTensor uniform_param(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = u(rng);
  return DiffTensor::parameter(std::move(t));
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kSine: return "sine";
    case Activation::kRelu: return "relu";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kSwish: return "swish";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  for (Activation a : {Activation::kSine, Activation::kRelu, Activation::kLeakyRelu,
                       Activation::kSwish}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

std::string_view to_string(Factorization f) {
  switch (f) {
    case Factorization::kNonseparable: return "nonseparable";
    case Factorization::kDseparable: return "dseparable";
    case Factorization::kSeparable: return "separable";
    case Factorization::kGseparable: return "gseparable";
    case Factorization::kDGseparable: return "dgseparable";
    case Factorization::kHSeparable: return "hseparable";
  }
  return "?";
}

Factorization parse_factorization(std::string_view name) {
  for (Factorization f : {Factorization::kNonseparable, Factorization::kDseparable,
                          Factorization::kSeparable, Factorization::kGseparable,
                          Factorization::kDGseparable, Factorization::kHSeparable}) {
    if (to_string(f) == name) return f;
  }
  throw std::invalid_argument("unknown factorization: " + std::string(name));
}

Siren::Siren(std::vector<std::size_t> widths, double omega0, std::uint64_t seed,
             Activation activation)
    : widths_(std::move(widths)), omega0_(omega0), activation_(activation) {
  if (widths_.size() < 2) throw std::invalid_argument("SIREN needs at least input and output widths");
  for (std::size_t w : widths_) {
    if (w == 0) throw std::invalid_argument("SIREN layer widths must be positive");
  }
  if (!(omega0 > 0.0)) throw std::invalid_argument("SIREN omega0 must be > 0");
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const double fan_in = static_cast<double>(widths_[l]);
    const double bound = l == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / omega0;
    weights_.push_back(uniform_param({widths_[l + 1], widths_[l]}, bound, rng));
    biases_.push_back(uniform_param({widths_[l + 1]}, 1.0 / std::sqrt(fan_in), rng));
  }
}

DiffTensor Siren::forward(const DiffTensor& coords) const {
  if (coords.shape().size() != 2 || coords.shape()[1] != widths_.front()) {
    throw std::invalid_argument("SIREN expects coordinates of shape (N, " +
                                std::to_string(widths_.front()) + "), got " +
                                shape_string(coords.shape()));
  }
  DiffTensor h = coords;
  const std::size_t last = weights_.size() - 1;
  for (std::size_t l = 0; l < last; ++l) {
    DiffTensor z = add_row_bias(scale(linear(h, weights_[l], DiffTensor()), omega0_), biases_[l]);
    switch (activation_) {
      case Activation::kSine: h = sin(z); break;
      case Activation::kRelu: h = relu(z); break;
      case Activation::kLeakyRelu: h = leaky_relu(z); break;
      case Activation::kSwish: h = swish(z); break;
    }
  }
  return linear(h, weights_[last], biases_[last]);
}

Tensor Siren::evaluate(const Tensor& coords) const {
  NoGradGuard no_grad;
  return forward(DiffTensor(coords)).value();
}

std::vector<DiffTensor> Siren::parameters() const {
  std::vector<DiffTensor> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(weights_[l]);
    out.push_back(biases_[l]);
  }
  return out;
}

Tensor spatial_coordinates(std::size_t k, const GroupElement& h) {
  if (k % 2 == 0) throw std::invalid_argument("stencil size must be odd, got " + std::to_string(k));
  const double r = static_cast<double>(k / 2);
  const GroupElement hinv = inverse(h);
  Tensor out({k * k, 2});
  for (std::size_t dy = 0; dy < k; ++dy) {
    for (std::size_t dx = 0; dx < k; ++dx) {
      const Vec2 u{static_cast<double>(dx) - r, static_cast<double>(dy) - r};
      Vec2 v = act_on_point(hinv, u);
      if (r > 0.0) v = {v[0] / r, v[1] / r};
      out[(dy * k + dx) * 2] = v[0];
      out[(dy * k + dx) * 2 + 1] = v[1];
    }
  }
  return out;
}

bool in_scale_support(const SubgroupGrid& out_grid, const SubgroupGrid& in_grid, std::size_t h,
                      std::size_t h_in, std::size_t scale_support) {
  if (scale_support == 0 || !has_scale(out_grid.tag())) return true;
  const auto d = static_cast<std::ptrdiff_t>(in_grid.scale_index(h_in)) -
                 static_cast<std::ptrdiff_t>(out_grid.scale_index(h));
  return d >= 0 && d < static_cast<std::ptrdiff_t>(scale_support);
}

GroupKernel::GroupKernel(KernelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  if (spec_.stencil % 2 == 0) {
    throw std::invalid_argument("stencil size must be odd, got " + std::to_string(spec_.stencil));
  }
  if (spec_.c_in == 0 || spec_.c_out == 0) throw std::invalid_argument("channel counts must be > 0");
  if (spec_.group != GroupTag::kSE2 && spec_.group != GroupTag::kR2xRplus &&
      spec_.group != GroupTag::kSim2) {
    throw std::invalid_argument("kernels live on SE2, R2xRplus or Sim2, got " +
                                std::string(to_string(spec_.group)));
  }
  if (spec_.factorization == Factorization::kHSeparable && spec_.group != GroupTag::kSim2 &&
      !spec_.lifting) {
    throw std::invalid_argument("the hseparable factorization needs Sim2");
  }
  const std::size_t co = spec_.c_out, ci = spec_.c_in;
  const auto dh = static_cast<std::size_t>(algebra_dim(subgroup_of(spec_.group)));
  auto widths = [&](std::size_t in, std::size_t out) {
    std::vector<std::size_t> w{in};
    w.insert(w.end(), spec_.hidden.begin(), spec_.hidden.end());
    w.push_back(out);
    return w;
  };
  // Each network gets its own stream derived from the layer seed.
  std::seed_seq seq{seed};
  std::vector<std::uint64_t> seeds(6);
  seq.generate(seeds.begin(), seeds.end());
  const double w_spatial = spec_.omega0_spatial > 0.0 ? spec_.omega0_spatial : spec_.omega0;
  const double w_subgroup = spec_.omega0_subgroup > 0.0 ? spec_.omega0_subgroup : spec_.omega0;
  auto make = [&](std::size_t in, std::size_t out, std::size_t which) {
    const double omega = which == 2 ? w_spatial : which == 0 ? spec_.omega0 : w_subgroup;
    return Siren(widths(in, out), omega, seeds[which], spec_.activation);
  };
  if (spec_.lifting) {
    full_ = make(2, co * ci, 0);
    return;
  }
  std::mt19937_64 channel_rng(seeds[5]);
  auto channel_init = [&] {
    return uniform_param({co, ci}, 1.0 / std::sqrt(static_cast<double>(ci)), channel_rng);
  };
  switch (spec_.factorization) {
    case Factorization::kNonseparable:
      full_ = make(2 + dh, co * ci, 0);
      break;
    case Factorization::kDseparable:
      full_ = make(2 + dh, co, 0);
      channel_ = channel_init();
      break;
    case Factorization::kSeparable:
      subgroup_ = make(dh, co * ci, 1);
      spatial_ = make(2, co, 2);
      break;
    case Factorization::kGseparable:
      subgroup_ = make(dh, co * ci, 1);
      spatial_ = make(2, co * ci, 2);
      break;
    case Factorization::kDGseparable:
      subgroup_ = make(dh, co, 1);
      spatial_ = make(2, co, 2);
      channel_ = channel_init();
      break;
    case Factorization::kHSeparable:
      scale_ = make(1, co * ci, 3);
      rotation_ = make(1, co, 4);
      spatial_ = make(2, co, 2);
      break;
  }
}

std::vector<std::pair<std::string, DiffTensor>> GroupKernel::named_parameters() const {
  std::vector<std::pair<std::string, DiffTensor>> out;
  auto add_net = [&](const std::optional<Siren>& net, const char* name) {
    if (!net) return;
    for (std::size_t l = 0; l < net->n_layers(); ++l) {
      out.emplace_back(std::string(name) + ".w" + std::to_string(l), net->weight(l));
      out.emplace_back(std::string(name) + ".b" + std::to_string(l), net->bias(l));
    }
  };
  add_net(full_, "full");
  add_net(subgroup_, "subgroup");
  add_net(spatial_, "spatial");
  add_net(scale_, "scale");
  add_net(rotation_, "rotation");
  if (channel_.defined()) out.emplace_back("channel", channel_);
  return out;
}

std::vector<DiffTensor> GroupKernel::parameters() const {
  std::vector<DiffTensor> out;
  for (auto& [name, p] : named_parameters()) out.push_back(p);
  return out;
}

SampledKernel GroupKernel::sample(const SubgroupGrid& out_grid,
                                  const SubgroupGrid* in_grid) const {
  const GroupTag htag = subgroup_of(spec_.group);
  if (out_grid.empty()) throw std::invalid_argument("output grid is empty");
  if (out_grid.tag() != htag) {
    throw std::invalid_argument("output grid is over " + std::string(to_string(out_grid.tag())) +
                                ", kernel expects " + std::string(to_string(htag)));
  }
  if (!spec_.lifting) {
    if (!in_grid || in_grid->empty()) throw std::invalid_argument("input grid is missing");
    if (in_grid->tag() != htag) throw std::invalid_argument("input grid has the wrong subgroup");
  }

  SampledKernel sk;
  sk.factorization = spec_.factorization;
  sk.lifting = spec_.lifting;
  sk.c_in = spec_.c_in;
  sk.c_out = spec_.c_out;
  sk.stencil = spec_.stencil;
  sk.out_grid = out_grid;
  if (!spec_.lifting) sk.in_grid = *in_grid;

  const std::size_t co = spec_.c_out, ci = spec_.c_in, k = spec_.stencil, kk = k * k;
  const std::size_t ho = out_grid.size();
  const std::size_t hi = spec_.lifting ? 0 : in_grid->size();

  std::vector<Tensor> spatial_by_h;
  spatial_by_h.reserve(ho);
  for (std::size_t h = 0; h < ho; ++h) spatial_by_h.push_back(spatial_coordinates(k, out_grid[h]));
  std::vector<GroupElement> out_inv;
  for (std::size_t h = 0; h < ho; ++h) out_inv.push_back(inverse(out_grid[h]));

  auto supported = [&](std::size_t h, std::size_t ht) {
    return in_scale_support(out_grid, *in_grid, h, ht, spec_.scale_support);
  };
  auto as_row = [](std::size_t r) { return static_cast<std::int64_t>(r); };

  // Spatial coordinates for every (h, u): rows h * kk + u.
  auto spatial_rows = [&] {
    Tensor c({ho * kk, 2});
    for (std::size_t h = 0; h < ho; ++h)
      std::copy(spatial_by_h[h].data(), spatial_by_h[h].data() + kk * 2, c.data() + h * kk * 2);
    return DiffTensor(std::move(c));
  };
  // Relative subgroup coordinates for every (h, h~): rows h * hi + h~.
  auto subgroup_rows = [&] {
    std::vector<double> buf;
    for (std::size_t h = 0; h < ho; ++h)
      for (std::size_t ht = 0; ht < hi; ++ht) append_algebra(buf, product(out_inv[h], (*in_grid)[ht]));
    const std::size_t d = buf.size() / (ho * hi);
    return DiffTensor(Tensor({ho * hi, d}, std::move(buf)));
  };
  // Joint coordinates for every (h, h~, u): rows (h * hi + h~) * kk + u.
  auto joint_rows = [&] {
    std::vector<double> buf;
    for (std::size_t h = 0; h < ho; ++h) {
      for (std::size_t ht = 0; ht < hi; ++ht) {
        const std::vector<double> rel = log(product(out_inv[h], (*in_grid)[ht])).coords;
        for (std::size_t u = 0; u < kk; ++u) {
          buf.push_back(spatial_by_h[h][u * 2]);
          buf.push_back(spatial_by_h[h][u * 2 + 1]);
          buf.insert(buf.end(), rel.begin(), rel.end());
        }
      }
    }
    const std::size_t d = buf.size() / (ho * hi * kk);
    return DiffTensor(Tensor({ho * hi * kk, d}, std::move(buf)));
  };

  if (spec_.lifting) {
    const DiffTensor vals = full_->forward(spatial_rows());
    sk.full = gather_factor(vals, {co, ci, ho, k, k}, [&](std::size_t f) {
      const std::size_t u = f % kk, h = (f / kk) % ho, i = (f / (kk * ho)) % ci, j = f / (kk * ho * ci);
      return std::pair{as_row(h * kk + u), as_row(j * ci + i)};
    });
    return sk;
  }

  switch (spec_.factorization) {
    case Factorization::kNonseparable: {
      const DiffTensor vals = full_->forward(joint_rows());
      sk.full = gather_factor(vals, {co, ci, ho, hi, k, k}, [&](std::size_t f) {
        const std::size_t u = f % kk, ht = (f / kk) % hi, h = (f / (kk * hi)) % ho;
        const std::size_t i = (f / (kk * hi * ho)) % ci, j = f / (kk * hi * ho * ci);
        const std::int64_t row = supported(h, ht) ? as_row((h * hi + ht) * kk + u) : -1;
        return std::pair{row, as_row(j * ci + i)};
      });
      break;
    }
    case Factorization::kDseparable: {
      const DiffTensor vals = full_->forward(joint_rows());
      sk.full = gather_factor(vals, {co, ho, hi, k, k}, [&](std::size_t f) {
        const std::size_t u = f % kk, ht = (f / kk) % hi, h = (f / (kk * hi)) % ho;
        const std::size_t j = f / (kk * hi * ho);
        const std::int64_t row = supported(h, ht) ? as_row((h * hi + ht) * kk + u) : -1;
        return std::pair{row, as_row(j)};
      });
      sk.channel = channel_;
      break;
    }
    case Factorization::kSeparable:
    case Factorization::kGseparable:
    case Factorization::kDGseparable: {
      const bool per_pair_sub = spec_.factorization != Factorization::kDGseparable;
      const DiffTensor sub_vals = subgroup_->forward(subgroup_rows());
      if (per_pair_sub) {
        sk.subgroup = gather_factor(sub_vals, {co, ci, ho, hi}, [&](std::size_t f) {
          const std::size_t ht = f % hi, h = (f / hi) % ho, i = (f / (hi * ho)) % ci;
          const std::size_t j = f / (hi * ho * ci);
          return std::pair{supported(h, ht) ? as_row(h * hi + ht) : -1, as_row(j * ci + i)};
        });
      } else {
        sk.subgroup = gather_factor(sub_vals, {co, ho, hi}, [&](std::size_t f) {
          const std::size_t ht = f % hi, h = (f / hi) % ho, j = f / (hi * ho);
          return std::pair{supported(h, ht) ? as_row(h * hi + ht) : -1, as_row(j)};
        });
        sk.channel = channel_;
      }
      const DiffTensor sp_vals = spatial_->forward(spatial_rows());
      if (spec_.factorization == Factorization::kGseparable) {
        sk.spatial = gather_factor(sp_vals, {co, ci, ho, k, k}, [&](std::size_t f) {
          const std::size_t u = f % kk, h = (f / kk) % ho, i = (f / (kk * ho)) % ci;
          const std::size_t j = f / (kk * ho * ci);
          return std::pair{as_row(h * kk + u), as_row(j * ci + i)};
        });
      } else {
        sk.spatial = gather_factor(sp_vals, {co, ho, k, k}, [&](std::size_t f) {
          const std::size_t u = f % kk, h = (f / kk) % ho, j = f / (kk * ho);
          return std::pair{as_row(h * kk + u), as_row(j)};
        });
      }
      break;
    }
    case Factorization::kHSeparable: {
      const std::size_t so = out_grid.n_scales(), ro = out_grid.n_rotations();
      const std::size_t si = in_grid->n_scales(), ri = in_grid->n_rotations();
      std::vector<double> sbuf, rbuf;
      for (std::size_t s = 0; s < so; ++s)
        for (std::size_t st = 0; st < si; ++st)
          sbuf.push_back(std::log((*in_grid)[st * ri].scale() / out_grid[s * ro].scale()));
      for (std::size_t r = 0; r < ro; ++r)
        for (std::size_t rt = 0; rt < ri; ++rt)
          rbuf.push_back(wrap_angle((*in_grid)[rt].theta() - out_grid[r].theta()));
      const DiffTensor sc_vals = scale_->forward(DiffTensor(Tensor({so * si, 1}, std::move(sbuf))));
      const DiffTensor rot_vals =
          rotation_->forward(DiffTensor(Tensor({ro * ri, 1}, std::move(rbuf))));
      const std::size_t support = spec_.scale_support;
      sk.scale = gather_factor(sc_vals, {co, ci, so, si}, [&](std::size_t f) {
        const std::size_t st = f % si, s = (f / si) % so, i = (f / (si * so)) % ci;
        const std::size_t j = f / (si * so * ci);
        const auto d = static_cast<std::ptrdiff_t>(st) - static_cast<std::ptrdiff_t>(s);
        const bool ok = support == 0 || (d >= 0 && d < static_cast<std::ptrdiff_t>(support));
        return std::pair{ok ? as_row(s * si + st) : -1, as_row(j * ci + i)};
      });
      sk.rotation = gather_factor(rot_vals, {co, ro, ri}, [&](std::size_t f) {
        const std::size_t rt = f % ri, r = (f / ri) % ro, j = f / (ri * ro);
        return std::pair{as_row(r * ri + rt), as_row(j)};
      });
      const DiffTensor sp_vals = spatial_->forward(spatial_rows());
      sk.spatial = gather_factor(sp_vals, {co, ho, k, k}, [&](std::size_t f) {
        const std::size_t u = f % kk, h = (f / kk) % ho, j = f / (kk * ho);
        return std::pair{as_row(h * kk + u), as_row(j)};
      });
      break;
    }
  }
  return sk;
}

Tensor materialize_full_kernel(const SampledKernel& sk) {
  const std::size_t co = sk.c_out, ci = sk.c_in, k = sk.stencil, kk = k * k;
  const std::size_t ho = sk.out_grid.size();
  if (sk.lifting) return sk.full.value();
  const std::size_t hi = sk.in_grid->size();
  Tensor out({co, ci, ho, hi, k, k});
  auto at = [&](std::size_t j, std::size_t i, std::size_t h, std::size_t ht, std::size_t u) -> double& {
    return out[(((j * ci + i) * ho + h) * hi + ht) * kk + u];
  };
  for (std::size_t j = 0; j < co; ++j)
    for (std::size_t i = 0; i < ci; ++i)
      for (std::size_t h = 0; h < ho; ++h)
        for (std::size_t ht = 0; ht < hi; ++ht)
          for (std::size_t u = 0; u < kk; ++u) {
            double v = 0.0;
            switch (sk.factorization) {
              case Factorization::kNonseparable:
                v = sk.full.value()[(((j * ci + i) * ho + h) * hi + ht) * kk + u];
                break;
              case Factorization::kDseparable:
                v = sk.channel.value()[j * ci + i] *
                    sk.full.value()[((j * ho + h) * hi + ht) * kk + u];
                break;
              case Factorization::kSeparable:
                v = sk.subgroup.value()[((j * ci + i) * ho + h) * hi + ht] *
                    sk.spatial.value()[(j * ho + h) * kk + u];
                break;
              case Factorization::kGseparable:
                v = sk.subgroup.value()[((j * ci + i) * ho + h) * hi + ht] *
                    sk.spatial.value()[((j * ci + i) * ho + h) * kk + u];
                break;
              case Factorization::kDGseparable:
                v = sk.channel.value()[j * ci + i] *
                    sk.subgroup.value()[(j * ho + h) * hi + ht] *
                    sk.spatial.value()[(j * ho + h) * kk + u];
                break;
              case Factorization::kHSeparable: {
                const std::size_t so = sk.out_grid.n_scales(), ro = sk.out_grid.n_rotations();
                const std::size_t si = sk.in_grid->n_scales(), ri = sk.in_grid->n_rotations();
                const std::size_t s = h / ro, r = h % ro, st = ht / ri, rt = ht % ri;
                v = sk.scale.value()[((j * ci + i) * so + s) * si + st] *
                    sk.rotation.value()[(j * ro + r) * ri + rt] *
                    sk.spatial.value()[(j * ho + h) * kk + u];
                break;
              }
            }
            at(j, i, h, ht, u) = v;
          }
  return out;
}

}  // namespace liegconv

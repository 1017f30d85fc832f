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

#include "liegconv/selfcheck.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "liegconv/gconv.hpp"
#include "liegconv/kernelnet.hpp"
#include "liegconv/lie.hpp"
#include "liegconv/model.hpp"
#include "liegconv/ops.hpp"

namespace liegconv {

namespace {

using Mat = std::array<double, 9>;

Mat matmul(const Mat& a, const Mat& b) {
  Mat c{};
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k)
      for (int q = 0; q < 3; ++q) c[r * 3 + q] += a[r * 3 + k] * b[k * 3 + q];
  return c;
}

double mat_distance(const Mat& a, const Mat& b) {
  double d = 0.0;
  for (int i = 0; i < 9; ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

GroupElement random_element(GroupTag tag, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-5.0, 5.0), ang(-std::numbers::pi, std::numbers::pi),
      logs(std::log(0.3), std::log(3.0));
  Vec2 x{0.0, 0.0};
  double theta = 0.0, s = 1.0;
  if (has_translation(tag)) x = {pos(rng), pos(rng)};
  if (has_rotation(tag)) theta = ang(rng);
  if (has_scale(tag)) s = std::exp(logs(rng));
  return GroupElement(tag, x, theta, s);
}

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.storage()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

template <typename Body>
CheckResult timed(std::string name, double tolerance, Body body) {
  CheckResult r;
  r.name = std::move(name);
  r.tolerance = tolerance;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.worst = body(r.detail);
    r.passed = r.worst < tolerance;
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Grid on the subgroup of `group` with at most 8 elements.
SubgroupGrid random_grid(GroupTag group, std::size_t n_scales, std::mt19937_64& rng) {
  switch (group) {
    case GroupTag::kSE2: return uniform_rotation_grid(pick(rng, 1, 8));
    case GroupTag::kR2xRplus:
      return uniform_scale_grid(n_scales, n_scales > 1 ? std::optional<double>(2.0) : std::nullopt);
    default:
      return uniform_grid(GroupTag::kRplusSO2, n_scales, pick(rng, 1, 8 / n_scales),
                          n_scales > 1 ? std::optional<double>(2.0) : std::nullopt);
  }
}

// Central differences on a few entries of each parameter against the
// gradient left by one backward pass of `loss`.
double parameter_fd_error(const std::function<DiffTensor()>& loss,
                          const std::vector<DiffTensor>& params_in) {
  std::vector<DiffTensor> params = params_in;
  for (auto& p : params) p.zero_grad();
  DiffTensor l = loss();
  l.backward();
  std::vector<Tensor> grads;
  double scale = 0.0;
  for (const auto& p : params) {
    grads.push_back(p.grad());
    scale = std::max(scale, max_abs(grads.back()));
  }
  const double floor = std::max(1e-3 * scale, 1e-12), eps = 1e-5;
  double worst = 0.0;
  NoGradGuard guard;
  for (std::size_t q = 0; q < params.size(); ++q) {
    DiffTensor& p = params[q];
    const std::size_t stride = std::max<std::size_t>(1, p.size() / 4);
    for (std::size_t k = 0; k < p.size(); k += stride) {
      const double keep = p.value()[k];
      p.mutable_value()[k] = keep + eps;
      const double up = loss().value().item();
      p.mutable_value()[k] = keep - eps;
      const double down = loss().value().item();
      p.mutable_value()[k] = keep;
      const double fd = (up - down) / (2.0 * eps), g = grads[q][k];
      worst = std::max(worst, std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), floor}));
    }
  }
  return worst;
}

}  // namespace

Tensor lattice_quarter_turn(const Tensor& t, int turns) {
  const std::size_t n = t.dim(t.rank() - 1);
  if (t.dim(t.rank() - 2) != n) throw std::invalid_argument("quarter turns need square planes");
  const std::size_t planes = t.size() / (n * n);
  Tensor cur = t;
  for (int step = 0; step < ((turns % 4) + 4) % 4; ++step) {
    Tensor next(cur.shape());
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t row = 0; row < n; ++row)
        for (std::size_t col = 0; col < n; ++col)
          next[(p * n + row) * n + col] = cur[(p * n + (n - 1 - col)) * n + row];
    cur = std::move(next);
  }
  return cur;
}

Tensor cyclic_group_shift(const Tensor& t, int s) {
  const std::size_t bc = t.dim(0) * t.dim(1), h = t.dim(2), plane = t.dim(3) * t.dim(4);
  const long n = static_cast<long>(h);
  Tensor out(t.shape());
  for (std::size_t c = 0; c < bc; ++c)
    for (std::size_t m = 0; m < h; ++m) {
      const auto src = static_cast<std::size_t>(((static_cast<long>(m) - s) % n + n) % n);
      std::copy_n(t.data() + (c * h + src) * plane, plane, out.data() + (c * h + m) * plane);
    }
  return out;
}

CheckResult check_group_axioms(std::size_t cases, std::uint64_t seed) {
  return timed("group axioms", 1e-10, [&](std::string& detail) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    std::ostringstream per_group;
    for (GroupTag tag : {GroupTag::kR2, GroupTag::kSO2, GroupTag::kRplus, GroupTag::kRplusSO2,
                         GroupTag::kSE2, GroupTag::kR2xRplus, GroupTag::kSim2}) {
      double w = 0.0;
      const Mat eye = GroupElement::identity(tag).matrix();
      for (std::size_t trial = 0; trial < cases; ++trial) {
        const GroupElement a = random_element(tag, rng), b = random_element(tag, rng),
                           c = random_element(tag, rng);
        const Mat ma = a.matrix(), mb = b.matrix();
        w = std::max(w, mat_distance(product(a, b).matrix(), matmul(ma, mb)));
        w = std::max(w, mat_distance(product(product(a, b), c).matrix(),
                                     product(a, product(b, c)).matrix()));
        w = std::max(w, mat_distance(product(GroupElement::identity(tag), a).matrix(), ma));
        w = std::max(w, mat_distance(product(a, GroupElement::identity(tag)).matrix(), ma));
        w = std::max(w, mat_distance(matmul(ma, inverse(a).matrix()), eye));
        w = std::max(w, mat_distance(exp(log(a)).matrix(), ma));
        const AlgebraVector v = log(a);
        const AlgebraVector back = log(exp(v));
        for (std::size_t i = 0; i < v.coords.size(); ++i)
          w = std::max(w, std::abs(back.coords[i] - v.coords[i]));
        const double da = determinant(a), db = determinant(b);
        w = std::max(w, std::abs(determinant(product(a, b)) - da * db) / std::max(1.0, da * db));
      }
      per_group << to_string(tag) << "=" << w << " ";
      worst = std::max(worst, w);
    }
    detail = per_group.str();
    return worst;
  });
}

CheckResult check_factorization_equivalence(std::size_t instances, std::uint64_t seed) {
  return timed("factorization equivalence", 1e-10, [&](std::string& detail) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    std::ostringstream per;
    for (Factorization fact :
         {Factorization::kNonseparable, Factorization::kDseparable, Factorization::kSeparable,
          Factorization::kGseparable, Factorization::kDGseparable, Factorization::kHSeparable}) {
      double w = 0.0;
      for (std::size_t inst = 0; inst < instances; ++inst) {
        const GroupTag group =
            fact == Factorization::kHSeparable
                ? GroupTag::kSim2
                : std::array{GroupTag::kSE2, GroupTag::kR2xRplus, GroupTag::kSim2}[inst % 3];
        const std::size_t n_scales = group == GroupTag::kSE2 ? 1 : pick(rng, 1, group == GroupTag::kSim2 ? 2 : 4);
        SubgroupGrid in_grid = random_grid(group, n_scales, rng);
        SubgroupGrid out_grid = random_grid(group, n_scales, rng);
        if (inst % 2 == 1) {
          in_grid = random_perturb(in_grid, rng, PerturbOptions{.allow_noncompact = true});
          out_grid = random_perturb(out_grid, rng, PerturbOptions{.allow_noncompact = true});
        }
        KernelSpec spec;
        spec.group = group;
        spec.factorization = fact;
        spec.c_in = pick(rng, 1, 4);
        spec.c_out = pick(rng, 1, 4);
        spec.stencil = 2 * pick(rng, 0, 2) + 1;
        spec.hidden = {16};
        spec.scale_support = pick(rng, 0, 2);
        const GroupKernel kernel(spec, rng());
        const SampledKernel sk = kernel.sample(out_grid, &in_grid);
        const GFeatureMap f{DiffTensor(random_tensor({1, spec.c_in, in_grid.size(), 8, 8}, rng)),
                            in_grid};
        const Padding pad = inst % 4 < 2 ? Padding::kZero : Padding::kCircular;
        const Tensor got = group_conv(f, sk, pad).data.value();
        const Tensor want =
            group_conv_dense(f, DiffTensor(materialize_full_kernel(sk)), out_grid, pad).data.value();
        w = std::max(w, max_abs_diff(got, want) / std::max(max_abs(want), 1e-300));
      }
      per << to_string(fact) << "=" << w << " ";
      worst = std::max(worst, w);
    }
    detail = per.str();
    return worst;
  });
}

CheckResult check_c4_equivariance(std::size_t inputs, std::uint64_t seed) {
  return timed("C4 equivariance", 1e-12, [&](std::string& detail) {
    std::mt19937_64 rng(seed);
    const SubgroupGrid grid = uniform_rotation_grid(4);
    KernelSpec lift_spec;
    lift_spec.c_in = 2;
    lift_spec.c_out = 3;
    lift_spec.lifting = true;
    lift_spec.hidden = {16};
    const SampledKernel lift = GroupKernel(lift_spec, 1).sample(grid, nullptr);
    std::vector<SampledKernel> convs;
    for (Factorization f : {Factorization::kNonseparable, Factorization::kSeparable}) {
      KernelSpec s = lift_spec;
      s.lifting = false;
      s.factorization = f;
      s.c_in = 3;
      s.c_out = 2;
      convs.push_back(GroupKernel(s, 2).sample(grid, &grid));
    }
    double worst = 0.0, scale = 0.0;
    for (std::size_t n = 0; n < inputs; ++n) {
      const Tensor img = random_tensor({1, 2, 9, 9}, rng);
      const Tensor lifted = lift_conv(DiffTensor(img), lift, Padding::kCircular).data.value();
      scale = std::max(scale, max_abs(lifted));
      for (int q = 0; q < 4; ++q) {
        const Tensor turned =
            lift_conv(DiffTensor(lattice_quarter_turn(img, q)), lift, Padding::kCircular).data.value();
        worst = std::max(worst,
                         max_abs_diff(turned, cyclic_group_shift(lattice_quarter_turn(lifted, q), q)));
        for (const SampledKernel& sk : convs) {
          const Tensor out = group_conv(GFeatureMap{DiffTensor(lifted), grid}, sk, Padding::kCircular)
                                 .data.value();
          const Tensor moved = cyclic_group_shift(lattice_quarter_turn(lifted, q), q);
          const Tensor out_moved =
              group_conv(GFeatureMap{DiffTensor(moved), grid}, sk, Padding::kCircular).data.value();
          worst = std::max(worst,
                           max_abs_diff(out_moved, cyclic_group_shift(lattice_quarter_turn(out, q), q)));
        }
      }
    }
    std::ostringstream d;
    d << "max |output| " << scale;
    detail = d.str();
    return worst;
  });
}

CheckResult check_gradients(std::uint64_t seed) {
  return timed("gradients", 1e-4, [&](std::string& detail) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    std::ostringstream per;
    for (Factorization fact :
         {Factorization::kNonseparable, Factorization::kDseparable, Factorization::kSeparable,
          Factorization::kGseparable, Factorization::kDGseparable, Factorization::kHSeparable}) {
      const bool hsep = fact == Factorization::kHSeparable;
      const SubgroupGrid grid =
          hsep ? uniform_grid(GroupTag::kRplusSO2, 2, 2, 2.0) : uniform_rotation_grid(4);
      KernelSpec spec;
      spec.group = hsep ? GroupTag::kSim2 : GroupTag::kSE2;
      spec.factorization = fact;
      spec.c_in = 2;
      spec.c_out = 2;
      spec.stencil = 3;
      spec.hidden = {8};
      spec.omega0 = 3.0;
      const GroupKernel kernel(spec, rng());
      const SampledKernel sk = kernel.sample(grid, &grid);
      const Tensor x = random_tensor({1, 2, grid.size(), 5, 5}, rng);
      const DiffTensor weights(random_tensor({1, 2, grid.size(), 5, 5}, rng));
      auto objective = [&](const GFeatureMap& f, const SampledKernel& k) {
        return sum_all(mul(group_conv(f, k, Padding::kZero).data, weights));
      };
      double w = grad_check([&](const DiffTensor& in) { return objective({in, grid}, sk); }, x);
      for (DiffTensor SampledKernel::*factor :
           {&SampledKernel::full, &SampledKernel::channel, &SampledKernel::subgroup,
            &SampledKernel::spatial, &SampledKernel::scale, &SampledKernel::rotation}) {
        if (!(sk.*factor).defined()) continue;
        w = std::max(w, grad_check(
                            [&](const DiffTensor& t) {
                              SampledKernel k = sk;
                              k.*factor = t;
                              return objective({DiffTensor(x), grid}, k);
                            },
                            (sk.*factor).value()));
      }
      // SIREN parameters through coordinate sampling.
      std::vector<DiffTensor> params;
      for (auto& [name, p] : kernel.named_parameters()) params.push_back(p);
      w = std::max(w, parameter_fd_error(
                          [&] { return objective({DiffTensor(x), grid}, kernel.sample(grid, &grid)); },
                          params));
      per << to_string(fact) << "=" << w << " ";
      worst = std::max(worst, w);
    }
    {
      KernelSpec spec;
      spec.c_in = 2;
      spec.c_out = 2;
      spec.stencil = 3;
      spec.lifting = true;
      spec.hidden = {8};
      const SubgroupGrid grid = uniform_rotation_grid(4);
      const SampledKernel sk = GroupKernel(spec, rng()).sample(grid, nullptr);
      const DiffTensor weights(random_tensor({1, 2, 4, 5, 5}, rng));
      const Tensor img = random_tensor({1, 2, 5, 5}, rng);
      double w = grad_check(
          [&](const DiffTensor& in) {
            return sum_all(mul(lift_conv(in, sk, Padding::kZero).data, weights));
          },
          img);
      w = std::max(w, grad_check(
                          [&](const DiffTensor& t) {
                            SampledKernel k = sk;
                            k.full = t;
                            return sum_all(mul(lift_conv(DiffTensor(img), k, Padding::kZero).data, weights));
                          },
                          sk.full.value()));
      per << "lifting=" << w << " ";
      worst = std::max(worst, w);
    }
    {
      GCNNConfig cfg;
      cfg.stencil = 3;
      cfg.lift_channels = 3;
      cfg.block1_channels = 3;
      cfg.block2_channels = 4;
      cfg.siren_hidden = {8};
      cfg.omega0 = 3.0;
      cfg.head_hidden = 6;
      cfg.n_classes = 5;
      Model model(cfg);
      const Tensor images = random_tensor({2, 1, 6, 6}, rng);
      const std::vector<int> labels{1, 3};
      // Evaluation-mode BatchNorm is a fixed affine map, so the loss is smooth
      // in every parameter away from ReLU and max kinks.
      const double w = parameter_fd_error(
          [&] { return softmax_cross_entropy(model.forward(images, false), labels); },
          model.parameters());
      per << "model=" << w;
      worst = std::max(worst, w);
    }
    detail = per.str();
    return worst;
  });
}

}  // namespace liegconv

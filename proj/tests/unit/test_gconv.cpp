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

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "liegconv/gconv.hpp"
#include "testing/oracles.hpp"

using namespace liegconv;
namespace lt = liegconv::testing;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

DiffTensor probe_loss(const DiffTensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum_all(mul(y, DiffTensor(lt::random_tensor(y.shape(), rng))));
}

KernelSpec small_spec(GroupTag group, Factorization fact, std::size_t ci, std::size_t co,
                      std::size_t k) {
  KernelSpec spec;
  spec.group = group;
  spec.factorization = fact;
  spec.c_in = ci;
  spec.c_out = co;
  spec.stencil = k;
  spec.hidden = {16, 16};
  spec.omega0 = 3.0;
  return spec;
}

// Subgroup algebra coordinates of a relative element read off its matrix.
std::vector<double> subgroup_log(GroupTag group, const lt::Mat3& rel) {
  const lt::Coords c = lt::from_matrix(rel);
  double theta = c.theta;
  if (theta >= kTwoPi - 1e-12) theta = 0.0;
  switch (group) {
    case GroupTag::kSE2: return {theta};
    case GroupTag::kR2xRplus: return {std::log(c.s)};
    default: return {theta, std::log(c.s)};
  }
}

// Loop oracle for the nonseparable group convolution with zero padding. Every
// kernel value is obtained by evaluating the network on coordinates derived
// from homogeneous matrices.
Tensor brute_force_group_conv(const Tensor& f, const SubgroupGrid& in_grid,
                              const SubgroupGrid& out_grid, const Siren& net, GroupTag group,
                              std::size_t co, std::size_t k, std::size_t scale_support) {
  const std::size_t b = f.dim(0), ci = f.dim(1), hi = f.dim(2), ny = f.dim(3), nx = f.dim(4);
  const std::size_t ho = out_grid.size();
  const int r = static_cast<int>(k / 2);
  const double rs = r > 0 ? r : 1.0;
  Tensor out({b, co, ho, ny, nx});
  for (std::size_t h = 0; h < ho; ++h) {
    const lt::Mat3 hm = lt::to_matrix(out_grid[h]);
    const lt::Mat3 hinv = lt::inverse3(hm);
    const double det = hm[0][0] * hm[1][1] - hm[0][1] * hm[1][0];
    for (std::size_t ht = 0; ht < hi; ++ht) {
      const auto d = static_cast<long>(in_grid.scale_index(ht)) -
                     static_cast<long>(out_grid.scale_index(h));
      if (scale_support != 0 && (d < 0 || d >= static_cast<long>(scale_support))) continue;
      const std::vector<double> rel =
          subgroup_log(group, lt::matmul3(hinv, lt::to_matrix(in_grid[ht])));
      for (int dy = 0; dy < static_cast<int>(k); ++dy) {
        for (int dx = 0; dx < static_cast<int>(k); ++dx) {
          const double ux = dx - r, uy = dy - r;
          Tensor q({1, 2 + rel.size()});
          q[0] = (hinv[0][0] * ux + hinv[0][1] * uy) / rs;
          q[1] = (hinv[1][0] * ux + hinv[1][1] * uy) / rs;
          for (std::size_t a = 0; a < rel.size(); ++a) q[2 + a] = rel[a];
          const Tensor kv = net.evaluate(q);
          for (std::size_t bb = 0; bb < b; ++bb)
            for (std::size_t j = 0; j < co; ++j)
              for (std::size_t i = 0; i < ci; ++i)
                for (int y = 0; y < static_cast<int>(ny); ++y)
                  for (int x = 0; x < static_cast<int>(nx); ++x) {
                    const int sy = y + dy - r, sx = x + dx - r;
                    if (sy < 0 || sx < 0 || sy >= static_cast<int>(ny) || sx >= static_cast<int>(nx))
                      continue;
                    out.at({bb, j, h, std::size_t(y), std::size_t(x)}) +=
                        f.at({bb, i, ht, std::size_t(sy), std::size_t(sx)}) * kv[j * ci + i] / det;
                  }
        }
      }
    }
  }
  return out;
}

Tensor run(const GFeatureMap& f, const SampledKernel& sk, Padding p) {
  return group_conv(f, sk, p).data.value();
}

Tensor run_dense(const GFeatureMap& f, const SampledKernel& sk, Padding p) {
  return group_conv_dense(f, DiffTensor(materialize_full_kernel(sk)), sk.out_grid, p).data.value();
}

SubgroupGrid sim2_grid(std::size_t scales, std::size_t rotations) {
  return uniform_grid(GroupTag::kRplusSO2, scales, rotations,
                      scales > 1 ? std::optional<double>(2.0) : std::nullopt);
}

}  // namespace

TEST_CASE("lifting a zero image gives zeros") {
  GroupKernel kernel(small_spec(GroupTag::kSE2, Factorization::kSeparable, 1, 3, 5), 1);
  KernelSpec spec = kernel.spec();
  spec.lifting = true;
  GroupKernel lift(spec, 1);
  const SampledKernel sk = lift.sample(uniform_rotation_grid(4), nullptr);
  const GFeatureMap out = lift_conv(DiffTensor(Tensor({2, 1, 6, 6})), sk, Padding::kZero);
  CHECK(out.data.shape() == Shape{2, 3, 4, 6, 6});
  CHECK(lt::max_abs(out.data.value()) == 0.0);
}

TEST_CASE("lifting on the trivial grid is a planar convolution") {
  KernelSpec spec = small_spec(GroupTag::kSE2, Factorization::kSeparable, 2, 3, 3);
  spec.lifting = true;
  GroupKernel lift(spec, 4);
  const SampledKernel sk = lift.sample(uniform_rotation_grid(1), nullptr);
  std::mt19937_64 rng(3);
  const Tensor img = lt::random_tensor({1, 2, 7, 6}, rng);
  for (bool circular : {false, true}) {
    const Tensor got =
        lift_conv(DiffTensor(img), sk, circular ? Padding::kCircular : Padding::kZero).data.value();
    const std::vector<double> want =
        lt::reference_conv(img.storage(), 2, 7, 6, sk.full.value().storage(), 3, 3, circular);
    double worst = 0.0;
    for (std::size_t n = 0; n < want.size(); ++n) worst = std::max(worst, std::abs(got[n] - want[n]));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("lifting matches a loop oracle on Sim2") {
  KernelSpec spec = small_spec(GroupTag::kSim2, Factorization::kHSeparable, 2, 2, 3);
  spec.lifting = true;
  GroupKernel lift(spec, 8);
  const SubgroupGrid grid = sim2_grid(2, 4);
  const SampledKernel sk = lift.sample(grid, nullptr);
  std::mt19937_64 rng(5);
  const Tensor img = lt::random_tensor({1, 2, 4, 5}, rng);
  const Tensor got = lift_conv(DiffTensor(img), sk, Padding::kZero).data.value();
  double worst = 0.0;
  for (std::size_t h = 0; h < grid.size(); ++h) {
    const lt::Mat3 hinv = lt::inverse3(lt::to_matrix(grid[h]));
    const double det = grid[h].scale() * grid[h].scale();
    for (std::size_t j = 0; j < 2; ++j)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) {
          double acc = 0.0;
          for (int dy = 0; dy < 3; ++dy)
            for (int dx = 0; dx < 3; ++dx) {
              const int sy = y + dy - 1, sx = x + dx - 1;
              if (sy < 0 || sx < 0 || sy >= 4 || sx >= 5) continue;
              Tensor q({1, 2});
              q[0] = hinv[0][0] * (dx - 1) + hinv[0][1] * (dy - 1);
              q[1] = hinv[1][0] * (dx - 1) + hinv[1][1] * (dy - 1);
              const Tensor kv = lift.full_net()->evaluate(q);
              for (std::size_t i = 0; i < 2; ++i)
                acc += img.at({0, i, std::size_t(sy), std::size_t(sx)}) * kv[j * 2 + i] / det;
            }
          worst = std::max(worst, std::abs(got.at({0, j, h, std::size_t(y), std::size_t(x)}) - acc));
        }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("group convolution matches a loop oracle") {
  std::mt19937_64 draw(12);
  struct Case {
    GroupTag group;
    SubgroupGrid in_grid, out_grid;
    std::size_t support;
  };
  const std::vector<Case> cases = {
      {GroupTag::kSE2, uniform_rotation_grid(2), uniform_rotation_grid(2), 2},
      {GroupTag::kSE2, uniform_rotation_grid(4), uniform_rotation_grid(2), 2},
      {GroupTag::kR2xRplus, uniform_scale_grid(3, 2.0), uniform_scale_grid(3, 2.0), 2},
      {GroupTag::kR2xRplus, uniform_scale_grid(2, 2.0), uniform_scale_grid(2, 2.0), 0},
      {GroupTag::kSim2, sim2_grid(2, 2), sim2_grid(2, 2), 1},
      {GroupTag::kSE2, random_perturb(uniform_rotation_grid(4), draw),
       random_perturb(uniform_rotation_grid(3), draw), 2},
      {GroupTag::kSim2, random_perturb(sim2_grid(2, 3), draw), random_perturb(sim2_grid(2, 3), draw),
       2},
  };
  std::mt19937_64 rng(11);
  for (const Case& c : cases) {
    KernelSpec spec = small_spec(c.group, Factorization::kNonseparable, 2, 2, 3);
    spec.scale_support = c.support;
    GroupKernel kernel(spec, 21);
    const Tensor f = lt::random_tensor({1, 2, c.in_grid.size(), 3, 3}, rng);
    const Tensor got =
        group_conv(GFeatureMap{DiffTensor(f), c.in_grid}, kernel, c.out_grid, Padding::kZero)
            .data.value();
    const Tensor want = brute_force_group_conv(f, c.in_grid, c.out_grid, *kernel.full_net(),
                                               c.group, 2, 3, c.support);
    CAPTURE(to_string(c.group));
    CHECK(lt::max_abs_diff(got, want) < 1e-12);
    CHECK(lt::max_abs(want) > 1e-3);
  }
}

TEST_CASE("every factorization agrees with its materialized dense kernel") {
  struct Case {
    GroupTag group;
    Factorization fact;
    SubgroupGrid in_grid, out_grid;
  };
  std::vector<Case> cases;
  for (Factorization fact : {Factorization::kNonseparable, Factorization::kDseparable,
                             Factorization::kSeparable, Factorization::kGseparable,
                             Factorization::kDGseparable}) {
    cases.push_back({GroupTag::kSE2, fact, uniform_rotation_grid(4), uniform_rotation_grid(4)});
    cases.push_back({GroupTag::kSE2, fact, uniform_rotation_grid(8), uniform_rotation_grid(4)});
    cases.push_back(
        {GroupTag::kR2xRplus, fact, uniform_scale_grid(3, 2.0), uniform_scale_grid(3, 2.0)});
    cases.push_back({GroupTag::kSim2, fact, sim2_grid(2, 4), sim2_grid(2, 4)});
  }
  cases.push_back({GroupTag::kSim2, Factorization::kHSeparable, sim2_grid(2, 4), sim2_grid(2, 4)});
  cases.push_back({GroupTag::kSim2, Factorization::kHSeparable, sim2_grid(3, 4), sim2_grid(3, 2)});
  cases.push_back({GroupTag::kSim2, Factorization::kHSeparable, sim2_grid(1, 4), sim2_grid(1, 4)});

  std::mt19937_64 rng(13);
  for (const Case& c : cases) {
    GroupKernel kernel(small_spec(c.group, c.fact, 3, 2, 5), 31);
    const SampledKernel sk = kernel.sample(c.out_grid, &c.in_grid);
    const GFeatureMap f{DiffTensor(lt::random_tensor({2, 3, c.in_grid.size(), 6, 7}, rng)),
                        c.in_grid};
    CAPTURE(to_string(c.fact));
    CAPTURE(to_string(c.group));
    for (Padding p : {Padding::kZero, Padding::kCircular}) {
      const Tensor got = run(f, sk, p);
      const Tensor want = run_dense(f, sk, p);
      CHECK(got.shape() == Shape{2, 2, c.out_grid.size(), 6, 7});
      CHECK(lt::max_abs_diff(got, want) < 1e-10);
    }
  }
}

TEST_CASE("delta kernels reproduce the input") {
  const SubgroupGrid grid = uniform_rotation_grid(4);
  SampledKernel sk;
  sk.factorization = Factorization::kSeparable;
  sk.c_in = 1;
  sk.c_out = 1;
  sk.stencil = 3;
  sk.out_grid = grid;
  sk.in_grid = grid;
  Tensor sub({1, 1, 4, 4});
  for (std::size_t h = 0; h < 4; ++h) sub.at({0, 0, h, h}) = 1.0;
  Tensor sp({1, 4, 3, 3});
  for (std::size_t h = 0; h < 4; ++h) sp.at({0, h, 1, 1}) = 1.0;
  sk.subgroup = DiffTensor(sub);
  sk.spatial = DiffTensor(sp);
  std::mt19937_64 rng(17);
  const Tensor x = lt::random_tensor({1, 1, 4, 5, 5}, rng);
  CHECK(lt::max_abs_diff(run(GFeatureMap{DiffTensor(x), grid}, sk, Padding::kZero), x) == 0.0);

  // A delta in H with a real spatial kernel is a per-h planar convolution.
  std::mt19937_64 krng(18);
  const Tensor spr = lt::random_tensor({1, 4, 3, 3}, krng);
  sk.spatial = DiffTensor(spr);
  const Tensor got = run(GFeatureMap{DiffTensor(x), grid}, sk, Padding::kZero);
  double worst = 0.0;
  for (std::size_t h = 0; h < 4; ++h) {
    const std::vector<double> plane(x.data() + h * 25, x.data() + (h + 1) * 25);
    const std::vector<double> w(spr.data() + h * 9, spr.data() + (h + 1) * 9);
    const std::vector<double> want = lt::reference_conv(plane, 1, 5, 5, w, 1, 3, false);
    for (std::size_t n = 0; n < 25; ++n) worst = std::max(worst, std::abs(got[h * 25 + n] - want[n]));
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("hseparable with one scale reduces to separable") {
  GroupKernel kernel(small_spec(GroupTag::kSim2, Factorization::kHSeparable, 2, 3, 3), 41);
  const SubgroupGrid grid = sim2_grid(1, 4);
  const SampledKernel hs = kernel.sample(grid, &grid);
  SampledKernel sep = hs;
  sep.factorization = Factorization::kSeparable;
  Tensor sub({3, 2, 4, 4});
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t rt = 0; rt < 4; ++rt)
          sub.at({j, i, r, rt}) = hs.scale.value().at({j, i, 0, 0}) * hs.rotation.value().at({j, r, rt});
  sep.subgroup = DiffTensor(sub);
  std::mt19937_64 rng(19);
  const GFeatureMap f{DiffTensor(lt::random_tensor({1, 2, 4, 5, 5}, rng)), grid};
  CHECK(lt::max_abs_diff(run(f, hs, Padding::kZero), run(f, sep, Padding::kZero)) < 1e-12);
}

TEST_CASE("quarter-turn equivariance on C4 is exact") {
  const SubgroupGrid grid = uniform_rotation_grid(4);
  std::mt19937_64 rng(23);
  const Tensor img = lt::random_tensor({1, 2, 9, 9}, rng);
  KernelSpec lspec = small_spec(GroupTag::kSE2, Factorization::kSeparable, 2, 3, 5);
  lspec.lifting = true;
  GroupKernel lift(lspec, 5);
  const SampledKernel lk = lift.sample(grid, nullptr);
  for (Padding p : {Padding::kZero, Padding::kCircular}) {
    const Tensor a = lift_conv(DiffTensor(img), lk, p).data.value();
    const Tensor b = lift_conv(DiffTensor(lt::rotate90(img, 1)), lk, p).data.value();
    CHECK(lt::max_abs_diff(b, lt::shift_group_axis(lt::rotate90(a, 1), 1)) < 1e-12);
  }
  for (Factorization fact : {Factorization::kNonseparable, Factorization::kDseparable,
                             Factorization::kSeparable, Factorization::kGseparable,
                             Factorization::kDGseparable}) {
    GroupKernel kernel(small_spec(GroupTag::kSE2, fact, 3, 2, 5), 6);
    const SampledKernel sk = kernel.sample(grid, &grid);
    const Tensor f = lt::random_tensor({1, 3, 4, 9, 9}, rng);
    const Tensor fr = lt::shift_group_axis(lt::rotate90(f, 1), 1);
    for (Padding p : {Padding::kZero, Padding::kCircular}) {
      const Tensor a = run(GFeatureMap{DiffTensor(f), grid}, sk, p);
      const Tensor b = run(GFeatureMap{DiffTensor(fr), grid}, sk, p);
      CAPTURE(to_string(fact));
      CHECK(lt::max_abs_diff(b, lt::shift_group_axis(lt::rotate90(a, 1), 1)) < 1e-12);
    }
  }
}

TEST_CASE("invariant projection") {
  Tensor t({1, 1, 2, 1, 2}, std::vector<double>{1.0, 3.0, 2.0, 0.0});
  const GFeatureMap f{DiffTensor(t), uniform_rotation_grid(2)};
  const Tensor mx = invariant_project(f, ProjectionMode::kMax, false).value();
  CHECK(mx.shape() == Shape{1, 1, 1, 2});
  CHECK(mx[0] == 2.0);
  CHECK(mx[1] == 3.0);
  const Tensor mean = invariant_project(f, ProjectionMode::kMean, false).value();
  CHECK(mean[0] == 1.5);
  CHECK(mean[1] == 1.5);
  const Tensor all = invariant_project(f, ProjectionMode::kSum, true).value();
  CHECK(all.shape() == Shape{1, 1});
  CHECK(all[0] == 6.0);
  CHECK(invariant_project(f, ProjectionMode::kMax, true).value()[0] == 3.0);
  CHECK_THROWS_AS(invariant_project(GFeatureMap{DiffTensor(Tensor({1, 1, 2, 2})), std::nullopt},
                                    ProjectionMode::kMax, false),
                  std::invalid_argument);
}

TEST_CASE("cost closed forms") {
  CostConfig c;
  c.n_h = 8;
  c.k = 5;
  c.factorization = Factorization::kNonseparable;
  CHECK(flop_estimate(c).macs == 1600);
  c.factorization = Factorization::kSeparable;
  CHECK(flop_estimate(c).macs == 264);
  c.lifting = true;
  CHECK(flop_estimate(c).macs == 200);
  c.lifting = false;
  c.factorization = Factorization::kHSeparable;
  c.n_scales = 3;
  CHECK_THROWS_AS(flop_estimate(c), std::invalid_argument);
}

TEST_CASE("counted multiply-accumulates match the closed forms") {
  struct Case {
    GroupTag group;
    Factorization fact;
    SubgroupGrid in_grid, out_grid;
  };
  std::vector<Case> cases;
  for (Factorization fact : {Factorization::kNonseparable, Factorization::kDseparable,
                             Factorization::kSeparable, Factorization::kGseparable,
                             Factorization::kDGseparable}) {
    cases.push_back({GroupTag::kSE2, fact, uniform_rotation_grid(8), uniform_rotation_grid(4)});
  }
  cases.push_back({GroupTag::kSim2, Factorization::kHSeparable, sim2_grid(2, 8), sim2_grid(2, 4)});
  std::mt19937_64 rng(29);
  for (const Case& c : cases) {
    GroupKernel kernel(small_spec(c.group, c.fact, 3, 2, 5), 7);
    const SampledKernel sk = kernel.sample(c.out_grid, &c.in_grid);
    const GFeatureMap f{DiffTensor(lt::random_tensor({2, 3, c.in_grid.size(), 6, 5}, rng)),
                        c.in_grid};
    MacCounter counter;
    run(f, sk, Padding::kZero);
    CostConfig cfg;
    cfg.factorization = c.fact;
    cfg.batch = 2;
    cfg.c_in = 3;
    cfg.c_out = 2;
    cfg.n_h = c.out_grid.size();
    cfg.n_h_in = c.in_grid.size();
    cfg.n_scales = c.out_grid.n_scales();
    cfg.k = 5;
    cfg.height = 6;
    cfg.width = 5;
    CAPTURE(to_string(c.fact));
    CHECK(counter.count() == flop_estimate(cfg).macs);
  }
  KernelSpec lspec = small_spec(GroupTag::kSE2, Factorization::kSeparable, 3, 2, 5);
  lspec.lifting = true;
  const SampledKernel lk = GroupKernel(lspec, 1).sample(uniform_rotation_grid(4), nullptr);
  MacCounter counter;
  lift_conv(DiffTensor(lt::random_tensor({2, 3, 6, 5}, rng)), lk, Padding::kZero);
  CostConfig cfg;
  cfg.lifting = true;
  cfg.batch = 2;
  cfg.c_in = 3;
  cfg.c_out = 2;
  cfg.n_h = 4;
  cfg.height = 6;
  cfg.width = 5;
  CHECK(counter.count() == flop_estimate(cfg).macs);
}

TEST_CASE("executor gradients") {
  std::mt19937_64 rng(37);
  struct Case {
    GroupTag group;
    Factorization fact;
    SubgroupGrid grid;
  };
  const std::vector<Case> cases = {
      {GroupTag::kSE2, Factorization::kNonseparable, uniform_rotation_grid(2)},
      {GroupTag::kSE2, Factorization::kDseparable, uniform_rotation_grid(2)},
      {GroupTag::kSE2, Factorization::kSeparable, uniform_rotation_grid(2)},
      {GroupTag::kSE2, Factorization::kGseparable, uniform_rotation_grid(2)},
      {GroupTag::kSE2, Factorization::kDGseparable, uniform_rotation_grid(2)},
      {GroupTag::kSim2, Factorization::kHSeparable, sim2_grid(2, 2)},
  };
  for (const Case& c : cases) {
    GroupKernel kernel(small_spec(c.group, c.fact, 2, 2, 3), 3);
    const SampledKernel sk = kernel.sample(c.grid, &c.grid);
    const Tensor x = lt::random_tensor({1, 2, c.grid.size(), 4, 4}, rng);
    CAPTURE(to_string(c.fact));
    for (Padding p : {Padding::kZero, Padding::kCircular}) {
      CHECK(grad_check(
                [&](const DiffTensor& v) {
                  return probe_loss(group_conv(GFeatureMap{v, c.grid}, sk, p).data);
                },
                x) < 1e-4);
    }
    // Gradients through each sampled factor.
    for (DiffTensor SampledKernel::*field :
         {&SampledKernel::full, &SampledKernel::channel, &SampledKernel::subgroup,
          &SampledKernel::spatial, &SampledKernel::scale, &SampledKernel::rotation}) {
      if (!(sk.*field).defined()) continue;
      CHECK(grad_check(
                [&](const DiffTensor& v) {
                  SampledKernel copy = sk;
                  copy.*field = v;
                  return probe_loss(group_conv(GFeatureMap{DiffTensor(x), c.grid}, copy,
                                               Padding::kZero)
                                        .data);
                },
                (sk.*field).value()) < 1e-4);
    }
  }
}

TEST_CASE("gradients reach the kernel networks") {
  GroupKernel kernel(small_spec(GroupTag::kSE2, Factorization::kSeparable, 2, 2, 3), 3);
  const SubgroupGrid grid = uniform_rotation_grid(4);
  std::mt19937_64 rng(41);
  const DiffTensor x(lt::random_tensor({1, 2, 4, 4, 4}, rng));
  auto loss = [&] { return probe_loss(group_conv(GFeatureMap{x, grid}, kernel, grid, Padding::kZero).data); };
  DiffTensor l = loss();
  l.backward();
  double worst = 0.0;
  for (auto& [name, p] : kernel.named_parameters()) {
    const Tensor g = p.grad();
    for (std::size_t n = 0; n < std::min<std::size_t>(p.value().size(), 6); ++n) {
      const double orig = p.value()[n];
      const double eps = 1e-6;
      p.mutable_value()[n] = orig + eps;
      const double up = loss().value().item();
      p.mutable_value()[n] = orig - eps;
      const double down = loss().value().item();
      p.mutable_value()[n] = orig;
      const double num = (up - down) / (2 * eps);
      worst = std::max(worst, std::abs(num - g[n]) / std::max({std::abs(num), std::abs(g[n]), 1e-6}));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("grid and shape mismatches are rejected") {
  GroupKernel kernel(small_spec(GroupTag::kSE2, Factorization::kSeparable, 2, 2, 3), 3);
  const SubgroupGrid g4 = uniform_rotation_grid(4);
  const SampledKernel sk = kernel.sample(g4, &g4);
  const GFeatureMap wrong_grid{DiffTensor(Tensor({1, 2, 2, 4, 4})), uniform_rotation_grid(2)};
  CHECK_THROWS_AS(group_conv(wrong_grid, sk, Padding::kZero), std::invalid_argument);
  const GFeatureMap wrong_channels{DiffTensor(Tensor({1, 3, 4, 4, 4})), g4};
  CHECK_THROWS_AS(group_conv(wrong_channels, sk, Padding::kZero), std::invalid_argument);
  CHECK_THROWS_AS(lift_conv(DiffTensor(Tensor({1, 2, 4, 4})), sk, Padding::kZero),
                  std::invalid_argument);
  const GFeatureMap se2{DiffTensor(Tensor({1, 2, 4, 4, 4})), g4};
  CHECK_THROWS_AS(h_separable_conv(se2, sk, Padding::kZero), std::invalid_argument);
}

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

#include <array>
#include <cmath>
#include <random>

#include "doctest.h"
#include "liegconv/ops.hpp"
#include "testing/oracles.hpp"

using namespace liegconv;
using liegconv::testing::max_abs_diff;
using liegconv::testing::random_tensor;

namespace {

// Contracts an arbitrary-shaped output with fixed random weights so that
// every output element has a distinct influence on the checked scalar.
DiffTensor probe_loss(const DiffTensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return sum_all(mul(y, DiffTensor(random_tensor(y.shape(), rng))));
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  t.at({1, 2}) = 4.0;
  CHECK(t[5] == 4.0);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(t.reshaped({4, 2}), std::invalid_argument);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
}

TEST_CASE("sin backward at zero is one") {
  DiffTensor x = DiffTensor::parameter(Tensor({1}, 0.0));
  sum_all(liegconv::sin(x)).backward();
  CHECK(x.grad()[0] == 1.0);
}

TEST_CASE("zero image convolves to zero with zero kernel gradient") {
  std::mt19937_64 rng(1);
  DiffTensor x(Tensor({1, 2, 6, 6}, 0.0));
  DiffTensor w = DiffTensor::parameter(random_tensor({3, 2, 3, 3}, rng));
  DiffTensor y = conv2d(x, w, Padding::kZero);
  for (double v : y.value().values()) CHECK(v == 0.0);
  sum_all(y).backward();
  const Tensor gw = w.grad();
  for (double v : gw.values()) CHECK(v == 0.0);
}

TEST_CASE("matmul gradient matches finite differences") {
  std::mt19937_64 rng(2);
  const Tensor b = random_tensor({3, 2}, rng);
  const Tensor a = random_tensor({4, 3}, rng);
  auto fa = [&](const DiffTensor& x) { return probe_loss(matmul(x, DiffTensor(b))); };
  auto fb = [&](const DiffTensor& x) { return probe_loss(matmul(DiffTensor(a), x)); };
  CHECK(grad_check(fa, a) < 1e-6);
  CHECK(grad_check(fb, b) < 1e-6);
}

TEST_CASE("grad_check of the identity is exact") {
  auto f = [](const DiffTensor& x) { return sum_all(x); };
  CHECK(grad_check(f, Tensor({1}, 0.7)) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("elementwise ops pass gradient checks") {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({3, 4}, rng, -2.0, 2.0);
  const Tensor other = random_tensor({3, 4}, rng);
  const DiffTensor o(other);
  CHECK(grad_check([](const DiffTensor& v) { return probe_loss(liegconv::sin(v)); }, x) < 1e-6);
  CHECK(grad_check([](const DiffTensor& v) { return probe_loss(relu(v)); }, x) < 1e-6);
  CHECK(grad_check([](const DiffTensor& v) { return probe_loss(leaky_relu(v, 0.1)); }, x) < 1e-6);
  CHECK(grad_check([](const DiffTensor& v) { return probe_loss(swish(v)); }, x) < 1e-6);
  CHECK(grad_check([&](const DiffTensor& v) { return probe_loss(add(v, o)); }, x) < 1e-6);
  CHECK(grad_check([&](const DiffTensor& v) { return probe_loss(sub(o, v)); }, x) < 1e-6);
  CHECK(grad_check([&](const DiffTensor& v) { return probe_loss(mul(v, v)); }, x) < 1e-6);
  CHECK(grad_check([&](const DiffTensor& v) { return probe_loss(scale(v, -3.0)); }, x) < 1e-6);
  CHECK(grad_check([](const DiffTensor& v) { return probe_loss(reshape(v, {4, 3})); }, x) < 1e-6);
}

TEST_CASE("linear and softmax cross-entropy") {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({5, 3}, rng);
  const Tensor w = random_tensor({4, 3}, rng);
  const Tensor b = random_tensor({4}, rng);
  const std::array<int, 5> labels{0, 3, 1, 2, 3};
  CHECK(grad_check([&](const DiffTensor& v) {
          return softmax_cross_entropy(linear(v, DiffTensor(w), DiffTensor(b)), labels);
        }, x) < 1e-6);
  CHECK(grad_check([&](const DiffTensor& v) {
          return softmax_cross_entropy(linear(DiffTensor(x), v, DiffTensor(b)), labels);
        }, w) < 1e-6);
  CHECK(grad_check([&](const DiffTensor& v) {
          return softmax_cross_entropy(linear(DiffTensor(x), DiffTensor(w), v), labels);
        }, b) < 1e-6);

  // Uniform logits give log K.
  const DiffTensor flat(Tensor({2, 4}, 0.0));
  const std::array<int, 2> two{1, 2};
  CHECK(softmax_cross_entropy(flat, two).value().item() == doctest::Approx(std::log(4.0)));
  const std::array<int, 2> bad{1, 4};
  CHECK_THROWS_AS(softmax_cross_entropy(flat, bad), std::invalid_argument);
}

TEST_CASE("shape mismatches are argument errors") {
  const DiffTensor a(Tensor({2, 3}));
  const DiffTensor b(Tensor({3, 2}));
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(mul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(conv2d(DiffTensor(Tensor({1, 2, 4, 4})), DiffTensor(Tensor({1, 3, 3, 3})),
                         Padding::kZero),
                  std::invalid_argument);
  CHECK_THROWS_AS(conv2d(DiffTensor(Tensor({1, 2, 4, 4})), DiffTensor(Tensor({1, 2, 2, 2})),
                         Padding::kZero),
                  std::invalid_argument);
}

TEST_CASE("conv2d matches a direct loop oracle") {
  std::mt19937_64 rng(5);
  for (bool circular : {false, true}) {
    for (std::size_t k : {1u, 3u, 5u}) {
      const Tensor x = random_tensor({2, 3, 7, 6}, rng);
      const Tensor w = random_tensor({4, 3, k, k}, rng);
      const Tensor y = conv2d(DiffTensor(x), DiffTensor(w),
                              circular ? Padding::kCircular : Padding::kZero).value();
      for (std::size_t b = 0; b < 2; ++b) {
        std::vector<double> img(x.data() + b * 3 * 42, x.data() + (b + 1) * 3 * 42);
        const auto want = liegconv::testing::reference_conv(img, 3, 7, 6, w.storage(), 4, k,
                                                            circular);
        for (std::size_t i = 0; i < want.size(); ++i) {
          CHECK(y[b * 4 * 42 + i] == doctest::Approx(want[i]).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("grouped and depthwise conv2d match per-group convolutions") {
  std::mt19937_64 rng(6);
  struct Case { std::size_t groups, cg, og, k; };
  for (const Case c : {Case{3, 1, 1, 3}, Case{2, 2, 3, 3}, Case{4, 1, 2, 1}, Case{2, 3, 1, 5}}) {
    const Tensor x = random_tensor({2, c.groups * c.cg, 5, 5}, rng);
    const Tensor w = random_tensor({c.groups * c.og, c.cg, c.k, c.k}, rng);
    const Tensor y = conv2d_grouped(DiffTensor(x), DiffTensor(w), c.groups, Padding::kCircular)
                         .value();
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t g = 0; g < c.groups; ++g) {
        const double* xb = x.data() + (b * c.groups * c.cg + g * c.cg) * 25;
        std::vector<double> img(xb, xb + c.cg * 25);
        const double* wg = w.data() + g * c.og * c.cg * c.k * c.k;
        std::vector<double> wv(wg, wg + c.og * c.cg * c.k * c.k);
        const auto want = liegconv::testing::reference_conv(img, c.cg, 5, 5, wv, c.og, c.k, true);
        for (std::size_t i = 0; i < want.size(); ++i) {
          CHECK(y[(b * c.groups * c.og + g * c.og) * 25 + i] ==
                doctest::Approx(want[i]).epsilon(1e-12));
        }
      }
    }
    for (Padding p : {Padding::kZero, Padding::kCircular}) {
      CHECK(grad_check([&](const DiffTensor& v) {
              return probe_loss(conv2d_grouped(v, DiffTensor(w), c.groups, p));
            }, x) < 1e-6);
      CHECK(grad_check([&](const DiffTensor& v) {
              return probe_loss(conv2d_grouped(DiffTensor(x), v, c.groups, p));
            }, w) < 1e-6);
    }
  }
}

TEST_CASE("circular conv commutes with cyclic shifts") {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor({1, 2, 6, 5}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  auto shift = [](const Tensor& t, std::size_t sy, std::size_t sx) {
    Tensor out(t.shape());
    const std::size_t c = t.dim(1), ny = t.dim(2), nx = t.dim(3);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t xx = 0; xx < nx; ++xx)
          out[(ch * ny + (y + sy) % ny) * nx + (xx + sx) % nx] = t[(ch * ny + y) * nx + xx];
    return out;
  };
  const DiffTensor wd(w);
  const Tensor a = conv2d(DiffTensor(shift(x, 2, 3)), wd, Padding::kCircular).value();
  const Tensor b = shift(conv2d(DiffTensor(x), wd, Padding::kCircular).value(), 2, 3);
  CHECK(max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("max pooling and reductions") {
  const DiffTensor x(Tensor({1, 1, 2, 4}, std::vector<double>{1, 5, 2, 0, 3, 4, 7, 8}));
  const Tensor p = max_pool2d(x, 2).value();
  CHECK(p.shape() == Shape{1, 1, 1, 2});
  CHECK(p[0] == 5.0);
  CHECK(p[1] == 8.0);

  const DiffTensor f(Tensor({2, 2}, std::vector<double>{1, 3, 2, 0}));
  const std::array<std::size_t, 1> h_axis{0};
  const Tensor m = reduce_max(f, h_axis).value();
  CHECK(m.shape() == Shape{2});
  CHECK(m[0] == 2.0);
  CHECK(m[1] == 3.0);
  const Tensor s = reduce_sum(f, h_axis).value();
  CHECK(s[0] == 3.0);
  CHECK(s[1] == 3.0);
  const Tensor avg = reduce_mean(DiffTensor(Tensor({3, 2, 2}, 2.5)),
                                 std::array<std::size_t, 2>{0, 2}).value();
  CHECK(avg.shape() == Shape{2});
  CHECK(avg[0] == 2.5);

  std::mt19937_64 rng(8);
  const Tensor r = random_tensor({2, 3, 4, 4}, rng);
  const std::array<std::size_t, 2> axes{1, 3};
  CHECK(grad_check([](const DiffTensor& v) { return probe_loss(max_pool2d(v, 2)); }, r) < 1e-6);
  CHECK(grad_check([&](const DiffTensor& v) { return probe_loss(reduce_max(v, axes)); }, r) < 1e-6);
  CHECK(grad_check([&](const DiffTensor& v) { return probe_loss(reduce_sum(v, axes)); }, r) < 1e-6);
  CHECK(grad_check([&](const DiffTensor& v) { return probe_loss(reduce_mean(v, axes)); }, r) < 1e-6);
  CHECK_THROWS_AS(reduce_sum(DiffTensor(r), std::array<std::size_t, 1>{4}), std::invalid_argument);
}

TEST_CASE("batch norm") {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor({3, 2, 2, 3}, rng);
  const Tensor gamma = random_tensor({2}, rng, 0.5, 1.5);
  const Tensor beta = random_tensor({2}, rng);
  BatchNormState state;
  CHECK(grad_check([&](const DiffTensor& v) {
          return probe_loss(batch_norm(v, DiffTensor(gamma), DiffTensor(beta), state, true));
        }, x) < 1e-5);
  CHECK(grad_check([&](const DiffTensor& v) {
          return probe_loss(batch_norm(DiffTensor(x), v, DiffTensor(beta), state, true));
        }, gamma) < 1e-6);
  CHECK(grad_check([&](const DiffTensor& v) {
          return probe_loss(batch_norm(v, DiffTensor(gamma), DiffTensor(beta), state, false));
        }, x) < 1e-6);

  // Training output is normalized per channel.
  BatchNormState fresh;
  const Tensor y = batch_norm(DiffTensor(x), DiffTensor(Tensor({2}, 1.0)),
                              DiffTensor(Tensor({2}, 0.0)), fresh, true).value();
  double mean0 = 0.0;
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t i = 0; i < 6; ++i) mean0 += y[(b * 2) * 6 + i];
  CHECK(mean0 == doctest::Approx(0.0).epsilon(1e-12));

  // Eval mode is a fixed affine map: f(a + b) - f(b) == f(a) - f(0).
  const DiffTensor g(gamma), bt(beta);
  auto eval = [&](const Tensor& t) { return batch_norm(DiffTensor(t), g, bt, fresh, false).value(); };
  const Tensor z(x.shape(), 0.0);
  Tensor twice = x;
  for (auto& v : twice.storage()) v *= 2.0;
  const Tensor f0 = eval(z), f1 = eval(x), f2 = eval(twice);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(f2[i] - f1[i] == doctest::Approx(f1[i] - f0[i]).epsilon(1e-12));
  }
}

TEST_CASE("gather_scaled") {
  auto plan = std::make_shared<GatherPlan>();
  plan->shape = {2, 2};
  plan->index = {2, -1, 0, 2};
  plan->coef = {1.0, 5.0, 0.5, -2.0};
  const DiffTensor src(Tensor({3}, std::vector<double>{1.0, 2.0, 3.0}));
  const Tensor out = gather_scaled(src, plan).value();
  CHECK(out[0] == 3.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.5);
  CHECK(out[3] == -6.0);
  std::mt19937_64 rng(10);
  CHECK(grad_check([&](const DiffTensor& v) { return probe_loss(gather_scaled(v, plan)); },
                   random_tensor({3}, rng)) < 1e-6);
}

TEST_CASE("mac counter tallies convolution work") {
  MacCounter outer;
  {
    MacCounter inner;
    conv2d_grouped(DiffTensor(Tensor({2, 4, 5, 6})), DiffTensor(Tensor({6, 2, 3, 3})), 2,
                   Padding::kZero);
    CHECK(inner.count() == 2ull * 6 * 30 * 2 * 9);
  }
  conv2d(DiffTensor(Tensor({1, 1, 4, 4})), DiffTensor(Tensor({1, 1, 1, 1})), Padding::kZero);
  CHECK(outer.count() == 2ull * 6 * 30 * 2 * 9 + 16);
}

TEST_CASE("adam") {
  DiffTensor w = DiffTensor::parameter(Tensor({1}, 1.0));
  Adam frozen({w}, AdamConfig{.lr = 0.0, .weight_decay = 0.0});
  sum_all(w).backward();
  frozen.step();
  CHECK(w.value()[0] == 1.0);

  DiffTensor v = DiffTensor::parameter(Tensor({1}, 1.0));
  Adam opt({v}, AdamConfig{.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8,
                           .weight_decay = 0.0});
  sum_all(v).backward();
  opt.step();
  CHECK(v.value()[0] == doctest::Approx(0.9).epsilon(1e-7));

  // With decay the first moment sees g + wd * w.
  DiffTensor u = DiffTensor::parameter(Tensor({1}, 2.0));
  Adam decayed({u}, AdamConfig{.lr = 1.0, .beta1 = 0.0, .beta2 = 0.0, .eps = 0.0,
                               .weight_decay = 1e-4});
  sum_all(scale(u, 0.0)).backward();
  decayed.step();
  CHECK(u.value()[0] == doctest::Approx(1.0).epsilon(1e-12));  // sign(2e-4) step of 1
}

TEST_CASE("no-grad mode records no graph") {
  DiffTensor w = DiffTensor::parameter(Tensor({2}, 1.0));
  NoGradGuard guard;
  const DiffTensor y = mul(w, w);
  CHECK_FALSE(y.requires_grad());
}

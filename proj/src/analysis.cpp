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

#include "liegconv/analysis.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

namespace liegconv {

namespace {

// Squared norm over the disk inscribed in the last two (square) axes.
double disk_norm2(const Tensor& t, const Tensor* minus = nullptr) {
  const std::size_t ny = t.dim(t.rank() - 2), nx = t.dim(t.rank() - 1);
  const double cy = (static_cast<double>(ny) - 1.0) / 2.0, cx = (static_cast<double>(nx) - 1.0) / 2.0;
  const double r2 = std::min(cy, cx) * std::min(cy, cx);
  const std::size_t planes = t.size() / (ny * nx);
  double acc = 0.0;
  for (std::size_t row = 0; row < ny; ++row) {
    for (std::size_t col = 0; col < nx; ++col) {
      const double dy = static_cast<double>(row) - cy, dx = static_cast<double>(col) - cx;
      if (dy * dy + dx * dx > r2) continue;
      for (std::size_t p = 0; p < planes; ++p) {
        const std::size_t i = (p * ny + row) * nx + col;
        const double v = minus ? t[i] - (*minus)[i] : t[i];
        acc += v * v;
      }
    }
  }
  return acc;
}

Tensor transform_images(const Tensor& images, const std::function<std::vector<double>(
                                                  std::span<const double>, std::size_t)>& fn) {
  const std::size_t n = images.dim(images.rank() - 1);
  const std::size_t plane = n * n, planes = images.size() / plane;
  Tensor out(images.shape());
  for (std::size_t p = 0; p < planes; ++p) {
    const std::vector<double> res = fn(std::span<const double>(images.data() + p * plane, plane), n);
    std::copy(res.begin(), res.end(), out.data() + p * plane);
  }
  return out;
}

}  // namespace

double pca_redundancy(const Tensor& stack, PcaCentering centering) {
  if (stack.rank() < 2) throw std::invalid_argument("kernel stack must be [|H|, ...]");
  const std::size_t h = stack.dim(0), f = stack.size() / h;
  if (h < 2) throw std::invalid_argument("pca_redundancy needs |H| >= 2, got " + std::to_string(h));
  Eigen::MatrixXd x(h, f);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < f; ++c) x(r, c) = stack[r * f + c];
  if (centering == PcaCentering::kAcrossH) x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd gram = x * x.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd lambda = solver.eigenvalues().cwiseMax(0.0);
  const double total = lambda.sum();
  if (!(total > 0.0)) return 1.0;
  return lambda.maxCoeff() / total;
}

std::vector<double> layer_redundancy(const SampledKernel& sk, PcaCentering centering) {
  if (sk.lifting) throw std::invalid_argument("redundancy needs a group convolution kernel");
  const Tensor full = materialize_full_kernel(sk);  // [Co, Ci, Ho, Hi, k, k]
  const std::size_t co = full.dim(0), ci = full.dim(1), ho = full.dim(2), hi = full.dim(3);
  const std::size_t kk = full.dim(4) * full.dim(5);
  std::vector<double> out;
  out.reserve(co * ci);
  Tensor stack({hi, kk});
  for (std::size_t j = 0; j < co; ++j) {
    for (std::size_t i = 0; i < ci; ++i) {
      const double* src = full.data() + ((j * ci + i) * ho + 0) * hi * kk;
      std::copy(src, src + hi * kk, stack.data());
      out.push_back(pca_redundancy(stack, centering));
    }
  }
  return out;
}

double kh_variance(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(values.size());
}

std::vector<double> layer_kh_variance(const SampledKernel& sk) {
  std::vector<double> out;
  const std::size_t co = sk.c_out, ci = sk.c_in;
  switch (sk.factorization) {
    case Factorization::kSeparable:
    case Factorization::kGseparable: {
      const Tensor& sub = sk.subgroup.value();  // [Co, Ci, Ho, Hi]
      const std::size_t ho = sub.dim(2), hi = sub.dim(3);
      for (std::size_t j = 0; j < co; ++j)
        for (std::size_t i = 0; i < ci; ++i)
          out.push_back(kh_variance(std::span<const double>(sub.data() + (j * ci + i) * ho * hi, hi)));
      break;
    }
    case Factorization::kDGseparable: {
      const Tensor& sub = sk.subgroup.value();  // [Co, Ho, Hi]
      const std::size_t ho = sub.dim(1), hi = sub.dim(2);
      for (std::size_t j = 0; j < co; ++j)
        out.push_back(kh_variance(std::span<const double>(sub.data() + j * ho * hi, hi)));
      break;
    }
    case Factorization::kHSeparable: {
      const Tensor& sc = sk.scale.value();     // [Co, Ci, So, Si]
      const Tensor& rot = sk.rotation.value();  // [Co, Ro, Ri]
      const std::size_t so = sc.dim(2), si = sc.dim(3), ro = rot.dim(1), ri = rot.dim(2);
      std::vector<double> vals(si * ri);
      for (std::size_t j = 0; j < co; ++j) {
        for (std::size_t i = 0; i < ci; ++i) {
          for (std::size_t s = 0; s < si; ++s)
            for (std::size_t r = 0; r < ri; ++r)
              vals[s * ri + r] = sc[((j * ci + i) * so) * si + s] * rot[(j * ro) * ri + r];
          out.push_back(kh_variance(vals));
        }
      }
      break;
    }
    default:
      throw std::invalid_argument("the " + std::string(to_string(sk.factorization)) +
                                  " factorization has no separate k_H factor");
  }
  return out;
}

std::vector<double> histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  std::vector<double> out(bins, 0.0);
  if (values.empty()) return out;
  for (double v : values) {
    const double c = std::clamp(v, 0.0, 1.0);
    const auto b = std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)));
    out[b] += 1.0;
  }
  for (double& v : out) v /= static_cast<double>(values.size());
  return out;
}

GFeatureMap rotate_feature_map(const GFeatureMap& f, double theta) {
  const Tensor& src = f.data.value();
  Tensor shifted = src;
  if (f.grid && has_rotation(f.grid->tag())) {
    const std::size_t nr = f.grid->n_rotations(), ns = f.grid->n_scales();
    const std::size_t b = src.dim(0), c = src.dim(1), plane = src.dim(3) * src.dim(4);
    const double t = theta / (kTwoPi / static_cast<double>(nr));
    const double q = std::floor(t), a = t - q;
    const auto qi = static_cast<long>(q);
    const long n = static_cast<long>(nr);
    for (std::size_t bc = 0; bc < b * c; ++bc) {
      for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t m = 0; m < nr; ++m) {
          const auto m0 = static_cast<std::size_t>(((static_cast<long>(m) - qi) % n + n) % n);
          const auto m1 = static_cast<std::size_t>(((static_cast<long>(m) - qi - 1) % n + n) % n);
          const double* p0 = src.data() + ((bc * ns + s) * nr + m0) * plane;
          const double* p1 = src.data() + ((bc * ns + s) * nr + m1) * plane;
          double* dst = shifted.data() + ((bc * ns + s) * nr + m) * plane;
          for (std::size_t k = 0; k < plane; ++k) dst[k] = (1.0 - a) * p0[k] + a * p1[k];
        }
      }
    }
  }
  GFeatureMap out;
  out.grid = f.grid;
  out.data = DiffTensor(transform_images(
      shifted, [&](std::span<const double> p, std::size_t n) { return rotate_image(p, n, theta); }));
  return out;
}

std::vector<LayerError> layerwise_equivariance(Model& model, const Tensor& images, double theta) {
  NoGradGuard guard;
  ForwardTrace trace;
  model.forward(images, false, nullptr, &trace);
  auto traced = [&](const std::string& name) {
    for (std::size_t i = 0; i < trace.names.size(); ++i)
      if (trace.names[i] == name) return trace.maps[i];
    throw std::logic_error("missing traced layer " + name);
  };
  const SubgroupGrid grid = model.config().base_grid();
  const Padding pad = model.config().padding;
  const auto layers = model.group_conv_layers();

  std::vector<LayerError> out;
  auto measure = [&](const std::string& name, const GFeatureMap& x, auto&& phi) {
    const Tensor y = phi(x).value();
    const Tensor y_rot = rotate_feature_map(GFeatureMap{DiffTensor(y), grid}, theta).data.value();
    const Tensor y_of_rot = phi(rotate_feature_map(x, theta)).value();
    const double denom = disk_norm2(y);
    out.push_back({name, denom > 0.0 ? std::sqrt(disk_norm2(y_of_rot, &y_rot) / denom) : 0.0});
  };
  const SampledKernel lift_kernel = model.lifting_layer().sample(grid, nullptr);
  measure("lift", GFeatureMap{DiffTensor(images), std::nullopt},
          [&](const GFeatureMap& x) { return lift_conv(x.data, lift_kernel, pad).data; });
  GFeatureMap pooled = traced("block1");
  pooled.data = max_pool2d(pooled.data, 2);
  const std::vector<std::pair<std::string, GFeatureMap>> inputs = {
      {"block1.conv1", traced("lift")},
      {"block1.conv2", traced("block1.conv1")},
      {"block2.conv1", pooled},
      {"block2.conv2", traced("block2.conv1")},
  };
  for (std::size_t l = 0; l < inputs.size(); ++l) {
    const SampledKernel sk = layers[l]->sample(grid, &grid);
    measure(inputs[l].first, inputs[l].second,
            [&](const GFeatureMap& x) { return group_conv(x, sk, pad).data; });
  }
  return out;
}

std::vector<SweepPoint> equivariance_sweep(Model& model, const Dataset& data,
                                           const std::string& sweep, std::size_t n_steps) {
  if (n_steps == 0) throw std::invalid_argument("sweep needs at least one step");
  if (sweep != "rotation" && sweep != "scale") {
    throw std::invalid_argument("sweep must be rotation or scale, got " + sweep);
  }
  std::vector<SweepPoint> out;
  for (std::size_t t = 0; t < n_steps; ++t) {
    SweepPoint p;
    Dataset moved = data;
    if (sweep == "rotation") {
      p.param = kTwoPi * static_cast<double>(t) / static_cast<double>(n_steps);
      moved.images = transform_images(data.images, [&](std::span<const double> img, std::size_t n) {
        return rotate_image(img, n, p.param);
      });
    } else {
      p.param = n_steps == 1 ? 1.0
                             : 0.3 + 0.7 * static_cast<double>(t) / static_cast<double>(n_steps - 1);
      moved.images = transform_images(data.images, [&](std::span<const double> img, std::size_t n) {
        return scale_image(img, n, p.param);
      });
    }
    p.test_error = 1.0 - evaluate(model, moved);
    out.push_back(p);
  }
  return out;
}

std::vector<CostReport> benchmark(const std::vector<CostConfig>& configs, std::size_t repeats) {
  if (repeats == 0) throw std::invalid_argument("benchmark needs at least one repeat");
  std::vector<CostReport> out;
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const CostConfig& c : configs) {
    NoGradGuard guard;
    const bool hsep = c.factorization == Factorization::kHSeparable && !c.lifting;
    const std::size_t n_in = c.n_h_in ? c.n_h_in : c.n_h;
    KernelSpec spec;
    spec.group = hsep ? GroupTag::kSim2 : GroupTag::kSE2;
    spec.factorization = c.lifting ? Factorization::kSeparable : c.factorization;
    spec.c_in = c.c_in;
    spec.c_out = c.c_out;
    spec.stencil = c.k;
    spec.lifting = c.lifting;
    auto make_grid = [&](std::size_t n) {
      if (!hsep) return uniform_rotation_grid(n);
      if (c.n_scales == 0 || n % c.n_scales != 0) {
        throw std::invalid_argument("hseparable benchmark needs |H| divisible by n_scales");
      }
      return uniform_grid(GroupTag::kRplusSO2, c.n_scales, n / c.n_scales,
                          c.n_scales > 1 ? std::optional<double>(std::sqrt(3.0)) : std::nullopt);
    };
    const SubgroupGrid out_grid = make_grid(c.n_h), in_grid = make_grid(n_in);
    const GroupKernel kernel(spec, 1);
    const SampledKernel sk = kernel.sample(out_grid, c.lifting ? nullptr : &in_grid);
    Tensor x(c.lifting ? Shape{c.batch, c.c_in, c.height, c.width}
                       : Shape{c.batch, c.c_in, n_in, c.height, c.width});
    for (auto& v : x.storage()) v = u(rng);
    const DiffTensor xd(std::move(x));
    auto run = [&] {
      if (c.lifting) return lift_conv(xd, sk, Padding::kZero);
      return group_conv(GFeatureMap{xd, in_grid}, sk, Padding::kZero);
    };
    CostReport r;
    r.config = c;
    {
      MacCounter counter;
      run();
      r.macs = counter.count();
    }
    std::vector<double> times;
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      run();
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(times.begin(), times.begin() + static_cast<long>(times.size() / 2), times.end());
    r.seconds = times[times.size() / 2];
    out.push_back(r);
  }
  return out;
}

}  // namespace liegconv

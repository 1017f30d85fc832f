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

#include "liegconv/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>

namespace liegconv {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<std::uint8_t> read_all(const std::string& path) {
  std::unique_ptr<gzFile_s, decltype(&gzclose)> file(gzopen(path.c_str(), "rb"), &gzclose);
  if (!file) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  for (;;) {
    const int got = gzread(file.get(), chunk.data(), static_cast<unsigned>(chunk.size()));
    if (got < 0) throw FormatError("corrupt compressed stream in " + path, out.size());
    if (got == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + got);
  }
  return out;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (at + 4 > b.size()) throw FormatError("truncated header", b.size());
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
         (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

double bilinear(std::span<const double> plane, std::size_t n, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const double ax = x - fx, ay = y - fy;
  const auto x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
  const long nn = static_cast<long>(n);
  auto at = [&](long yy, long xx) {
    return (yy < 0 || xx < 0 || yy >= nn || xx >= nn) ? 0.0 : plane[yy * nn + xx];
  };
  return (1.0 - ay) * ((1.0 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
         ay * ((1.0 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
}

template <typename Fn>
Dataset transform_each(const Dataset& src, std::uint64_t seed, const std::string& kind, Fn fn) {
  Dataset out = src;
  const std::size_t n = src.images.dim(2), plane = n * n;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::span<const double> in(src.images.data() + i * plane, plane);
    const std::vector<double> res = fn(in, n, rng);
    std::copy(res.begin(), res.end(), out.images.data() + i * plane);
  }
  out.provenance["transform"] = kind;
  out.provenance["transform_seed"] = std::to_string(seed);
  return out;
}

}  // namespace

FormatError::FormatError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}

IdxArray load_idx(const std::string& path) {
  const std::vector<std::uint8_t> b = read_all(path);
  IdxArray out;
  out.magic = read_be32(b, 0);
  if (b[0] != 0 || b[1] != 0 || b[2] != 0x08) {
    throw FormatError("bad IDX magic in " + path + " (expected unsigned-byte data)", 0);
  }
  const std::size_t rank = b[3];
  if (rank == 0) throw FormatError("IDX file declares no dimensions", 3);
  std::size_t count = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    out.dims.push_back(read_be32(b, 4 + 4 * d));
    count *= out.dims.back();
  }
  const std::size_t start = 4 + 4 * rank;
  if (b.size() < start + count) {
    throw FormatError("truncated IDX payload in " + path + ": need " + std::to_string(count) +
                          " bytes",
                      b.size());
  }
  out.bytes.assign(b.begin() + static_cast<std::ptrdiff_t>(start),
                   b.begin() + static_cast<std::ptrdiff_t>(start + count));
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  const std::size_t plane = images.size() / std::max<std::size_t>(size(), 1);
  Shape shape = images.shape();
  shape[0] = indices.size();
  out.images = Tensor(shape);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) throw std::out_of_range("dataset index out of range");
    std::copy_n(images.data() + i * plane, plane, out.images.data() + k * plane);
    out.labels.push_back(labels[i]);
  }
  out.split = split;
  out.provenance = provenance;
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Dataset out = subset(idx);
  out.provenance["head"] = std::to_string(idx.size());
  return out;
}

Dataset load_mnist(const std::string& images_path, const std::string& labels_path) {
  const IdxArray img = load_idx(images_path);
  if (img.magic != 0x00000803) throw FormatError("expected image magic 0x00000803", 0);
  const IdxArray lab = load_idx(labels_path);
  if (lab.magic != 0x00000801) throw FormatError("expected label magic 0x00000801", 0);
  if (img.dims[0] != lab.dims[0]) {
    throw std::invalid_argument("image and label counts differ: " + std::to_string(img.dims[0]) +
                                " vs " + std::to_string(lab.dims[0]));
  }
  Dataset out;
  out.images = Tensor({img.dims[0], 1, img.dims[1], img.dims[2]});
  for (std::size_t i = 0; i < img.bytes.size(); ++i) out.images[i] = img.bytes[i] / 255.0;
  out.labels.reserve(lab.bytes.size());
  for (std::size_t i = 0; i < lab.bytes.size(); ++i) {
    if (lab.bytes[i] > 9) throw FormatError("label out of range", 8 + i);
    out.labels.push_back(lab.bytes[i]);
  }
  out.split = "all";
  out.provenance["source"] = images_path;
  return out;
}

std::vector<double> rotate_image(std::span<const double> plane, std::size_t n, double theta) {
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  double cs = std::cos(theta), sn = std::sin(theta);
  // Quarter turns land exactly on the pixel lattice.
  if (std::abs(cs) < 1e-15) cs = 0.0;
  if (std::abs(sn) < 1e-15) sn = 0.0;
  std::vector<double> out(n * n);
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t col = 0; col < n; ++col) {
      const double px = static_cast<double>(col) - c, py = static_cast<double>(row) - c;
      out[row * n + col] = bilinear(plane, n, c + cs * px + sn * py, c - sn * px + cs * py);
    }
  }
  return out;
}

std::vector<double> scale_image(std::span<const double> plane, std::size_t n, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("scale factor must be > 0");
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  std::vector<double> out(n * n);
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t col = 0; col < n; ++col) {
      const double px = static_cast<double>(col) - c, py = static_cast<double>(row) - c;
      out[row * n + col] = bilinear(plane, n, c + px / s, c + py / s);
    }
  }
  return out;
}

Dataset make_rotated(const Dataset& src, std::uint64_t seed) {
  Dataset out = transform_each(src, seed, "rotated", [](auto in, std::size_t n, auto& rng) {
    return rotate_image(in, n, std::uniform_real_distribution<double>(0.0, kTwoPi)(rng));
  });
  out.provenance["angle_range"] = "[0, 2pi)";
  return out;
}

Dataset make_scaled(const Dataset& src, std::uint64_t seed) {
  Dataset out = transform_each(src, seed, "scaled", [](auto in, std::size_t n, auto& rng) {
    return scale_image(in, n, std::uniform_real_distribution<double>(0.3, 1.0)(rng));
  });
  out.provenance["scale_range"] = "[0.3, 1]";
  return out;
}

Dataset make_rot_scaled(const Dataset& src, std::uint64_t seed) {
  Dataset out = transform_each(src, seed, "rot_scaled", [](auto in, std::size_t n, auto& rng) {
    const double theta = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng);
    const double s = std::uniform_real_distribution<double>(0.3, 1.0)(rng);
    const std::vector<double> scaled = scale_image(in, n, s);
    return rotate_image(scaled, n, theta);
  });
  out.provenance["angle_range"] = "[0, 2pi)";
  out.provenance["scale_range"] = "[0.3, 1]";
  return out;
}

Splits split_sizes(const Dataset& src, std::size_t n_train, std::size_t n_val,
                   std::size_t n_test, std::uint64_t seed) {
  const std::size_t need = n_train + n_val + n_test;
  if (src.size() < need) {
    throw std::invalid_argument("split needs " + std::to_string(need) + " samples, have " +
                                std::to_string(src.size()));
  }
  std::vector<std::size_t> order(src.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto take = [&](std::size_t from, std::size_t count, const char* name) {
    Dataset d = src.subset(std::span<const std::size_t>(order).subspan(from, count));
    d.split = name;
    d.provenance["split_seed"] = std::to_string(seed);
    d.provenance["split_sizes"] = std::to_string(n_train) + "/" + std::to_string(n_val) + "/" +
                                  std::to_string(n_test);
    return d;
  };
  return {take(0, n_train, "train"), take(n_train, n_val, "val"),
          take(n_train + n_val, n_test, "test")};
}

Splits split_paper(const Dataset& src, std::uint64_t seed) {
  return split_sizes(src, 10000, 2000, 50000, seed);
}

Dataset synth_oriented_bars(std::size_t n, std::uint64_t seed, std::size_t size) {
  Dataset out;
  out.images = Tensor({n, 1, size, size});
  out.split = "synthetic";
  out.provenance["source"] = "oriented_bars";
  out.provenance["seed"] = std::to_string(seed);
  std::vector<int> classes(n);
  for (std::size_t i = 0; i < n; ++i) classes[i] = static_cast<int>(i % 4);
  std::mt19937_64 rng(seed);
  std::shuffle(classes.begin(), classes.end(), rng);
  std::uniform_real_distribution<double> offset(-3.0, 3.0), length(12.0, 20.0), width(0.8, 1.5);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double phi = classes[i] * std::numbers::pi / 8.0;
    const double cx = c + offset(rng), cy = c + offset(rng);
    const double half_len = length(rng) / 2.0, half_w = width(rng);
    const double ux = std::cos(phi), uy = std::sin(phi);
    double* img = out.images.data() + i * size * size;
    for (std::size_t row = 0; row < size; ++row) {
      for (std::size_t col = 0; col < size; ++col) {
        const double dx = static_cast<double>(col) - cx, dy = static_cast<double>(row) - cy;
        const double along = std::abs(dx * ux + dy * uy), across = std::abs(-dx * uy + dy * ux);
        const double a = std::clamp(half_len + 0.5 - along, 0.0, 1.0);
        const double b = std::clamp(half_w + 0.5 - across, 0.0, 1.0);
        img[row * size + col] = a * b;
      }
    }
  }
  out.labels = std::move(classes);
  return out;
}

}  // namespace liegconv

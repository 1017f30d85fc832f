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

// Independent reference implementations used only by tests. Nothing here
// calls into the library's group or convolution code paths.

#ifndef LIEGCONV_TESTS_ORACLES_HPP_
#define LIEGCONV_TESTS_ORACLES_HPP_

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "liegconv/lie.hpp"
#include "liegconv/tensor.hpp"

namespace liegconv::testing {

using Mat3 = std::array<std::array<double, 3>, 3>;

// Homogeneous matrix built from raw coordinates.
inline Mat3 to_matrix(double x, double y, double theta, double s) {
  const double c = s * std::cos(theta), n = s * std::sin(theta);
  return {{{c, -n, x}, {n, c, y}, {0.0, 0.0, 1.0}}};
}

inline Mat3 to_matrix(const GroupElement& g) {
  return to_matrix(g.x()[0], g.x()[1], g.theta(), g.scale());
}

inline Mat3 matmul3(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// General 3x3 inverse by cofactors.
inline Mat3 inverse3(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  Mat3 r{};
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

struct Coords {
  double x, y, theta, s;
};

// Reads (x, y, theta in [0, 2 pi), s) back from a similarity matrix.
inline Coords from_matrix(const Mat3& m) {
  const double s = std::hypot(m[0][0], m[1][0]);
  double theta = std::atan2(m[1][0], m[0][0]);
  if (theta < 0.0) theta += 2.0 * std::numbers::pi;
  return {m[0][2], m[1][2], theta, s};
}

// Distance between two angles on the circle.
inline double angle_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  return std::min(d, 2.0 * std::numbers::pi - d);
}

inline double coord_distance(const GroupElement& g, const Coords& c) {
  return std::max({std::abs(g.x()[0] - c.x), std::abs(g.x()[1] - c.y),
                   angle_distance(g.theta(), c.theta), std::abs(g.scale() - c.s)});
}

inline double coord_distance(const GroupElement& a, const GroupElement& b) {
  return coord_distance(a, Coords{b.x()[0], b.x()[1], b.theta(), b.scale()});
}

inline GroupElement random_element(GroupTag tag, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-5.0, 5.0);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> logs(std::log(0.3), std::log(3.0));
  Vec2 x{0.0, 0.0};
  double theta = 0.0, s = 1.0;
  if (has_translation(tag)) x = {pos(rng), pos(rng)};
  if (has_rotation(tag)) theta = ang(rng);
  if (has_scale(tag)) s = std::exp(logs(rng));
  return GroupElement(tag, x, theta, s);
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

inline double relative_error(const Tensor& got, const Tensor& want) {
  const double scale = std::max(max_abs(want), 1e-300);
  return max_abs_diff(got, want) / scale;
}

// Plain cross-correlation with zero or circular padding, one image, by loops.
// in [C, Y, X], w [O, C, k, k] -> [O, Y, X].
inline std::vector<double> reference_conv(const std::vector<double>& in, std::size_t c_in,
                                          std::size_t ny, std::size_t nx,
                                          const std::vector<double>& w, std::size_t c_out,
                                          std::size_t k, bool circular) {
  const int r = static_cast<int>(k / 2);
  std::vector<double> out(c_out * ny * nx, 0.0);
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        double acc = 0.0;
        for (std::size_t c = 0; c < c_in; ++c)
          for (std::size_t dy = 0; dy < k; ++dy)
            for (std::size_t dx = 0; dx < k; ++dx) {
              int sy = static_cast<int>(y) + static_cast<int>(dy) - r;
              int sx = static_cast<int>(x) + static_cast<int>(dx) - r;
              if (circular) {
                sy = (sy % static_cast<int>(ny) + static_cast<int>(ny)) % static_cast<int>(ny);
                sx = (sx % static_cast<int>(nx) + static_cast<int>(nx)) % static_cast<int>(nx);
              } else if (sy < 0 || sx < 0 || sy >= static_cast<int>(ny) ||
                         sx >= static_cast<int>(nx)) {
                continue;
              }
              acc += w[((o * c_in + c) * k + dy) * k + dx] * in[(c * ny + sy) * nx + sx];
            }
        out[(o * ny + y) * nx + x] = acc;
      }
  return out;
}

// Rotates the last two axes by quarter turns about the image center with the
// column axis as x and the row axis as y: out(p) = in(R(-q pi/2) p).
inline Tensor rotate90(const Tensor& t, int quarter_turns) {
  const std::size_t ny = t.dim(t.rank() - 2), nx = t.dim(t.rank() - 1);
  const std::size_t planes = t.size() / (ny * nx);
  const int q = ((quarter_turns % 4) + 4) % 4;
  Tensor cur = t;
  for (int step = 0; step < q; ++step) {
    Tensor next(cur.shape());
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t row = 0; row < ny; ++row)
        for (std::size_t col = 0; col < nx; ++col)
          next[(p * ny + row) * nx + col] = cur[(p * ny + (nx - 1 - col)) * nx + row];
    cur = std::move(next);
  }
  return cur;
}

// Cyclic shift of axis 2 of a [B, C, H, Y, X] tensor: out[.., m, ..] = in[.., m - s, ..].
inline Tensor shift_group_axis(const Tensor& t, int s) {
  const std::size_t b = t.dim(0), c = t.dim(1), h = t.dim(2), plane = t.dim(3) * t.dim(4);
  Tensor out(t.shape());
  for (std::size_t bc = 0; bc < b * c; ++bc)
    for (std::size_t m = 0; m < h; ++m) {
      const std::size_t src =
          static_cast<std::size_t>(((static_cast<int>(m) - s) % static_cast<int>(h) +
                                    static_cast<int>(h)) % static_cast<int>(h));
      for (std::size_t q = 0; q < plane; ++q)
        out[(bc * h + m) * plane + q] = t[(bc * h + src) * plane + q];
    }
  return out;
}

}  // namespace liegconv::testing

#endif  // LIEGCONV_TESTS_ORACLES_HPP_

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

// Affine Lie groups R^2 x| H acting on the plane, with H one of SO(2), R+ or
// R+ x SO(2). Elements are stored in coordinates (translation, angle, scale);
// the matrix form of a Sim(2) element is
//
//   [ s R(theta)  x ]
//   [     0       1 ]
//
// and every other group is the restriction of that to the relevant
// coordinates. Algebra vectors are laid out as (x, y, theta, log s) with the
// absent coordinates dropped. log/exp act per factor: the translation part of
// log(x, theta) is x itself, and theta is reported in [0, 2 pi).

#ifndef LIEGCONV_LIE_HPP_
#define LIEGCONV_LIE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace liegconv {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// kRplusSO2 is the dilation-rotation subgroup H of Sim(2).
enum class GroupTag { kR2, kSO2, kRplus, kRplusSO2, kSE2, kR2xRplus, kSim2 };

std::string_view to_string(GroupTag tag);
GroupTag parse_group_tag(std::string_view name);

bool has_translation(GroupTag tag);
bool has_rotation(GroupTag tag);
bool has_scale(GroupTag tag);
// Dimension of the Lie algebra.
int algebra_dim(GroupTag tag);
// The subgroup H of R^2 x| H; kR2 for the pure translation group.
GroupTag subgroup_of(GroupTag tag);

using Vec2 = std::array<double, 2>;

// Wraps an angle into [0, 2 pi).
double wrap_angle(double theta);

class GroupElement {
 public:
  static GroupElement identity(GroupTag tag);
  // Coordinates not carried by `tag` must be left at their identity values.
  GroupElement(GroupTag tag, Vec2 x, double theta, double scale);

  static GroupElement translation(Vec2 x) { return {GroupTag::kR2, x, 0.0, 1.0}; }
  static GroupElement rotation(double theta) { return {GroupTag::kSO2, {0, 0}, theta, 1.0}; }
  static GroupElement dilation(double s) { return {GroupTag::kRplus, {0, 0}, 0.0, s}; }

  GroupTag tag() const { return tag_; }
  const Vec2& x() const { return x_; }
  double theta() const { return theta_; }
  double scale() const { return scale_; }

  // Homogeneous 3x3 matrix, row-major.
  std::array<double, 9> matrix() const;

 private:
  GroupTag tag_;
  Vec2 x_;
  double theta_;
  double scale_;
};

struct AlgebraVector {
  GroupTag tag;
  // (x, y, theta, log s) restricted to the coordinates `tag` carries.
  std::vector<double> coords;
};

GroupElement product(const GroupElement& a, const GroupElement& b);
GroupElement inverse(const GroupElement& g);
AlgebraVector log(const GroupElement& g);
GroupElement exp(const AlgebraVector& v);

// Determinant of the 2x2 linear part, i.e. s^2.
double determinant(const GroupElement& h);
// Linear action of the H part on a point of the plane (translations ignored).
Vec2 act_on_point(const GroupElement& h, Vec2 p);

// Ordered finite sampling of a subgroup H. Product grids (R+ x SO(2)) are
// scale-major: element (si, ri) sits at index si * n_rotations + ri.
class SubgroupGrid {
 public:
  SubgroupGrid() = default;

  GroupTag tag() const { return tag_; }
  std::size_t size() const { return elements_.size(); }
  bool empty() const { return elements_.empty(); }
  const std::vector<GroupElement>& elements() const { return elements_; }
  const GroupElement& operator[](std::size_t i) const { return elements_[i]; }
  // Cached algebra coordinates of every element, in order.
  const std::vector<AlgebraVector>& algebra() const { return algebra_; }

  std::size_t n_rotations() const { return n_rotations_; }
  std::size_t n_scales() const { return n_scales_; }
  std::optional<double> truncation() const { return truncation_; }
  // Perturbation applied by random_perturb, if any.
  const std::optional<GroupElement>& perturbation() const { return perturbation_; }

  // Index along the scale / rotation factor for a flat index.
  std::size_t scale_index(std::size_t i) const { return i / n_rotations_; }
  std::size_t rotation_index(std::size_t i) const { return i % n_rotations_; }

  // Builds a grid from explicit elements; used by tests and regridding.
  static SubgroupGrid from_elements(GroupTag tag, std::vector<GroupElement> elements,
                                    std::size_t n_scales, std::size_t n_rotations);

 private:
  friend SubgroupGrid uniform_grid(GroupTag, std::size_t, std::size_t, std::optional<double>);
  friend SubgroupGrid left_multiply(const SubgroupGrid&, const GroupElement&);

  void rebuild_algebra();

  GroupTag tag_ = GroupTag::kSO2;
  std::vector<GroupElement> elements_;
  std::vector<AlgebraVector> algebra_;
  std::size_t n_scales_ = 1;
  std::size_t n_rotations_ = 1;
  std::optional<double> truncation_;
  std::optional<GroupElement> perturbation_;
};

// Equidistant algebra points mapped through exp. SO(2): n_rotations points
// k 2pi / n. R+: n_scales points on [0, log truncation]. R+ x SO(2): the
// Cartesian product. `tag` must be kSO2, kRplus or kRplusSO2; the count for an
// absent factor must be 1. Truncation is required (and > 1) whenever
// n_scales > 1.
SubgroupGrid uniform_grid(GroupTag tag, std::size_t n_scales, std::size_t n_rotations,
                          std::optional<double> truncation);
// Convenience overloads for the single-factor subgroups.
SubgroupGrid uniform_rotation_grid(std::size_t n);
SubgroupGrid uniform_scale_grid(std::size_t n, std::optional<double> truncation);
// The trivial grid {e} for a subgroup.
SubgroupGrid trivial_grid(GroupTag tag);

// Left-multiplies every grid element by h; spacing in algebra coordinates is
// preserved.
SubgroupGrid left_multiply(const SubgroupGrid& grid, const GroupElement& h);

struct PerturbOptions {
  // Non-compact R+ factors are left alone unless this is set (random sampling
  // over dilations is a known-bad default).
  bool allow_noncompact = false;
};

// Draws one h_eps and left-multiplies the whole grid by it. The angle is
// uniform on [0, 2 pi); the R+ factor of a R+ x SO(2) grid stays put unless
// allow_noncompact is set, in which case log s is uniform over one grid step.
// A pure R+ grid without allow_noncompact throws std::invalid_argument.
SubgroupGrid random_perturb(const SubgroupGrid& grid, std::mt19937_64& rng,
                            PerturbOptions options = {});

}  // namespace liegconv

#endif  // LIEGCONV_LIE_HPP_

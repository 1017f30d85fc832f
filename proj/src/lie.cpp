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

#include "liegconv/lie.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace liegconv {

namespace {

void require_same_tag(const GroupElement& a, const GroupElement& b) {
  if (a.tag() != b.tag()) {
    throw std::invalid_argument("group tag mismatch: " + std::string(to_string(a.tag())) +
                                " vs " + std::string(to_string(b.tag())));
  }
}

}  // namespace

std::string_view to_string(GroupTag tag) {
  switch (tag) {
    case GroupTag::kR2: return "R2";
    case GroupTag::kSO2: return "SO2";
    case GroupTag::kRplus: return "Rplus";
    case GroupTag::kRplusSO2: return "RplusSO2";
    case GroupTag::kSE2: return "SE2";
    case GroupTag::kR2xRplus: return "R2xRplus";
    case GroupTag::kSim2: return "Sim2";
  }
  return "?";
}

GroupTag parse_group_tag(std::string_view name) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::ranges::transform(out, out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
  };
  for (GroupTag t : {GroupTag::kR2, GroupTag::kSO2, GroupTag::kRplus, GroupTag::kRplusSO2,
                     GroupTag::kSE2, GroupTag::kR2xRplus, GroupTag::kSim2}) {
    if (lower(to_string(t)) == lower(name)) return t;
  }
  throw std::invalid_argument("unknown group: " + std::string(name));
}

bool has_translation(GroupTag tag) {
  return tag == GroupTag::kR2 || tag == GroupTag::kSE2 || tag == GroupTag::kR2xRplus ||
         tag == GroupTag::kSim2;
}

bool has_rotation(GroupTag tag) {
  return tag == GroupTag::kSO2 || tag == GroupTag::kRplusSO2 || tag == GroupTag::kSE2 ||
         tag == GroupTag::kSim2;
}

bool has_scale(GroupTag tag) {
  return tag == GroupTag::kRplus || tag == GroupTag::kRplusSO2 || tag == GroupTag::kR2xRplus ||
         tag == GroupTag::kSim2;
}

int algebra_dim(GroupTag tag) {
  return (has_translation(tag) ? 2 : 0) + (has_rotation(tag) ? 1 : 0) + (has_scale(tag) ? 1 : 0);
}

GroupTag subgroup_of(GroupTag tag) {
  switch (tag) {
    case GroupTag::kSE2: return GroupTag::kSO2;
    case GroupTag::kR2xRplus: return GroupTag::kRplus;
    case GroupTag::kSim2: return GroupTag::kRplusSO2;
    case GroupTag::kR2: return GroupTag::kR2;
    default: return tag;
  }
}

double wrap_angle(double theta) {
  double r = std::fmod(theta, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // Round-off just below 2 pi (e.g. theta + (2 pi - theta)) is the identity.
  if (r >= kTwoPi - 1e-12) r = 0.0;
  return r;
}

GroupElement GroupElement::identity(GroupTag tag) { return {tag, {0.0, 0.0}, 0.0, 1.0}; }

GroupElement::GroupElement(GroupTag tag, Vec2 x, double theta, double scale)
    : tag_(tag), x_(x), theta_(wrap_angle(theta)), scale_(scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("group element scale must be finite and > 0");
  }
  if (!has_translation(tag) && (x[0] != 0.0 || x[1] != 0.0)) {
    throw std::invalid_argument(std::string(to_string(tag)) + " carries no translation");
  }
  if (!has_rotation(tag) && theta_ != 0.0) {
    throw std::invalid_argument(std::string(to_string(tag)) + " carries no rotation");
  }
  if (!has_scale(tag) && scale != 1.0) {
    throw std::invalid_argument(std::string(to_string(tag)) + " carries no scale");
  }
}

std::array<double, 9> GroupElement::matrix() const {
  const double c = scale_ * std::cos(theta_);
  const double s = scale_ * std::sin(theta_);
  return {c, -s, x_[0], s, c, x_[1], 0.0, 0.0, 1.0};
}

Vec2 act_on_point(const GroupElement& h, Vec2 p) {
  const double c = std::cos(h.theta());
  const double s = std::sin(h.theta());
  return {h.scale() * (c * p[0] - s * p[1]), h.scale() * (s * p[0] + c * p[1])};
}

GroupElement product(const GroupElement& a, const GroupElement& b) {
  require_same_tag(a, b);
  const Vec2 tb = act_on_point(a, b.x());
  return {a.tag(),
          {a.x()[0] + tb[0], a.x()[1] + tb[1]},
          a.theta() + b.theta(),
          a.scale() * b.scale()};
}

GroupElement inverse(const GroupElement& g) {
  const GroupElement linear_inv(g.tag(), {0.0, 0.0}, -g.theta(), 1.0 / g.scale());
  const Vec2 t = act_on_point(linear_inv, g.x());
  return {g.tag(), {-t[0], -t[1]}, -g.theta(), 1.0 / g.scale()};
}

AlgebraVector log(const GroupElement& g) {
  AlgebraVector v{g.tag(), {}};
  v.coords.reserve(4);
  if (has_translation(g.tag())) {
    v.coords.push_back(g.x()[0]);
    v.coords.push_back(g.x()[1]);
  }
  if (has_rotation(g.tag())) v.coords.push_back(g.theta());
  if (has_scale(g.tag())) v.coords.push_back(std::log(g.scale()));
  return v;
}

GroupElement exp(const AlgebraVector& v) {
  if (static_cast<int>(v.coords.size()) != algebra_dim(v.tag)) {
    throw std::invalid_argument("algebra vector has wrong dimension for " +
                                std::string(to_string(v.tag)));
  }
  std::size_t i = 0;
  Vec2 x{0.0, 0.0};
  double theta = 0.0;
  double s = 1.0;
  if (has_translation(v.tag)) {
    x = {v.coords[0], v.coords[1]};
    i = 2;
  }
  if (has_rotation(v.tag)) theta = v.coords[i++];
  if (has_scale(v.tag)) s = std::exp(v.coords[i++]);
  return {v.tag, x, theta, s};
}

double determinant(const GroupElement& h) { return h.scale() * h.scale(); }

SubgroupGrid SubgroupGrid::from_elements(GroupTag tag, std::vector<GroupElement> elements,
                                         std::size_t n_scales, std::size_t n_rotations) {
  if (elements.size() != n_scales * n_rotations || elements.empty()) {
    throw std::invalid_argument("grid size does not match n_scales * n_rotations");
  }
  for (const auto& e : elements) {
    if (e.tag() != tag) throw std::invalid_argument("grid element has the wrong group tag");
  }
  SubgroupGrid g;
  g.tag_ = tag;
  g.elements_ = std::move(elements);
  g.n_scales_ = n_scales;
  g.n_rotations_ = n_rotations;
  g.rebuild_algebra();
  return g;
}

void SubgroupGrid::rebuild_algebra() {
  algebra_.clear();
  algebra_.reserve(elements_.size());
  for (const auto& e : elements_) algebra_.push_back(log(e));
}

SubgroupGrid uniform_grid(GroupTag tag, std::size_t n_scales, std::size_t n_rotations,
                          std::optional<double> truncation) {
  if (tag != GroupTag::kSO2 && tag != GroupTag::kRplus && tag != GroupTag::kRplusSO2) {
    throw std::invalid_argument("uniform_grid needs a subgroup tag, got " +
                                std::string(to_string(tag)));
  }
  if (n_scales < 1 || n_rotations < 1) throw std::invalid_argument("grid size must be >= 1");
  if (!has_rotation(tag) && n_rotations != 1) {
    throw std::invalid_argument("R+ grid cannot carry rotations");
  }
  if (!has_scale(tag) && n_scales != 1) {
    throw std::invalid_argument("SO(2) grid cannot carry scales");
  }
  if (n_scales > 1) {
    if (!truncation || !(*truncation > 1.0) || !std::isfinite(*truncation)) {
      throw std::invalid_argument("R+ grid with n > 1 needs a finite truncation > 1");
    }
  }
  const double log_step =
      n_scales > 1 ? std::log(*truncation) / static_cast<double>(n_scales - 1) : 0.0;
  const double angle_step = kTwoPi / static_cast<double>(n_rotations);

  SubgroupGrid g;
  g.tag_ = tag;
  g.n_scales_ = n_scales;
  g.n_rotations_ = n_rotations;
  g.truncation_ = truncation;
  g.elements_.reserve(n_scales * n_rotations);
  for (std::size_t si = 0; si < n_scales; ++si) {
    for (std::size_t ri = 0; ri < n_rotations; ++ri) {
      AlgebraVector v{tag, {}};
      if (has_rotation(tag)) v.coords.push_back(angle_step * static_cast<double>(ri));
      if (has_scale(tag)) v.coords.push_back(log_step * static_cast<double>(si));
      g.elements_.push_back(exp(v));
    }
  }
  g.rebuild_algebra();
  return g;
}

SubgroupGrid uniform_rotation_grid(std::size_t n) {
  return uniform_grid(GroupTag::kSO2, 1, n, std::nullopt);
}

SubgroupGrid uniform_scale_grid(std::size_t n, std::optional<double> truncation) {
  return uniform_grid(GroupTag::kRplus, n, 1, truncation);
}

SubgroupGrid trivial_grid(GroupTag tag) { return uniform_grid(tag, 1, 1, std::nullopt); }

SubgroupGrid left_multiply(const SubgroupGrid& grid, const GroupElement& h) {
  SubgroupGrid out = grid;
  for (auto& e : out.elements_) e = product(h, e);
  out.rebuild_algebra();
  out.perturbation_ = grid.perturbation_ ? product(h, *grid.perturbation_) : h;
  return out;
}

SubgroupGrid random_perturb(const SubgroupGrid& grid, std::mt19937_64& rng,
                            PerturbOptions options) {
  const GroupTag tag = grid.tag();
  if (tag == GroupTag::kRplus && !options.allow_noncompact) {
    throw std::invalid_argument(
        "random perturbation of the non-compact R+ grid is refused without allow_noncompact");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double theta = 0.0;
  double scale = 1.0;
  if (has_rotation(tag)) theta = kTwoPi * unit(rng);
  if (has_scale(tag) && options.allow_noncompact) {
    double step = 0.0;
    if (grid.n_scales() > 1) {
      step = std::log(*grid.truncation()) / static_cast<double>(grid.n_scales() - 1);
    } else if (grid.truncation()) {
      step = std::log(*grid.truncation());
    }
    scale = std::exp(step * unit(rng));
  }
  return left_multiply(grid, GroupElement(tag, {0.0, 0.0}, theta, scale));
}

}  // namespace liegconv

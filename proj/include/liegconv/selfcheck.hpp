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

// Property checks shared by the `selftest` command and the acceptance runner.
// Each returns the worst observed error next to its tolerance.

#ifndef LIEGCONV_SELFCHECK_HPP_
#define LIEGCONV_SELFCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <string>

#include "liegconv/tensor.hpp"

namespace liegconv {

struct CheckResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string detail;
};

// Associativity, identity, inverse, agreement with homogeneous matrices,
// exp/log roundtrips and determinant multiplicativity on `cases` random
// elements per group. Tolerance 1e-10.
CheckResult check_group_axioms(std::size_t cases, std::uint64_t seed);

// Every factorization (HSeparable included) against group_conv_dense on its
// materialized kernel, `instances` random small problems each. Relative
// tolerance 1e-10.
CheckResult check_factorization_equivalence(std::size_t instances, std::uint64_t seed);

// C4 lifting and group convolution with circular padding commute with the
// four quarter turns to 1e-12 on `inputs` random inputs.
CheckResult check_c4_equivariance(std::size_t inputs, std::uint64_t seed);

// Finite-difference checks (< 1e-4) of every executor with respect to its
// input and sampled factors, of the SIREN parameters through sampling, and
// of the full model loss with respect to its parameters.
CheckResult check_gradients(std::uint64_t seed);

// Quarter turn of the last two axes on the pixel lattice:
// out(row, col) = in(n - 1 - col, row), i.e. a rotation by +pi/2.
Tensor lattice_quarter_turn(const Tensor& t, int turns);
// Cyclic shift of axis 2 of [B, C, H, Y, X]: out[.., m, ..] = in[.., m - s, ..].
Tensor cyclic_group_shift(const Tensor& t, int s);

}  // namespace liegconv

#endif  // LIEGCONV_SELFCHECK_HPP_

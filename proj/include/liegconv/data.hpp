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

// MNIST ingestion and the transformed-digit corpora.

#ifndef LIEGCONV_DATA_HPP_
#define LIEGCONV_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "liegconv/tensor.hpp"

namespace liegconv {

// Malformed container; offset is the byte position where parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct IdxArray {
  std::uint32_t magic = 0;
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> bytes;
};

// Reads an unsigned-byte IDX file, gzip-compressed or plain.
IdxArray load_idx(const std::string& path);

struct Dataset {
  Tensor images;  // [N, 1, 28, 28], values in [0, 1]
  std::vector<int> labels;
  std::string split;
  // Transform record: seed, ranges and source, enough to rebuild the set.
  std::map<std::string, std::string> provenance;

  std::size_t size() const { return labels.size(); }
  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset head(std::size_t n) const;
};

// Images from a magic 0x803 file scaled to [0, 1] plus labels from a 0x801
// file. Counts must agree.
Dataset load_mnist(const std::string& images_path, const std::string& labels_path);

// Bilinear resampling of one n x n plane about its center ((n - 1) / 2);
// samples falling outside the plane read 0.
// out(p) = in(c + R(-theta) (p - c)).
std::vector<double> rotate_image(std::span<const double> plane, std::size_t n, double theta);
// out(p) = in(c + (p - c) / s); s < 1 shrinks and leaves a zero border.
std::vector<double> scale_image(std::span<const double> plane, std::size_t n, double s);

// Per-image transforms with parameters drawn from `seed`: angles uniform on
// [0, 2 pi), scales uniform on [0.3, 1].
Dataset make_rotated(const Dataset& src, std::uint64_t seed);
Dataset make_scaled(const Dataset& src, std::uint64_t seed);
Dataset make_rot_scaled(const Dataset& src, std::uint64_t seed);

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Disjoint shuffled splits of exactly the given sizes.
Splits split_sizes(const Dataset& src, std::size_t n_train, std::size_t n_val,
                   std::size_t n_test, std::uint64_t seed);
// The 10000 / 2000 / 50000 protocol; needs at least 62000 samples.
Splits split_paper(const Dataset& src, std::uint64_t seed);

// Anti-aliased bars at 0, 22.5, 45 and 67.5 degrees; the label is the
// orientation class. Classes are balanced to within one.
Dataset synth_oriented_bars(std::size_t n, std::uint64_t seed, std::size_t size = 28);

}  // namespace liegconv

#endif  // LIEGCONV_DATA_HPP_

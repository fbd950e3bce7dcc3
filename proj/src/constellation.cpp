/*
 * Copyright 2026 The afdm-vb Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

     http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.

*/

#include "afdm/constellation.hpp"

#include <cmath>
#include <limits>

namespace afdm {

namespace {

std::uint32_t gray(std::uint32_t i) { return i ^ (i >> 1); }

}  // namespace

Constellation build_constellation(int k) {
  if (k != 4 && k != 16 && k != 64) {
    throw ConfigError("unsupported constellation size " + std::to_string(k) +
                      " (expected 4, 16 or 64)");
  }
  const int levels = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
  const int half_bits = static_cast<int>(std::lround(std::log2(static_cast<double>(levels))));

  // Mean energy of the odd-integer lattice {±1, ±3, ...}^2 is 2(M^2 - 1)/3.
  const double scale = 1.0 / std::sqrt(2.0 * (levels * levels - 1) / 3.0);

  Constellation c;
  c.bits_per_symbol_ = 2 * half_bits;
  c.points_.reserve(k);
  c.labels_.reserve(k);
  c.index_of_label_.assign(k, 0);
  for (int row = 0; row < levels; ++row) {
    for (int col = 0; col < levels; ++col) {
      const double re = levels - 1 - 2 * col;
      const double im = levels - 1 - 2 * row;
      const std::uint32_t label = (gray(row) << half_bits) | gray(col);
      c.index_of_label_[label] = c.points_.size();
      c.points_.emplace_back(re * scale, im * scale);
      c.labels_.push_back(label);
    }
  }
  return c;
}

std::size_t Constellation::nearest_index(cd z) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const double d = std::norm(z - points_[k]);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

CVec map_bits(std::span<const std::uint8_t> bits, const Constellation& c) {
  const auto bps = static_cast<std::size_t>(c.bits_per_symbol());
  if (bits.size() % bps != 0) {
    throw DimensionError("bit vector length " + std::to_string(bits.size()) +
                         " is not a multiple of " + std::to_string(bps));
  }
  CVec out(static_cast<Eigen::Index>(bits.size() / bps));
  for (Eigen::Index s = 0; s < out.size(); ++s) {
    std::uint32_t label = 0;
    for (std::size_t b = 0; b < bps; ++b) {
      label = (label << 1) | (bits[s * bps + b] & 1u);
    }
    out[s] = c.point(c.index_of_label(label));
  }
  return out;
}

std::vector<std::size_t> nearest_indices(const CVec& symbols, const Constellation& c) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(symbols.size()));
  for (Eigen::Index s = 0; s < symbols.size(); ++s) idx[s] = c.nearest_index(symbols[s]);
  return idx;
}

Bits demap_hard(const CVec& symbols, const Constellation& c) {
  const auto bps = static_cast<std::size_t>(c.bits_per_symbol());
  Bits out;
  out.reserve(static_cast<std::size_t>(symbols.size()) * bps);
  for (Eigen::Index s = 0; s < symbols.size(); ++s) {
    const std::uint32_t label = c.labels()[c.nearest_index(symbols[s])];
    for (std::size_t b = bps; b-- > 0;) out.push_back(static_cast<std::uint8_t>((label >> b) & 1u));
  }
  return out;
}

CVec symbols_from_indices(std::span<const std::size_t> idx, const Constellation& c) {
  CVec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Eigen::Index>(i)] = c.point(idx[i]);
  return out;
}

}  // namespace afdm

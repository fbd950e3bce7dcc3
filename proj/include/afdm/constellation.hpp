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

#pragma once

#include <span>

#include "afdm/types.hpp"

namespace afdm {

/**
 * Square K-ary QAM alphabet on the Gaussian-integer lattice, scaled to unit
 * average energy.
 *
 * Points are stored row-major over the lattice: rows run from the largest
 * imaginary level down, columns from the largest real level down. For QPSK
 * this gives (1+j), (-1+j), (1-j), (-1-j), all divided by sqrt(2).
 *
 * Labels are Gray coded per axis. The high bits carry the imaginary level,
 * the low bits the real level, MSB first.
 */
class Constellation {
 public:
  const std::vector<cd>& points() const { return points_; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }
  std::size_t size() const { return points_.size(); }
  int bits_per_symbol() const { return bits_per_symbol_; }

  const cd& point(std::size_t k) const { return points_[k]; }

  // Index of the nearest point; ties go to the lowest index.
  std::size_t nearest_index(cd z) const;
  cd nearest_point(cd z) const { return points_[nearest_index(z)]; }

  // Point index whose label equals `label`.
  std::size_t index_of_label(std::uint32_t label) const { return index_of_label_[label]; }

 private:
  friend Constellation build_constellation(int k);

  std::vector<cd> points_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::size_t> index_of_label_;
  int bits_per_symbol_ = 0;
};

// K in {4, 16, 64}; anything else is a ConfigError.
Constellation build_constellation(int k);

CVec map_bits(std::span<const std::uint8_t> bits, const Constellation& c);

Bits demap_hard(const CVec& symbols, const Constellation& c);

// Hard-decision point indices, one per symbol.
std::vector<std::size_t> nearest_indices(const CVec& symbols, const Constellation& c);

// Symbol vector built from point indices.
CVec symbols_from_indices(std::span<const std::size_t> idx, const Constellation& c);

}  // namespace afdm

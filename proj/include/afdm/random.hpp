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

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

#include "afdm/types.hpp"

namespace afdm {

/**
 * Seeded generator with platform-independent draws.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the
 * standard. Distributions are implemented here instead of using the
 * <random> distribution classes, whose algorithms vary between standard
 * libraries:
 *   uniform()      top 53 bits of one engine word, scaled to [0, 1)
 *   uniform_int()  rejection sampling on one engine word per attempt
 *   normal()       Box-Muller on two uniforms, second variate cached
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  double uniform();
  // Inclusive range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double normal();
  // Circularly-symmetric complex Gaussian with E|w|^2 = variance.
  cd complex_normal(double variance);

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/**
 * Derives the seed of an independent stream from a master seed and a list
 * of stream indices (e.g. {snr_index, trial}).
 *
 *   h = splitmix64(master)
 *   for each index s: h = splitmix64(h ^ splitmix64(s))
 */
std::uint64_t derive_seed(std::uint64_t master, std::span<const std::uint64_t> streams);

inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> streams) {
  return derive_seed(master, std::span<const std::uint64_t>(streams.begin(), streams.size()));
}

inline Rng split_seed(std::uint64_t master, std::initializer_list<std::uint64_t> streams) {
  return Rng(derive_seed(master, streams));
}

}  // namespace afdm

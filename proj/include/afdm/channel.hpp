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

#include <vector>

#include "afdm/afdm_core.hpp"
#include "afdm/random.hpp"
#include "afdm/types.hpp"

namespace afdm {

struct ChannelPath {
  cd gain;
  int delay = 0;        // integer delay in samples
  double doppler = 0.0; // normalized Doppler, phase exp(j 2 pi doppler n / N)
};

struct ChannelProfile {
  int num_paths = 1;
  int max_delay = 0;
  int max_doppler = 0;
  std::vector<double> power_profile;  // per-path average power, sums to 1

  static ChannelProfile equal_power(int num_paths, int max_delay, int max_doppler);
  void validate() const;
};

struct ChannelRealization {
  std::vector<ChannelPath> paths;

  int max_delay() const;
  void validate() const;
};

struct SparseEntry {
  int index;  // row index in a column view, column index in a row view
  cd value;
};

/**
 * Effective DAFT-domain channel A H A^H.
 *
 * `columns` keeps the entries of each column whose magnitude exceeds
 * threshold * max|column|; `rows` is the transpose of that pattern and is
 * what the message-passing detector walks. `col_norms_sq` is taken from the
 * dense matrix, not from the thresholded columns.
 */
struct EffectiveChannel {
  CMat dense;
  std::vector<std::vector<SparseEntry>> columns;
  std::vector<std::vector<SparseEntry>> rows;
  RVec col_norms_sq;

  int size() const { return static_cast<int>(dense.cols()); }
  std::size_t max_column_nnz() const;
};

inline constexpr double kDefaultSparsityThreshold = 1e-8;

// Rayleigh gains, first path at delay 0, remaining delays distinct in
// [1, max_delay], integer Dopplers uniform in [-max_doppler, max_doppler].
ChannelRealization sample_realization(const ChannelProfile& profile, Rng& rng);

// H = sum_p h_p Gamma_p Delta_p Pi^{l_p}, sized N x N.
CMat build_time_matrix(const ChannelRealization& real, const AfdmParams& params);

EffectiveChannel effective_channel(const CMat& h_time, const DaftOperator& op,
                                   double threshold = kDefaultSparsityThreshold);

// Builds the sparse views for an arbitrary dense effective matrix.
EffectiveChannel effective_channel_from_dense(CMat dense,
                                              double threshold = kDefaultSparsityThreshold);

/**
 * Sample-level channel on the prefixed stream:
 *   r[n] = sum_i h_i exp(j 2 pi nu_i n / N) s[n - l_i] + w[n],  n = 0..N-1
 * where negative indices read the prefix. Returns the N post-prefix samples.
 * Noise samples are drawn in order n = 0..N-1; none are drawn when n0 == 0.
 */
CVec apply_channel_time(const CVec& s_cpp, const ChannelRealization& real,
                        const AfdmParams& params, double n0, Rng& rng);

}  // namespace afdm

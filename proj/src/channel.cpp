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

#include "afdm/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace afdm {

namespace {

cd phase_cycles(double cycles) {
  const double frac = cycles - std::floor(cycles);
  return std::polar(1.0, 2.0 * kPi * frac);
}

}  // namespace

ChannelProfile ChannelProfile::equal_power(int num_paths, int max_delay, int max_doppler) {
  ChannelProfile p;
  p.num_paths = num_paths;
  p.max_delay = max_delay;
  p.max_doppler = max_doppler;
  if (num_paths > 0) p.power_profile.assign(num_paths, 1.0 / num_paths);
  return p;
}

void ChannelProfile::validate() const {
  if (num_paths < 1) throw ConfigError("channel needs at least one path");
  if (max_delay < 0) throw ConfigError("max_delay must be non-negative");
  if (max_doppler < 0) throw ConfigError("max_doppler must be non-negative");
  if (static_cast<int>(power_profile.size()) != num_paths) {
    throw ConfigError("power_profile has " + std::to_string(power_profile.size()) +
                      " entries for " + std::to_string(num_paths) + " paths");
  }
  double sum = 0.0;
  for (double w : power_profile) {
    if (!(w >= 0.0)) throw ConfigError("path powers must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("path powers must sum to 1");
  if (max_delay + 1 < num_paths) {
    throw ConfigError("cannot place " + std::to_string(num_paths) +
                      " distinct delays in [0, " + std::to_string(max_delay) + "]");
  }
}

int ChannelRealization::max_delay() const {
  int d = 0;
  for (const auto& p : paths) d = std::max(d, p.delay);
  return d;
}

void ChannelRealization::validate() const {
  if (paths.empty()) throw ConfigError("channel realization has no paths");
  std::vector<int> delays;
  for (const auto& p : paths) {
    if (p.delay < 0) throw ConfigError("negative path delay");
    delays.push_back(p.delay);
  }
  std::sort(delays.begin(), delays.end());
  if (std::adjacent_find(delays.begin(), delays.end()) != delays.end()) {
    throw ConfigError("path delays must be distinct");
  }
}

std::size_t EffectiveChannel::max_column_nnz() const {
  std::size_t m = 0;
  for (const auto& c : columns) m = std::max(m, c.size());
  return m;
}

ChannelRealization sample_realization(const ChannelProfile& profile, Rng& rng) {
  profile.validate();
  ChannelRealization real;
  real.paths.resize(profile.num_paths);

  // Partial Fisher-Yates over {1..max_delay} for the P-1 non-zero delays.
  std::vector<int> pool(profile.max_delay);
  std::iota(pool.begin(), pool.end(), 1);
  for (int i = 1; i < profile.num_paths; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(i - 1, static_cast<std::int64_t>(pool.size()) - 1));
    std::swap(pool[i - 1], pool[j]);
  }

  for (int i = 0; i < profile.num_paths; ++i) {
    auto& p = real.paths[i];
    p.gain = rng.complex_normal(profile.power_profile[i]);
    p.delay = i == 0 ? 0 : pool[i - 1];
    p.doppler = static_cast<double>(rng.uniform_int(-profile.max_doppler, profile.max_doppler));
  }
  return real;
}

CMat build_time_matrix(const ChannelRealization& real, const AfdmParams& params) {
  params.validate();
  real.validate();
  if (real.max_delay() > params.l_cpp) {
    throw ConfigError("path delay " + std::to_string(real.max_delay()) +
                      " exceeds prefix length " + std::to_string(params.l_cpp));
  }
  const int n = params.n;
  const double nn = n;
  CMat h = CMat::Zero(n, n);
  for (const auto& p : real.paths) {
    for (int row = 0; row < n; ++row) {
      cd g = p.gain * phase_cycles(p.doppler * row / nn);
      if (row < p.delay) g *= cpp_phase(row - p.delay, params);
      const int col = ((row - p.delay) % n + n) % n;
      h(row, col) += g;
    }
  }
  return h;
}

EffectiveChannel effective_channel_from_dense(CMat dense, double threshold) {
  EffectiveChannel eff;
  const int n = static_cast<int>(dense.cols());
  eff.columns.resize(n);
  eff.rows.resize(dense.rows());
  eff.col_norms_sq.resize(n);
  for (int c = 0; c < n; ++c) {
    eff.col_norms_sq[c] = dense.col(c).squaredNorm();
    const double cut = threshold * dense.col(c).cwiseAbs().maxCoeff();
    for (int r = 0; r < dense.rows(); ++r) {
      const cd v = dense(r, c);
      if (std::abs(v) > cut) {
        eff.columns[c].push_back({r, v});
        eff.rows[r].push_back({c, v});
      }
    }
  }
  eff.dense = std::move(dense);
  return eff;
}

EffectiveChannel effective_channel(const CMat& h_time, const DaftOperator& op, double threshold) {
  if (h_time.rows() != op.size() || h_time.cols() != op.size()) {
    throw DimensionError("time-domain channel is " + std::to_string(h_time.rows()) + "x" +
                         std::to_string(h_time.cols()) + ", transform is " +
                         std::to_string(op.size()));
  }
  CMat dense = op.a() * h_time * op.a_h();
  return effective_channel_from_dense(std::move(dense), threshold);
}

CVec apply_channel_time(const CVec& s_cpp, const ChannelRealization& real,
                        const AfdmParams& params, double n0, Rng& rng) {
  params.validate();
  const int n = params.n;
  const int l = params.l_cpp;
  if (s_cpp.size() != n + l) {
    throw DimensionError("prefixed stream has length " + std::to_string(s_cpp.size()) +
                         ", expected " + std::to_string(n + l));
  }
  if (real.max_delay() > l) {
    throw ConfigError("path delay " + std::to_string(real.max_delay()) +
                      " exceeds prefix length " + std::to_string(l));
  }
  CVec r = CVec::Zero(n);
  for (int t = 0; t < n; ++t) {
    cd acc{0.0, 0.0};
    for (const auto& p : real.paths) {
      acc += p.gain * phase_cycles(p.doppler * t / static_cast<double>(n)) * s_cpp[l + t - p.delay];
    }
    r[t] = acc;
  }
  if (n0 > 0.0) {
    for (int t = 0; t < n; ++t) r[t] += rng.complex_normal(n0);
  }
  return r;
}

}  // namespace afdm

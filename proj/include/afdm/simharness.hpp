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
#include <optional>
#include <string>
#include <vector>

#include "afdm/afdm_core.hpp"
#include "afdm/channel.hpp"
#include "afdm/constellation.hpp"
#include "afdm/detectors.hpp"

namespace afdm {

struct DetectorSpec {
  std::string label;  // unique name used in outputs, e.g. "vb-5"
  DetectorKind kind = DetectorKind::kVb;
  DetectorConfig cfg;
};

// Default label: kind, plus the iteration budget for iterative detectors.
std::string default_label(DetectorKind kind, const DetectorConfig& cfg);

struct SimConfig {
  int frame_len = 64;
  int constellation_k = 4;
  bool chirp_auto = true;       // c1 from max Doppler, c2 = 0
  double c1 = 0.0;
  double c2 = 0.0;
  std::optional<int> l_cpp;     // defaults to profile.max_delay
  ChannelProfile profile = ChannelProfile::equal_power(3, 15, 2);
  std::vector<double> snr_db_grid{10.0};
  int num_frames = 100;
  std::vector<DetectorSpec> detectors;
  std::uint64_t master_seed = 1;
  int workers = 1;
  std::optional<double> residual_snr_db;  // run_residuals; defaults to the first grid point
  // Recorded for provenance only; the discrete model uses normalized Doppler.
  double carrier_hz = 4e9;
  double bandwidth_hz = 100e6;

  void validate() const;
  AfdmParams afdm_params() const;
};

struct BerPoint {
  std::string detector;
  double snr_db = 0.0;
  std::uint64_t bits = 0;
  std::uint64_t bit_errors = 0;
  double ber = 0.0;
  std::uint64_t frames = 0;         // frames that produced a decision
  std::uint64_t frame_errors = 0;
  std::uint64_t failed_frames = 0;  // detector raised (e.g. singular ZF)
  double mean_iterations = 0.0;
  double mean_op_count = 0.0;
};

struct BerResult {
  SimConfig config;
  std::vector<BerPoint> points;                      // snr-major, detector-minor
  std::vector<std::vector<std::uint64_t>> trial_seeds;  // [snr index][trial]

  const BerPoint& at(const std::string& detector, double snr_db) const;
};

struct DetectorTally {
  bool failed = false;
  std::uint64_t bit_errors = 0;
  int iterations = 0;
  std::uint64_t op_count = 0;
  std::vector<double> residual_trace;
};

struct TrialOutcome {
  std::uint64_t seed = 0;
  std::uint64_t bits = 0;
  std::vector<DetectorTally> detectors;  // same order as SimConfig::detectors
};

// N0 = Es / 10^(snr/10) with Es = 1.
double noise_variance(double snr_db);

// One frame: bits, modulation, prefix, channel, noise, demodulation, then
// every configured detector on the same (y, H_eff, N0).
TrialOutcome run_trial(const SimConfig& cfg, double snr_db, std::uint64_t seed);

BerResult run_ber(const SimConfig& cfg);

struct ResidualSummary {
  std::string detector;
  std::vector<double> p25, median, p75;  // per iteration index (0 = first iteration)
};

struct ResidualReport {
  SimConfig config;
  double snr_db = 0.0;
  std::vector<std::string> detectors;
  std::vector<std::vector<std::vector<double>>> traces;  // [detector][trial][iteration]
  std::vector<std::uint64_t> trial_seeds;
  std::vector<ResidualSummary> summaries;

  // Median over trials of the first 1-based iteration whose residual is
  // below `threshold` (max_iter + 1 when never reached).
  double median_iterations_to(const std::string& detector, double threshold) const;
};

// Runs the iterative detectors for exactly max_iter iterations each.
ResidualReport run_residuals(const SimConfig& cfg);

// Linear-interpolated percentile, q in [0, 1].
double percentile(std::vector<double> v, double q);

}  // namespace afdm

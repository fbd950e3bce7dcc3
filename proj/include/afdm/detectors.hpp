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

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "afdm/channel.hpp"
#include "afdm/constellation.hpp"
#include "afdm/types.hpp"

namespace afdm {

enum class DetectorKind { kZf, kLmmse, kMap, kMpa, kVb };

std::string to_string(DetectorKind kind);
DetectorKind detector_kind_from_string(const std::string& s);

// How the VB sweep forms the interference-plus-noise variance v_n.
enum class VbInterference {
  // Each row observed by symbol n contributes the variance of the other
  // symbols in that row, weighted by |H(r,n)|^2 / ||H(:,n)||^2.
  kRowLocal,
  // N0 + sum over every other symbol of ||H(:,n')||^2 v_n'.
  kAllSymbols,
};

std::string to_string(VbInterference model);
VbInterference vb_interference_from_string(const std::string& s);

struct DetectorConfig {
  int max_iter = 5;
  double tol = 1e-4;
  double damping = 0.6;  // MPA only; weight on the new message
  // When false the iterative detectors always run max_iter iterations.
  bool early_stop = true;
  // VB: prior variance assigned to every symbol before the first sweep.
  double init_variance = 1.0;
  VbInterference interference = VbInterference::kRowLocal;
  // VB: evaluate the variational objective after each sweep.
  bool track_elbo = false;
  // Test hook: negates the matched-filter output z_n in the VB sweep.
  bool fault_flip_observation = false;

  void validate() const;
};

struct DetectionResult {
  CVec hard_symbols;
  std::vector<std::size_t> hard_indices;
  Bits hard_bits;
  std::optional<RMat> soft_probs;
  std::optional<std::vector<double>> residual_trace;
  int iterations_run = 0;
  std::chrono::duration<double> elapsed{0.0};
  std::uint64_t op_count = 0;
  // Multiply-accumulates spent in each iteration of an iterative detector.
  std::vector<std::uint64_t> iteration_ops;
};

struct VbState {
  RMat probs;   // N x K
  CVec means;
  RVec vars;
  std::vector<double> residual_trace;
  std::vector<double> elbo_trace;
  int iterations_run = 0;
  // y - H x_hat over the sparse columns, maintained incrementally.
  CVec residual;
};

struct VbOutput {
  DetectionResult result;
  VbState state;
};

struct ScalarObservation {
  cd z;
  double sigma_sq = 1.0;
};

inline constexpr double kSigmaFloor = 1e-12;

// Matched-filter reduction of a residual vector onto column n:
// z = H(:,n)^H mu / ||H(:,n)||^2 and sigma^2 = v / ||H(:,n)||^2 (floored).
ScalarObservation scalar_observation(const EffectiveChannel& eff, int n, const CVec& mu, double v);

// Softmax of -|z - a_k|^2 / sigma^2 with the largest exponent subtracted.
std::vector<double> scalar_posterior(const ScalarObservation& obs, const Constellation& c);

// max_{n,k} |curr - prev|.
double residual_vb(const RMat& prev, const RMat& curr);

// Unquantized H^H (H H^H + N0 I)^{-1} y via a Cholesky solve.
CVec lmmse_estimate(const CVec& y, const EffectiveChannel& eff, double n0);

// Unquantized H^{-1} y; throws SingularMatrixError on rank deficiency.
CVec zf_estimate(const CVec& y, const EffectiveChannel& eff);

DetectionResult zf_detect(const CVec& y, const EffectiveChannel& eff, const Constellation& c);
DetectionResult lmmse_detect(const CVec& y, const EffectiveChannel& eff, double n0,
                             const Constellation& c);

inline constexpr double kMapMaxCandidates = 1048576.0;  // 2^20

DetectionResult map_detect(const CVec& y, const EffectiveChannel& eff, double n0,
                           const Constellation& c);

VbOutput vb_detect(const CVec& y, const EffectiveChannel& eff, double n0, const Constellation& c,
                   const DetectorConfig& cfg);

DetectionResult mpa_detect(const CVec& y, const EffectiveChannel& eff, double n0,
                           const Constellation& c, const DetectorConfig& cfg);

// Variational objective: -(||y - H x_hat||^2 + sum_n ||H(:,n)||^2 v_n) / N0
// minus sum_n (sum_k pi log pi + log K).
double vb_objective(const CVec& y, const EffectiveChannel& eff, double n0, const VbState& state);

// Fills hard_indices/hard_symbols/hard_bits from per-symbol point indices.
void set_hard_output(DetectionResult& out, std::vector<std::size_t> idx, const Constellation& c);

// Row-wise argmax, ties to the lowest column.
std::vector<std::size_t> argmax_rows(const RMat& probs);

}  // namespace afdm

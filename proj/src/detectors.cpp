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

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "afdm/detectors.hpp"

namespace afdm {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t cube(int n) { return static_cast<std::uint64_t>(n) * n * n; }

}  // namespace

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::kZf: return "zf";
    case DetectorKind::kLmmse: return "lmmse";
    case DetectorKind::kMap: return "map";
    case DetectorKind::kMpa: return "mpa";
    case DetectorKind::kVb: return "vb";
  }
  return "?";
}

DetectorKind detector_kind_from_string(const std::string& s) {
  if (s == "zf") return DetectorKind::kZf;
  if (s == "lmmse") return DetectorKind::kLmmse;
  if (s == "map") return DetectorKind::kMap;
  if (s == "mpa") return DetectorKind::kMpa;
  if (s == "vb") return DetectorKind::kVb;
  throw ConfigError("unknown detector kind '" + s + "'");
}

std::string to_string(VbInterference model) {
  return model == VbInterference::kRowLocal ? "row_local" : "all_symbols";
}

VbInterference vb_interference_from_string(const std::string& s) {
  if (s == "row_local") return VbInterference::kRowLocal;
  if (s == "all_symbols") return VbInterference::kAllSymbols;
  throw ConfigError("unknown VB interference model '" + s + "'");
}

void DetectorConfig::validate() const {
  if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");
  if (!(init_variance >= 0.0)) throw ConfigError("init_variance must be non-negative");
}

std::vector<std::size_t> argmax_rows(const RMat& probs) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index n = 0; n < probs.rows(); ++n) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < probs.cols(); ++k) {
      if (probs(n, k) > probs(n, best)) best = k;
    }
    idx[n] = static_cast<std::size_t>(best);
  }
  return idx;
}

void set_hard_output(DetectionResult& out, std::vector<std::size_t> idx, const Constellation& c) {
  out.hard_symbols = symbols_from_indices(idx, c);
  out.hard_bits.clear();
  const int bps = c.bits_per_symbol();
  for (std::size_t k : idx) {
    const std::uint32_t label = c.labels()[k];
    for (int b = bps; b-- > 0;) out.hard_bits.push_back(static_cast<std::uint8_t>((label >> b) & 1u));
  }
  out.hard_indices = std::move(idx);
}

double residual_vb(const RMat& prev, const RMat& curr) {
  if (prev.rows() != curr.rows() || prev.cols() != curr.cols()) {
    throw DimensionError("residual_vb: shape mismatch");
  }
  if (prev.size() == 0) return 0.0;
  return (curr - prev).cwiseAbs().maxCoeff();
}

ScalarObservation scalar_observation(const EffectiveChannel& eff, int n, const CVec& mu, double v) {
  const double norm = eff.col_norms_sq[n];
  const cd inner = eff.dense.col(n).dot(mu);  // conjugates the column
  return {inner / norm, std::max(v / norm, kSigmaFloor)};
}

std::vector<double> scalar_posterior(const ScalarObservation& obs, const Constellation& c) {
  const std::size_t k = c.size();
  std::vector<double> p(k);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = -std::norm(obs.z - c.point(i)) / obs.sigma_sq;
    top = std::max(top, p[i]);
  }
  double sum = 0.0;
  for (double& e : p) {
    e = std::exp(e - top);
    sum += e;
  }
  for (double& e : p) e /= sum;
  return p;
}

CVec lmmse_estimate(const CVec& y, const EffectiveChannel& eff, double n0) {
  if (!(n0 > 0.0)) throw ConfigError("noise variance must be positive");
  const CMat& h = eff.dense;
  if (y.size() != h.rows()) throw DimensionError("lmmse: observation length mismatch");
  CMat gram = h * h.adjoint();
  gram.diagonal().array() += n0;
  Eigen::LLT<CMat> llt(gram);
  return h.adjoint() * llt.solve(y);
}

CVec zf_estimate(const CVec& y, const EffectiveChannel& eff) {
  const CMat& h = eff.dense;
  if (y.size() != h.rows()) throw DimensionError("zf: observation length mismatch");
  Eigen::FullPivLU<CMat> lu(h);
  if (!lu.isInvertible()) {
    throw SingularMatrixError("effective channel is rank deficient (rank " +
                              std::to_string(lu.rank()) + " of " + std::to_string(h.cols()) + ")");
  }
  return lu.solve(y);
}

DetectionResult zf_detect(const CVec& y, const EffectiveChannel& eff, const Constellation& c) {
  const auto t0 = Clock::now();
  DetectionResult out;
  set_hard_output(out, nearest_indices(zf_estimate(y, eff), c), c);
  const int n = eff.size();
  out.op_count = 2 * cube(n) / 3 + 2ULL * n * n;  // LU plus two triangular solves
  out.elapsed = Clock::now() - t0;
  return out;
}

DetectionResult lmmse_detect(const CVec& y, const EffectiveChannel& eff, double n0,
                             const Constellation& c) {
  const auto t0 = Clock::now();
  DetectionResult out;
  set_hard_output(out, nearest_indices(lmmse_estimate(y, eff, n0), c), c);
  const int n = eff.size();
  out.op_count = cube(n) + cube(n) / 3 + 3ULL * n * n;  // Gram, Cholesky, solves, H^H
  out.elapsed = Clock::now() - t0;
  return out;
}

DetectionResult map_detect(const CVec& y, const EffectiveChannel& eff, double n0,
                           const Constellation& c) {
  if (!(n0 > 0.0)) throw ConfigError("noise variance must be positive");
  const int n = eff.size();
  const std::size_t k = c.size();
  if (y.size() != n) throw DimensionError("map: observation length mismatch");
  if (std::pow(static_cast<double>(k), n) > kMapMaxCandidates) {
    throw ConfigError("MAP search over " + std::to_string(k) + "^" + std::to_string(n) +
                      " candidates exceeds the 2^20 limit");
  }
  const auto t0 = Clock::now();
  const CMat& h = eff.dense;

  // Odometer over index vectors, symbol 0 most significant, so the first
  // strict minimum found is the lexicographically smallest one.
  std::vector<std::size_t> idx(n, 0);
  CVec x(n);
  for (int i = 0; i < n; ++i) x[i] = c.point(0);
  CVec resid = y - h * x;
  std::vector<std::size_t> best = idx;
  double best_metric = resid.squaredNorm();
  std::uint64_t ops = static_cast<std::uint64_t>(n) * n;
  for (;;) {
    int pos = n - 1;
    while (pos >= 0 && idx[pos] + 1 == k) --pos;
    if (pos < 0) break;
    for (int i = pos; i < n; ++i) {
      const std::size_t next = i == pos ? idx[i] + 1 : 0;
      const cd delta = c.point(next) - x[i];
      if (delta != cd{0.0, 0.0}) {
        resid -= h.col(i) * delta;
        ops += n;
      }
      idx[i] = next;
      x[i] = c.point(next);
    }
    const double metric = resid.squaredNorm();
    ops += n;
    if (metric < best_metric) {
      best_metric = metric;
      best = idx;
    }
  }

  DetectionResult out;
  set_hard_output(out, std::move(best), c);
  out.op_count = ops;
  out.elapsed = Clock::now() - t0;
  return out;
}

double vb_objective(const CVec& y, const EffectiveChannel& eff, double n0, const VbState& state) {
  const CVec r = y - eff.dense * state.means;
  double spread = 0.0;
  for (int n = 0; n < eff.size(); ++n) spread += eff.col_norms_sq[n] * state.vars[n];
  const double k = static_cast<double>(state.probs.cols());
  double neg_entropy = 0.0;
  for (Eigen::Index n = 0; n < state.probs.rows(); ++n) {
    for (Eigen::Index j = 0; j < state.probs.cols(); ++j) {
      const double p = state.probs(n, j);
      if (p > 0.0) neg_entropy += p * std::log(p);
    }
    neg_entropy += std::log(k);
  }
  return -(r.squaredNorm() + spread) / n0 - neg_entropy;
}

}  // namespace afdm

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

#include "afdm/detectors.hpp"

namespace afdm {

/**
 * Coordinate-ascent VB detection over y = H x + w.
 *
 * Initialization: uniform probabilities, LMMSE means, variances set to
 * cfg.init_variance. Each sweep visits symbols in ascending order and uses
 * the freshest estimates of the others:
 *   mu_n  = y - sum_{n' != n} H(:,n') x_n'
 *   z_n   = H(:,n)^H mu_n / ||H(:,n)||^2,  sigma_n^2 = v_n / ||H(:,n)||^2
 *   pi_n  = softmax(-|z_n - a_k|^2 / sigma_n^2)
 *   x_n   = sum_k pi_n^k a_k,  v_n = sum_k pi_n^k |a_k - x_n|^2
 * The full residual r = y - H x is kept up to date over the sparse columns,
 * so mu_n = r + H(:,n) x_n costs one pass over the column support.
 */
VbOutput vb_detect(const CVec& y, const EffectiveChannel& eff, double n0, const Constellation& c,
                   const DetectorConfig& cfg) {
  cfg.validate();
  if (!(n0 > 0.0)) throw ConfigError("noise variance must be positive");
  const int n_sym = eff.size();
  if (y.size() != eff.dense.rows()) throw DimensionError("vb: observation length mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t k_pts = c.size();
  const auto& pts = c.points();

  VbOutput out;
  VbState& st = out.state;
  st.probs = RMat::Constant(n_sym, static_cast<Eigen::Index>(k_pts), 1.0 / k_pts);
  st.means = lmmse_estimate(y, eff, n0);
  st.vars = RVec::Constant(n_sym, cfg.init_variance);

  st.residual = y;
  for (int n = 0; n < n_sym; ++n) {
    for (const auto& e : eff.columns[n]) st.residual[e.index] -= e.value * st.means[n];
  }

  // Per-row sum of |H(r,n')|^2 v_n' and the column-weighted total.
  RVec row_var = RVec::Zero(eff.dense.rows());
  double total_var = 0.0;
  for (int n = 0; n < n_sym; ++n) {
    for (const auto& e : eff.columns[n]) row_var[e.index] += std::norm(e.value) * st.vars[n];
    total_var += eff.col_norms_sq[n] * st.vars[n];
  }

  std::vector<double> post(k_pts);
  RMat prev;
  // LMMSE initialization, same nominal count as lmmse_detect.
  const auto nn = static_cast<std::uint64_t>(n_sym);
  std::uint64_t total_ops = nn * nn * nn + nn * nn * nn / 3 + 3 * nn * nn;
  for (int t = 1; t <= cfg.max_iter; ++t) {
    prev = st.probs;
    std::uint64_t ops = 0;
    for (int n = 0; n < n_sym; ++n) {
      const auto& col = eff.columns[n];
      const double norm = eff.col_norms_sq[n];
      const cd x_old = st.means[n];
      const double v_old = st.vars[n];
      if (!(norm > 0.0)) continue;  // symbol unobserved; keep the prior

      cd inner{0.0, 0.0};
      for (const auto& e : col) inner += std::conj(e.value) * (st.residual[e.index] + e.value * x_old);
      ops += col.size();

      double v = n0;
      if (cfg.interference == VbInterference::kRowLocal) {
        double acc = 0.0;
        for (const auto& e : col) {
          const double w = std::norm(e.value);
          acc += w * (row_var[e.index] - w * v_old);
        }
        v += std::max(acc, 0.0) / norm;
        ops += col.size();
      } else {
        v += std::max(total_var - norm * v_old, 0.0);
        ops += 1;
      }

      ScalarObservation obs{inner / norm, std::max(v / norm, kSigmaFloor)};
      if (cfg.fault_flip_observation) obs.z = -obs.z;

      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < k_pts; ++k) {
        post[k] = -std::norm(obs.z - pts[k]) / obs.sigma_sq;
        top = std::max(top, post[k]);
      }
      double sum = 0.0;
      for (double& p : post) {
        p = std::exp(p - top);
        sum += p;
      }
      cd mean{0.0, 0.0};
      for (std::size_t k = 0; k < k_pts; ++k) {
        post[k] /= sum;
        st.probs(n, static_cast<Eigen::Index>(k)) = post[k];
        mean += post[k] * pts[k];
      }
      double var = 0.0;
      for (std::size_t k = 0; k < k_pts; ++k) var += post[k] * std::norm(pts[k] - mean);
      ops += 3 * k_pts;

      const cd delta = mean - x_old;
      for (const auto& e : col) {
        st.residual[e.index] -= e.value * delta;
        row_var[e.index] += std::norm(e.value) * (var - v_old);
      }
      ops += 2 * col.size();
      total_var += norm * (var - v_old);
      st.means[n] = mean;
      st.vars[n] = var;
    }

    const double res = residual_vb(prev, st.probs);
    st.residual_trace.push_back(res);
    if (cfg.track_elbo) st.elbo_trace.push_back(vb_objective(y, eff, n0, st));
    st.iterations_run = t;
    out.result.iteration_ops.push_back(ops);
    total_ops += ops;
    if (cfg.early_stop && res < cfg.tol) break;
  }

  DetectionResult& res = out.result;
  set_hard_output(res, argmax_rows(st.probs), c);
  res.soft_probs = st.probs;
  res.residual_trace = st.residual_trace;
  res.iterations_run = st.iterations_run;
  res.op_count = total_ops;
  res.elapsed = std::chrono::steady_clock::now() - t0;
  return out;
}

}  // namespace afdm

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

namespace {

struct Edge {
  int row;
  int col;
  cd h;
};

// In-place softmax of a row of log-weights.
template <typename Row>
void normalize_log(Row&& logw) {
  const double top = logw.maxCoeff();
  logw = (logw.array() - top).exp().matrix();
  logw /= logw.sum();
}

}  // namespace

/**
 * Gaussian-approximation message passing on the factor graph of the sparse
 * effective channel (flooding schedule).
 *
 * Observation node r -> symbol c: the interference from the other symbols
 * in row r is modelled as Gaussian with mean sum h x_mean and variance
 * N0 + sum |h|^2 x_var, both taken from the incoming symbol messages.
 * Symbol c -> observation r: product of the likelihoods from every other
 * row of column c, damped against the previous message.
 */
DetectionResult mpa_detect(const CVec& y, const EffectiveChannel& eff, double n0,
                           const Constellation& c, const DetectorConfig& cfg) {
  cfg.validate();
  if (!(n0 > 0.0)) throw ConfigError("noise variance must be positive");
  const int n_sym = eff.size();
  if (y.size() != eff.dense.rows()) throw DimensionError("mpa: observation length mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const auto k_pts = static_cast<Eigen::Index>(c.size());
  const auto& pts = c.points();

  std::vector<Edge> edges;
  std::vector<std::vector<int>> col_edges(n_sym);
  std::vector<std::vector<int>> row_edges(eff.dense.rows());
  for (int col = 0; col < n_sym; ++col) {
    for (const auto& e : eff.columns[col]) {
      const int id = static_cast<int>(edges.size());
      edges.push_back({e.index, col, e.value});
      col_edges[col].push_back(id);
      row_edges[e.index].push_back(id);
    }
  }
  const auto n_edges = static_cast<Eigen::Index>(edges.size());

  RMat msg = RMat::Constant(n_edges, k_pts, 1.0 / static_cast<double>(k_pts));
  RMat loglik(n_edges, k_pts);
  RMat marg = RMat::Constant(n_sym, k_pts, 1.0 / static_cast<double>(k_pts));
  std::vector<cd> x_mean(edges.size());
  std::vector<double> x_var(edges.size());
  std::vector<cd> int_mean(edges.size());
  std::vector<double> int_var(edges.size());
  Eigen::RowVectorXd acc(k_pts);

  DetectionResult out;
  std::vector<double> trace;
  std::uint64_t total_ops = 0;
  int iters = 0;
  for (int t = 1; t <= cfg.max_iter; ++t) {
    std::uint64_t ops = 0;

    for (Eigen::Index e = 0; e < n_edges; ++e) {
      cd m{0.0, 0.0};
      double s = 0.0;
      for (Eigen::Index k = 0; k < k_pts; ++k) {
        m += msg(e, k) * pts[k];
        s += msg(e, k) * std::norm(pts[k]);
      }
      x_mean[e] = m;
      x_var[e] = std::max(s - std::norm(m), 0.0);
      ops += 2 * static_cast<std::uint64_t>(k_pts);
    }

    for (const auto& re : row_edges) {
      for (int e : re) {
        cd m{0.0, 0.0};
        double v = n0;
        for (int o : re) {
          if (o == e) continue;
          m += edges[o].h * x_mean[o];
          v += std::norm(edges[o].h) * x_var[o];
          ops += 2;
        }
        int_mean[e] = m;
        int_var[e] = std::max(v, kSigmaFloor);
      }
    }

    for (Eigen::Index e = 0; e < n_edges; ++e) {
      const Edge& ed = edges[e];
      const cd target = y[ed.row] - int_mean[e];
      for (Eigen::Index k = 0; k < k_pts; ++k) {
        loglik(e, k) = -std::norm(target - ed.h * pts[k]) / int_var[e];
      }
      ops += static_cast<std::uint64_t>(k_pts);
    }

    RMat prev_marg = marg;
    for (int col = 0; col < n_sym; ++col) {
      const auto& ce = col_edges[col];
      acc.setZero();
      for (int e : ce) acc += loglik.row(e);
      ops += ce.size() * static_cast<std::uint64_t>(k_pts);
      if (!ce.empty()) {
        normalize_log(acc);
        marg.row(col) = acc;
      }
      for (int e : ce) {
        acc.setZero();
        for (int o : ce) {
          if (o == e) continue;
          acc += loglik.row(o);
          ops += static_cast<std::uint64_t>(k_pts);
        }
        normalize_log(acc);
        msg.row(e) = cfg.damping * acc + (1.0 - cfg.damping) * msg.row(e);
        ops += static_cast<std::uint64_t>(k_pts);
      }
    }

    const double res = residual_vb(prev_marg, marg);
    trace.push_back(res);
    out.iteration_ops.push_back(ops);
    total_ops += ops;
    iters = t;
    if (cfg.early_stop && res < cfg.tol) break;
  }

  set_hard_output(out, argmax_rows(marg), c);
  out.soft_probs = std::move(marg);
  out.residual_trace = std::move(trace);
  out.iterations_run = iters;
  out.op_count = total_ops;
  out.elapsed = std::chrono::steady_clock::now() - t0;
  return out;
}

}  // namespace afdm

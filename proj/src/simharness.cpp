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

#include "afdm/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <thread>

namespace afdm {

namespace {

struct TrialContext {
  const SimConfig& cfg;
  AfdmParams params;
  DaftOperator op;
  Constellation constellation;

  explicit TrialContext(const SimConfig& c)
      : cfg(c), params(c.afdm_params()), op(params), constellation(build_constellation(c.constellation_k)) {}
};

DetectionResult run_detector(const DetectorSpec& spec, const CVec& y, const EffectiveChannel& eff,
                             double n0, const Constellation& c) {
  switch (spec.kind) {
    case DetectorKind::kZf: return zf_detect(y, eff, c);
    case DetectorKind::kLmmse: return lmmse_detect(y, eff, n0, c);
    case DetectorKind::kMap: return map_detect(y, eff, n0, c);
    case DetectorKind::kMpa: return mpa_detect(y, eff, n0, c, spec.cfg);
    case DetectorKind::kVb: return vb_detect(y, eff, n0, c, spec.cfg).result;
  }
  throw ConfigError("unknown detector");
}

TrialOutcome run_trial_ctx(const TrialContext& ctx, const std::vector<DetectorSpec>& detectors,
                           double snr_db, std::uint64_t seed) {
  const SimConfig& cfg = ctx.cfg;
  Rng rng(seed);
  const std::size_t n_bits = static_cast<std::size_t>(cfg.frame_len) * ctx.constellation.bits_per_symbol();
  Bits bits(n_bits);
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next_u64() >> 63);

  const CVec x = map_bits(bits, ctx.constellation);
  const CVec s_cpp = append_cpp(modulate(x, ctx.op), ctx.params);
  const ChannelRealization real = sample_realization(cfg.profile, rng);
  const double n0 = noise_variance(snr_db);
  const CVec r = apply_channel_time(s_cpp, real, ctx.params, n0, rng);
  const CVec y = demodulate(r, ctx.op);
  const EffectiveChannel eff = effective_channel(build_time_matrix(real, ctx.params), ctx.op);

  TrialOutcome out;
  out.seed = seed;
  out.bits = n_bits;
  out.detectors.resize(detectors.size());
  for (std::size_t d = 0; d < detectors.size(); ++d) {
    DetectorTally& tally = out.detectors[d];
    try {
      const DetectionResult det = run_detector(detectors[d], y, eff, n0, ctx.constellation);
      for (std::size_t i = 0; i < n_bits; ++i) tally.bit_errors += det.hard_bits[i] != bits[i];
      tally.iterations = det.iterations_run;
      tally.op_count = det.op_count;
      if (det.residual_trace) tally.residual_trace = *det.residual_trace;
    } catch (const SingularMatrixError&) {
      tally.failed = true;
    }
  }
  return out;
}

// Runs jobs [0, count) on up to `workers` threads; job i writes only slot i.
template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
  const int nthreads = std::max(1, std::min(workers, count));
  if (nthreads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(nthreads);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int w = 0; w < nthreads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < count; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::string default_label(DetectorKind kind, const DetectorConfig& cfg) {
  if (kind == DetectorKind::kMpa || kind == DetectorKind::kVb) {
    return to_string(kind) + "-" + std::to_string(cfg.max_iter);
  }
  return to_string(kind);
}

void SimConfig::validate() const {
  if (frame_len < 2) throw ConfigError("frame_len must be at least 2");
  build_constellation(constellation_k);
  profile.validate();
  if (snr_db_grid.empty()) throw ConfigError("snr_db_grid must not be empty");
  for (double s : snr_db_grid) {
    if (!std::isfinite(s)) throw ConfigError("snr_db_grid entries must be finite");
  }
  if (num_frames < 1) throw ConfigError("num_frames must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (detectors.empty()) throw ConfigError("at least one detector is required");
  std::set<std::string> labels;
  for (const auto& d : detectors) {
    d.cfg.validate();
    if (d.label.empty()) throw ConfigError("detector label must not be empty");
    if (!labels.insert(d.label).second) throw ConfigError("duplicate detector label '" + d.label + "'");
  }
  const AfdmParams p = afdm_params();
  p.validate();
  if (p.l_cpp > p.n) throw ConfigError("l_cpp exceeds frame_len");
  if (p.l_cpp < profile.max_delay) {
    throw ConfigError("l_cpp " + std::to_string(p.l_cpp) + " is shorter than max_delay " +
                      std::to_string(profile.max_delay));
  }
}

AfdmParams SimConfig::afdm_params() const {
  AfdmParams p;
  p.n = frame_len;
  p.c1 = chirp_auto ? default_c1(frame_len, profile.max_doppler) : c1;
  p.c2 = chirp_auto ? 0.0 : c2;
  p.l_cpp = l_cpp.value_or(profile.max_delay);
  return p;
}

double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

TrialOutcome run_trial(const SimConfig& cfg, double snr_db, std::uint64_t seed) {
  cfg.validate();
  const TrialContext ctx(cfg);
  return run_trial_ctx(ctx, cfg.detectors, snr_db, seed);
}

const BerPoint& BerResult::at(const std::string& detector, double snr_db) const {
  for (const auto& p : points) {
    if (p.detector == detector && p.snr_db == snr_db) return p;
  }
  throw ConfigError("no BER point for " + detector + " at " + std::to_string(snr_db) + " dB");
}

BerResult run_ber(const SimConfig& cfg) {
  cfg.validate();
  const TrialContext ctx(cfg);
  BerResult result;
  result.config = cfg;
  const int n_frames = cfg.num_frames;
  for (std::size_t si = 0; si < cfg.snr_db_grid.size(); ++si) {
    const double snr = cfg.snr_db_grid[si];
    std::vector<std::uint64_t> seeds(n_frames);
    for (int t = 0; t < n_frames; ++t) seeds[t] = derive_seed(cfg.master_seed, {si, static_cast<std::uint64_t>(t)});

    std::vector<TrialOutcome> outcomes(n_frames);
    parallel_for(n_frames, cfg.workers, [&](int t) {
      outcomes[t] = run_trial_ctx(ctx, cfg.detectors, snr, seeds[t]);
    });

    // Reduce in trial order so the result does not depend on scheduling.
    for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
      BerPoint pt;
      pt.detector = cfg.detectors[d].label;
      pt.snr_db = snr;
      double iter_sum = 0.0;
      double ops_sum = 0.0;
      for (const auto& o : outcomes) {
        const DetectorTally& t = o.detectors[d];
        if (t.failed) {
          ++pt.failed_frames;
          continue;
        }
        ++pt.frames;
        pt.bits += o.bits;
        pt.bit_errors += t.bit_errors;
        pt.frame_errors += t.bit_errors > 0;
        iter_sum += t.iterations;
        ops_sum += static_cast<double>(t.op_count);
      }
      if (pt.frames > 0) {
        pt.ber = static_cast<double>(pt.bit_errors) / static_cast<double>(pt.bits);
        pt.mean_iterations = iter_sum / static_cast<double>(pt.frames);
        pt.mean_op_count = ops_sum / static_cast<double>(pt.frames);
      }
      result.points.push_back(pt);
    }
    result.trial_seeds.push_back(std::move(seeds));
  }
  return result;
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

double ResidualReport::median_iterations_to(const std::string& detector, double threshold) const {
  const auto it = std::find(detectors.begin(), detectors.end(), detector);
  if (it == detectors.end()) throw ConfigError("no residual traces for " + detector);
  const auto& runs = traces[static_cast<std::size_t>(it - detectors.begin())];
  std::vector<double> hits;
  for (const auto& tr : runs) {
    std::size_t t = 0;
    while (t < tr.size() && !(tr[t] < threshold)) ++t;
    hits.push_back(static_cast<double>(t + 1));
  }
  return percentile(std::move(hits), 0.5);
}

ResidualReport run_residuals(const SimConfig& cfg) {
  cfg.validate();
  std::vector<DetectorSpec> iterative;
  for (const auto& d : cfg.detectors) {
    if (d.kind == DetectorKind::kMpa || d.kind == DetectorKind::kVb) {
      DetectorSpec s = d;
      s.cfg.early_stop = false;
      iterative.push_back(s);
    }
  }
  if (iterative.empty()) throw ConfigError("residual run needs at least one iterative detector (mpa or vb)");

  const TrialContext ctx(cfg);
  ResidualReport rep;
  rep.config = cfg;
  rep.snr_db = cfg.residual_snr_db.value_or(cfg.snr_db_grid.front());
  const int n_frames = cfg.num_frames;
  rep.trial_seeds.resize(n_frames);
  for (int t = 0; t < n_frames; ++t) rep.trial_seeds[t] = derive_seed(cfg.master_seed, {0, static_cast<std::uint64_t>(t)});

  std::vector<TrialOutcome> outcomes(n_frames);
  parallel_for(n_frames, cfg.workers, [&](int t) {
    outcomes[t] = run_trial_ctx(ctx, iterative, rep.snr_db, rep.trial_seeds[t]);
  });

  for (std::size_t d = 0; d < iterative.size(); ++d) {
    rep.detectors.push_back(iterative[d].label);
    std::vector<std::vector<double>> runs;
    runs.reserve(n_frames);
    for (const auto& o : outcomes) runs.push_back(o.detectors[d].residual_trace);

    ResidualSummary sum;
    sum.detector = iterative[d].label;
    const int iters = iterative[d].cfg.max_iter;
    for (int i = 0; i < iters; ++i) {
      std::vector<double> col;
      for (const auto& r : runs) {
        if (static_cast<int>(r.size()) > i) col.push_back(r[i]);
      }
      sum.p25.push_back(percentile(col, 0.25));
      sum.median.push_back(percentile(col, 0.5));
      sum.p75.push_back(percentile(std::move(col), 0.75));
    }
    rep.traces.push_back(std::move(runs));
    rep.summaries.push_back(std::move(sum));
  }
  return rep;
}

}  // namespace afdm

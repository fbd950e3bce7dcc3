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

#include "afdm/selftest.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <sstream>

#include "json.hpp"

#include "afdm/afdm_core.hpp"
#include "afdm/channel.hpp"
#include "afdm/commands.hpp"
#include "afdm/detectors.hpp"
#include "afdm/random.hpp"
#include "afdm/simharness.hpp"

namespace afdm::cli {

namespace {

CVec random_symbols(int n, const Constellation& c, Rng& rng) {
  CVec x(n);
  for (int i = 0; i < n; ++i) x[i] = c.point(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(c.size()) - 1)));
  return x;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

CheckResult check_unitarity(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {1}));
  double worst = 0.0;
  std::string where;
  for (int n : {8, 64, 256}) {
    for (int rep = 0; rep < 3; ++rep) {
      AfdmParams p{n, rng.uniform(), rng.uniform(), 0};
      const DaftOperator op(p);
      const double err = (op.a_h() * op.a() - CMat::Identity(n, n)).cwiseAbs().maxCoeff();
      if (err > worst) {
        worst = err;
        where = "N=" + std::to_string(n) + " c1=" + fmt("%.6f", p.c1) + " c2=" + fmt("%.6f", p.c2);
      }
    }
  }
  return {"daft_unitarity", worst < 1e-10, "max|A^H A - I| = " + fmt("%.3e", worst) + " at " + where};
}

CheckResult check_round_trip(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {2}));
  const Constellation qpsk = build_constellation(4);
  double worst = 0.0;
  double fast = 0.0;
  for (int n : {16, 64, 256}) {
    AfdmParams p{n, rng.uniform(), rng.uniform(), 0};
    const DaftOperator op(p);
    const CVec x = random_symbols(n, qpsk, rng);
    worst = std::max(worst, (demodulate(modulate(x, op), op) - x).norm() / x.norm());
    fast = std::max(fast, (modulate_fast(x, p) - modulate(x, op)).norm() / x.norm());
  }
  return {"modulation_round_trip", worst < 1e-9 && fast < 1e-9,
          "relative error " + fmt("%.3e", worst) + ", fast path deviation " + fmt("%.3e", fast)};
}

CheckResult check_cpp_degeneration() {
  double worst = 0.0;
  for (int n : {8, 64, 256}) {
    for (int m = 0; m <= 8; ++m) {
      AfdmParams p{n, m / (2.0 * n), 0.0, n / 4};
      for (int i = -p.l_cpp; i < 0; ++i) worst = std::max(worst, std::abs(cpp_phase(i, p) - cd{1.0, 0.0}));
    }
  }
  return {"cpp_cyclic_degeneration", worst < 1e-12, "max|phase - 1| = " + fmt("%.3e", worst)};
}

CheckResult check_channel_equivalence(std::uint64_t seed) {
  const Constellation qpsk = build_constellation(4);
  double worst = 0.0;
  std::uint64_t worst_seed = 0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const std::uint64_t s = derive_seed(seed, {3, t});
    Rng rng(s);
    const int n = 8 << (t % 3);
    const int paths = 1 + 2 * static_cast<int>(t % 3);
    const ChannelProfile prof = ChannelProfile::equal_power(paths, std::min(n - 1, 7), 2);
    AfdmParams p{n, default_c1(n, 2), 0.0, prof.max_delay};
    const DaftOperator op(p);
    const CVec x = random_symbols(n, qpsk, rng);
    const ChannelRealization real = sample_realization(prof, rng);
    const CVec y = demodulate(apply_channel_time(append_cpp(modulate(x, op), p), real, p, 0.0, rng), op);
    const EffectiveChannel eff = effective_channel(build_time_matrix(real, p), op);
    const double err = (y - eff.dense * x).norm() / std::max(y.norm(), 1e-300);
    if (err > worst) {
      worst = err;
      worst_seed = s;
    }
  }
  return {"channel_matrix_vs_convolution", worst < 1e-9,
          "max relative error " + fmt("%.3e", worst) + " (seed " + std::to_string(worst_seed) + ")"};
}

CheckResult check_scalar_observation(std::uint64_t seed, bool fault) {
  const Constellation qpsk = build_constellation(4);
  Rng rng(derive_seed(seed, {4}));
  const int n = 16;
  const CVec x = random_symbols(n, qpsk, rng);
  const EffectiveChannel eff = effective_channel_from_dense(CMat::Identity(n, n));
  DetectorConfig cfg;
  cfg.max_iter = 1;
  cfg.fault_flip_observation = fault;
  const VbOutput out = vb_detect(x, eff, 1e-4, qpsk, cfg);
  double min_mass = 1.0;
  for (int i = 0; i < n; ++i) {
    const auto truth = static_cast<Eigen::Index>(qpsk.nearest_index(x[i]));
    min_mass = std::min(min_mass, out.state.probs(i, truth));
  }
  const bool exact = (out.result.hard_symbols - x).cwiseAbs().maxCoeff() < 1e-12;
  return {"scalar_observation", min_mass > 0.99 && exact,
          "identity channel, N=16, N0=1e-4, seed " + std::to_string(seed) +
              ": min posterior mass on the sent symbol after one sweep = " + fmt("%.6f", min_mass)};
}

CheckResult check_map_vb_agreement(std::uint64_t seed, bool fault) {
  SimConfig cfg;
  cfg.frame_len = 4;
  cfg.profile = ChannelProfile::equal_power(2, 3, 1);
  cfg.snr_db_grid = {20.0};
  cfg.master_seed = derive_seed(seed, {5});
  DetectorSpec vb{"vb", DetectorKind::kVb, {}};
  vb.cfg.max_iter = 10;
  vb.cfg.fault_flip_observation = fault;
  cfg.detectors = {{"map", DetectorKind::kMap, {}}, vb};
  cfg.validate();
  const AfdmParams p = cfg.afdm_params();
  const DaftOperator op(p);
  const Constellation qpsk = build_constellation(4);
  const double n0 = noise_variance(20.0);
  std::size_t agree = 0;
  std::size_t total = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    Rng rng(derive_seed(cfg.master_seed, {t}));
    const CVec x = random_symbols(4, qpsk, rng);
    const ChannelRealization real = sample_realization(cfg.profile, rng);
    const CVec y = demodulate(apply_channel_time(append_cpp(modulate(x, op), p), real, p, n0, rng), op);
    const EffectiveChannel eff = effective_channel(build_time_matrix(real, p), op);
    const auto map = map_detect(y, eff, n0, qpsk);
    const auto vbr = vb_detect(y, eff, n0, qpsk, vb.cfg).result;
    for (int i = 0; i < 4; ++i) agree += map.hard_indices[i] == vbr.hard_indices[i];
    total += 4;
  }
  const double rate = static_cast<double>(agree) / static_cast<double>(total);
  return {"map_vb_agreement", rate >= 0.99,
          "N=4, P=2, QPSK, 20 dB, 200 trials, seed " + std::to_string(cfg.master_seed) +
              ": symbol agreement " + fmt("%.4f", rate)};
}

CheckResult check_posterior_consistency(std::uint64_t seed) {
  const Constellation qpsk = build_constellation(4);
  double simplex = 0.0;
  double moments = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    Rng rng(derive_seed(seed, {6, t}));
    const int n = 32;
    const ChannelProfile prof = ChannelProfile::equal_power(3, 8, 2);
    AfdmParams p{n, default_c1(n, 2), 0.0, 8};
    const DaftOperator op(p);
    const CVec x = random_symbols(n, qpsk, rng);
    const ChannelRealization real = sample_realization(prof, rng);
    const double n0 = noise_variance(static_cast<double>(rng.uniform_int(0, 20)));
    const CVec y = demodulate(apply_channel_time(append_cpp(modulate(x, op), p), real, p, n0, rng), op);
    const EffectiveChannel eff = effective_channel(build_time_matrix(real, p), op);
    DetectorConfig cfg;
    cfg.max_iter = 4;
    const VbState st = vb_detect(y, eff, n0, qpsk, cfg).state;
    for (int i = 0; i < n; ++i) {
      simplex = std::max(simplex, std::abs(st.probs.row(i).sum() - 1.0));
      cd m{0.0, 0.0};
      for (std::size_t k = 0; k < qpsk.size(); ++k) m += st.probs(i, static_cast<Eigen::Index>(k)) * qpsk.point(k);
      moments = std::max(moments, std::abs(m - st.means[i]));
    }
  }
  return {"posterior_consistency", simplex < 1e-9 && moments < 1e-10,
          "row-sum deviation " + fmt("%.3e", simplex) + ", mean deviation " + fmt("%.3e", moments)};
}

}  // namespace

std::vector<CheckResult> run_selftest(const SelftestOptions& opts) {
  std::vector<std::function<CheckResult()>> checks = {
      [&] { return check_unitarity(opts.seed); },
      [&] { return check_round_trip(opts.seed); },
      [&] { return check_cpp_degeneration(); },
      [&] { return check_channel_equivalence(opts.seed); },
      [&] { return check_scalar_observation(opts.seed, opts.inject_observation_fault); },
      [&] { return check_map_vb_agreement(opts.seed, opts.inject_observation_fault); },
      [&] { return check_posterior_consistency(opts.seed); },
  };
  std::vector<CheckResult> results;
  for (auto& c : checks) {
    try {
      results.push_back(c());
    } catch (const std::exception& e) {
      results.push_back({"exception", false, e.what()});
    }
  }
  return results;
}

int cmd_selftest(const SelftestOptions& opts, bool as_json, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_selftest(opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = true;
  const CheckResult* first_fail = nullptr;
  for (const auto& r : results) {
    if (!r.passed && !first_fail) first_fail = &r;
    ok = ok && r.passed;
  }
  if (as_json) {
    nlohmann::json j;
    j["ok"] = ok;
    j["seconds"] = secs;
    j["checks"] = nlohmann::json::array();
    for (const auto& r : results) j["checks"].push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    if (first_fail) j["first_failure"] = first_fail->name;
    out << j.dump(2) << "\n";
  } else {
    for (const auto& r : results) out << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  " << r.detail << "\n";
    if (first_fail) out << "first failing check: " << first_fail->name << " (" << first_fail->detail << ")\n";
    out << (ok ? "selftest passed" : "selftest FAILED") << " in " << fmt("%.2f", secs) << " s\n";
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace afdm::cli

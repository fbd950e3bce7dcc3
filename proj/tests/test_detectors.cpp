#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "afdm/detectors.hpp"
#include "test_support.hpp"

using namespace afdm;
using afdm::testing::Frame;
using afdm::testing::identity_channel;
using afdm::testing::make_frame;

namespace {

const Constellation& qpsk() {
  static const Constellation c = build_constellation(4);
  return c;
}

CVec symbols(const std::vector<std::size_t>& idx, const Constellation& c) {
  CVec x(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) x[static_cast<Eigen::Index>(i)] = c.point(idx[i]);
  return x;
}

// Literal dense form of one VB run, no incremental bookkeeping.
RMat vb_reference(const CVec& y, const CMat& h, double n0, const Constellation& c,
                  const DetectorConfig& cfg) {
  const Eigen::Index n = h.cols();
  const auto k = static_cast<Eigen::Index>(c.size());
  const CMat g = h * h.adjoint() + n0 * CMat::Identity(n, n);
  CVec xh = h.adjoint() * g.inverse() * y;
  RVec vh = RVec::Constant(n, cfg.init_variance);
  RMat pi = RMat::Constant(n, k, 1.0 / static_cast<double>(k));
  for (int t = 0; t < cfg.max_iter; ++t) {
    for (Eigen::Index s = 0; s < n; ++s) {
      CVec mu = y;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != s) mu -= h.col(j) * xh[j];
      }
      const double norm = h.col(s).squaredNorm();
      double v = n0;
      if (cfg.interference == VbInterference::kAllSymbols) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j != s) v += h.col(j).squaredNorm() * vh[j];
        }
      } else {
        for (Eigen::Index r = 0; r < n; ++r) {
          double others = 0.0;
          for (Eigen::Index j = 0; j < n; ++j) {
            if (j != s) others += std::norm(h(r, j)) * vh[j];
          }
          v += std::norm(h(r, s)) * others / norm;
        }
      }
      const cd z = h.col(s).dot(mu) / norm;
      const double sig = std::max(v / norm, kSigmaFloor);
      double top = -std::numeric_limits<double>::infinity();
      for (Eigen::Index q = 0; q < k; ++q) top = std::max(top, -std::norm(z - c.point(q)) / sig);
      double sum = 0.0;
      for (Eigen::Index q = 0; q < k; ++q) {
        pi(s, q) = std::exp(-std::norm(z - c.point(q)) / sig - top);
        sum += pi(s, q);
      }
      pi.row(s) /= sum;
      cd m{0.0, 0.0};
      for (Eigen::Index q = 0; q < k; ++q) m += pi(s, q) * c.point(q);
      double var = 0.0;
      for (Eigen::Index q = 0; q < k; ++q) var += pi(s, q) * std::norm(c.point(q) - m);
      xh[s] = m;
      vh[s] = var;
    }
  }
  return pi;
}

void check_simplex_and_moments(const VbState& st, const Constellation& c) {
  for (Eigen::Index n = 0; n < st.probs.rows(); ++n) {
    CHECK(std::abs(st.probs.row(n).sum() - 1.0) < 1e-9);
    CHECK(st.probs.row(n).minCoeff() >= 0.0);
    CHECK(st.probs.row(n).maxCoeff() <= 1.0);
    cd m{0.0, 0.0};
    for (std::size_t k = 0; k < c.size(); ++k) m += st.probs(n, static_cast<Eigen::Index>(k)) * c.point(k);
    double v = 0.0;
    double vmax = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      v += st.probs(n, static_cast<Eigen::Index>(k)) * std::norm(c.point(k) - m);
      vmax = std::max(vmax, std::norm(c.point(k) - st.means[n]));
    }
    CHECK(std::abs(m - st.means[n]) < 1e-10);
    CHECK(std::abs(v - st.vars[n]) < 1e-10);
    CHECK(st.vars[n] >= 0.0);
    CHECK(st.vars[n] <= vmax + 1e-12);
  }
}

}  // namespace

TEST_CASE("detector names round-trip") {
  for (auto k : {DetectorKind::kZf, DetectorKind::kLmmse, DetectorKind::kMap, DetectorKind::kMpa,
                 DetectorKind::kVb}) {
    CHECK(detector_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(detector_kind_from_string("ml"), ConfigError);
  CHECK(vb_interference_from_string(to_string(VbInterference::kAllSymbols)) ==
        VbInterference::kAllSymbols);
}

TEST_CASE("config validation") {
  DetectorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.max_iter = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.damping = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("residual_vb") {
  RMat a = RMat::Constant(3, 4, 0.25);
  CHECK(residual_vb(a, a) == 0.0);
  RMat b = a;
  b(1, 2) += 0.3;
  CHECK(residual_vb(a, b) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(residual_vb(a, RMat::Zero(3, 3)), DimensionError);

  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    RMat p(5, 4), q(5, 4);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 4; ++j) {
        p(i, j) = rng.uniform();
        q(i, j) = rng.uniform();
      }
    }
    double ref = 0.0;
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 4; ++j) ref = std::max(ref, std::abs(p(i, j) - q(i, j)));
    }
    CHECK(residual_vb(p, q) == ref);
  }
}

TEST_CASE("scalar observation and posterior") {
  const CMat h = (CMat(2, 2) << cd(2.0, 0.0), cd(0.0, 0.0), cd(0.0, 1.0), cd(1.0, 0.0)).finished();
  const auto eff = effective_channel_from_dense(h);
  CVec mu(2);
  mu << cd(1.0, 1.0), cd(0.5, -0.5);
  const auto obs = scalar_observation(eff, 0, mu, 0.5);
  // z = (2*(1+j) + (-j)(0.5-0.5j)) / 5
  CHECK(std::abs(obs.z - (cd(2.0, 2.0) + cd(-0.5, -0.5)) / 5.0) < 1e-15);
  CHECK(obs.sigma_sq == doctest::Approx(0.1));
  CHECK(scalar_observation(eff, 0, mu, 0.0).sigma_sq == kSigmaFloor);

  const auto& c = qpsk();
  const auto post = scalar_posterior(ScalarObservation{c.point(2), 0.2}, c);
  double sum = 0.0;
  for (double p : post) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::max_element(post.begin(), post.end()) - post.begin() == 2);
  // far away observation: no underflow to NaN
  const auto far = scalar_posterior(ScalarObservation{cd(1e6, 0.0), 1e-12}, c);
  for (double p : far) CHECK(std::isfinite(p));
}

TEST_CASE("zf: identity and noiseless inversion") {
  const auto& c = qpsk();
  const CVec x = symbols({0, 3, 1, 2}, c);
  const auto id = zf_detect(x, identity_channel(4), c);
  CHECK(id.hard_indices == std::vector<std::size_t>{0, 3, 1, 2});
  CHECK(!id.soft_probs);

  Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    const Frame f = make_frame(16, 3, 4, 1, 0.0, c, rng);
    CHECK(zf_detect(f.eff.dense * f.x, f.eff, c).hard_indices == f.tx);
  }
}

TEST_CASE("zf: rank deficiency is an error") {
  CMat h = CMat::Identity(4, 4);
  h.col(3) = h.col(0);
  CHECK_THROWS_AS(zf_detect(CVec::Ones(4), effective_channel_from_dense(h), qpsk()),
                  SingularMatrixError);
}

TEST_CASE("lmmse matches the dense-inverse formula") {
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    CMat g(8, 8);
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) g(i, j) = rng.complex_normal(1.0);
    }
    const CMat u = Eigen::HouseholderQR<CMat>(g).householderQ();
    const auto eff = effective_channel_from_dense(u);
    CVec y(8);
    for (int i = 0; i < 8; ++i) y[i] = rng.complex_normal(1.0);
    const double n0 = 0.1;
    const CVec ref = u.adjoint() * (u * u.adjoint() + n0 * CMat::Identity(8, 8)).inverse() * y;
    CHECK((lmmse_estimate(y, eff, n0) - ref).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("lmmse limits") {
  const auto& c = qpsk();
  const CVec y = symbols({1, 2, 3}, c) * 0.7;
  const auto eff = identity_channel(3);
  CHECK((lmmse_estimate(y, eff, 1e-12) - y).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(lmmse_estimate(y, eff, 1e12).cwiseAbs().maxCoeff() < 1e-11);
  CHECK(lmmse_detect(y, eff, 1e-6, c).hard_indices == std::vector<std::size_t>{1, 2, 3});
  CHECK_THROWS_AS(lmmse_estimate(y, eff, 0.0), ConfigError);
}

TEST_CASE("zf is no better than lmmse at 12 dB") {
  const auto& c = qpsk();
  Rng rng(41);
  std::size_t zf_err = 0, lm_err = 0;
  const double n0 = std::pow(10.0, -1.2);
  for (int t = 0; t < 1000; ++t) {
    const Frame f = make_frame(8, 3, 3, 0, n0, c, rng);
    const auto z = zf_detect(f.y, f.eff, c);
    const auto l = lmmse_detect(f.y, f.eff, n0, c);
    for (int i = 0; i < 8; ++i) {
      zf_err += z.hard_indices[i] != f.tx[i];
      lm_err += l.hard_indices[i] != f.tx[i];
    }
  }
  CHECK(zf_err >= lm_err);
}

TEST_CASE("map: single symbol reduces to nearest point") {
  const auto& c = build_constellation(16);
  Rng rng(51);
  const auto eff = identity_channel(1);
  for (int t = 0; t < 200; ++t) {
    CVec y(1);
    y[0] = rng.complex_normal(1.5);
    const auto m = map_detect(y, eff, 0.3, c);
    CHECK(m.hard_indices[0] == c.nearest_index(y[0]));
    CHECK(m.hard_bits == demap_hard(y, c));
  }
}

TEST_CASE("map: brute-force oracle") {
  const auto& c = qpsk();
  const CVec x = symbols({3, 1, 0, 2}, c);
  CHECK(map_detect(x, identity_channel(4), 0.01, c).hard_indices ==
        std::vector<std::size_t>{3, 1, 0, 2});
  // every candidate scores the same: lexicographic first wins
  CHECK(map_detect(CVec::Zero(3), identity_channel(3), 1.0, c).hard_indices ==
        std::vector<std::size_t>{0, 0, 0});

  // independent exhaustive search over a non-trivial channel
  Rng rng(52);
  for (int t = 0; t < 20; ++t) {
    const Frame f = make_frame(4, 2, 1, 0, 0.3, c, rng);
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> arg;
    for (int code = 0; code < 256; ++code) {
      std::vector<std::size_t> cand{static_cast<std::size_t>(code >> 6), static_cast<std::size_t>((code >> 4) & 3),
                                    static_cast<std::size_t>((code >> 2) & 3), static_cast<std::size_t>(code & 3)};
      const double d = (f.y - f.eff.dense * symbols(cand, c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = cand;
      }
    }
    CHECK(map_detect(f.y, f.eff, f.n0, c).hard_indices == arg);
  }
  CHECK_THROWS_AS(map_detect(CVec::Zero(11), identity_channel(11), 1.0, c), ConfigError);
}

TEST_CASE("vb: identity channel, noiseless") {
  const auto& c = qpsk();
  const std::vector<std::size_t> tx{0, 1, 2, 3, 3, 2};
  DetectorConfig cfg;
  cfg.max_iter = 1;
  const auto out = vb_detect(symbols(tx, c), identity_channel(6), 1e-3, c, cfg);
  CHECK(out.result.hard_indices == tx);
  for (int n = 0; n < 6; ++n) CHECK(out.state.probs(n, static_cast<Eigen::Index>(tx[n])) > 0.99);
  CHECK(out.state.iterations_run == 1);
}

TEST_CASE("vb: zero observation keeps uniform probabilities") {
  const auto& c = qpsk();
  const auto out = vb_detect(CVec::Zero(5), identity_channel(5), 0.5, c, DetectorConfig{});
  CHECK((out.state.probs.array() - 0.25).abs().maxCoeff() < 1e-12);
  CHECK(out.result.hard_indices == std::vector<std::size_t>(5, 0));
}

TEST_CASE("vb matches the dense reference for both interference models") {
  const auto& c = qpsk();
  Rng rng(61);
  for (auto model : {VbInterference::kRowLocal, VbInterference::kAllSymbols}) {
    for (int t = 0; t < 10; ++t) {
      const Frame f = make_frame(16, 3, 3, 1, 0.1, c, rng);
      DetectorConfig cfg;
      cfg.interference = model;
      cfg.early_stop = false;
      cfg.max_iter = 4;
      const auto out = vb_detect(f.y, f.eff, f.n0, c, cfg);
      const RMat ref = vb_reference(f.y, f.eff.dense, f.n0, c, cfg);
      CHECK((out.state.probs - ref).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("vb invariants on random frames") {
  Rng rng(71);
  for (int t = 0; t < 60; ++t) {
    const auto& c = build_constellation(t % 3 == 0 ? 16 : 4);
    const Frame f = make_frame(32, 1 + t % 5, 6, 2, std::pow(10.0, -(t % 20) / 10.0), c, rng);
    DetectorConfig cfg;
    cfg.max_iter = 1 + t % 6;
    cfg.early_stop = false;
    const auto out = vb_detect(f.y, f.eff, f.n0, c, cfg);
    check_simplex_and_moments(out.state, c);
    CHECK(static_cast<int>(out.state.residual_trace.size()) == cfg.max_iter);

    // incremental residual against a recompute over the sparse columns
    CVec r = f.y;
    for (int n = 0; n < 32; ++n) {
      for (const auto& e : f.eff.columns[n]) r[e.index] -= e.value * out.state.means[n];
    }
    const int n = static_cast<int>(rng.uniform_int(0, 31));
    CVec mu_inc = out.state.residual;
    CVec mu_ref = r;
    for (const auto& e : f.eff.columns[n]) {
      mu_inc[e.index] += e.value * out.state.means[n];
      mu_ref[e.index] += e.value * out.state.means[n];
    }
    CHECK((mu_inc - mu_ref).norm() < 1e-8);
    CHECK((out.state.residual - (f.y - f.eff.dense * out.state.means)).norm() < 1e-6);

    for (std::size_t i = 0; i < out.result.hard_indices.size(); ++i) {
      CHECK(out.result.hard_symbols[static_cast<Eigen::Index>(i)] == c.point(out.result.hard_indices[i]));
    }
  }
}

TEST_CASE("vb and mpa probabilities are scale covariant") {
  const auto& c = qpsk();
  Rng rng(81);
  for (int t = 0; t < 10; ++t) {
    const Frame f = make_frame(16, 3, 3, 1, 0.05, c, rng);
    const cd s = std::polar(0.3 + 3.0 * rng.uniform(), 2.0 * kPi * rng.uniform());
    const auto scaled = effective_channel_from_dense(f.eff.dense * s);
    DetectorConfig cfg;
    cfg.early_stop = false;
    const auto a = vb_detect(f.y, f.eff, f.n0, c, cfg);
    const auto b = vb_detect(f.y * s, scaled, f.n0 * std::norm(s), c, cfg);
    CHECK((a.state.probs - b.state.probs).cwiseAbs().maxCoeff() < 1e-9);
    const auto ma = mpa_detect(f.y, f.eff, f.n0, c, cfg);
    const auto mb = mpa_detect(f.y * s, scaled, f.n0 * std::norm(s), c, cfg);
    CHECK((*ma.soft_probs - *mb.soft_probs).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("detectors are deterministic") {
  const auto& c = qpsk();
  Rng a(91), b(91);
  const Frame fa = make_frame(32, 4, 5, 2, 0.1, c, a);
  const Frame fb = make_frame(32, 4, 5, 2, 0.1, c, b);
  DetectorConfig cfg;
  const auto va = vb_detect(fa.y, fa.eff, fa.n0, c, cfg);
  const auto vb = vb_detect(fb.y, fb.eff, fb.n0, c, cfg);
  CHECK(va.state.probs == vb.state.probs);
  CHECK(va.result.hard_bits == vb.result.hard_bits);
  CHECK(*va.result.residual_trace == *vb.result.residual_trace);
  CHECK(va.result.op_count == vb.result.op_count);
  const auto ma = mpa_detect(fa.y, fa.eff, fa.n0, c, cfg);
  const auto mb = mpa_detect(fb.y, fb.eff, fb.n0, c, cfg);
  CHECK(*ma.soft_probs == *mb.soft_probs);
  CHECK(ma.hard_bits == mb.hard_bits);
}

TEST_CASE("noiseless full-rank instances are recovered exactly") {
  const auto& c = qpsk();
  Rng rng(101);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = t % 2 ? 4 : 6;
    const Frame f = make_frame(n, 1 + t % 2, 1, 0, 0.0, c, rng);
    Eigen::FullPivLU<CMat> lu(f.eff.dense);
    if (lu.rank() < n) continue;
    ++checked;
    const CVec y = f.eff.dense * f.x;
    CHECK(zf_detect(y, f.eff, c).hard_indices == f.tx);
    CHECK(map_detect(y, f.eff, 1e-6, c).hard_indices == f.tx);
    CHECK(vb_detect(y, f.eff, 1e-6, c, DetectorConfig{}).result.hard_indices == f.tx);
  }
  CHECK(checked > 80);
}

TEST_CASE("mpa: identity channel, noiseless") {
  const auto& c = qpsk();
  const std::vector<std::size_t> tx{2, 0, 3, 1};
  DetectorConfig cfg;
  cfg.max_iter = 1;
  const auto out = mpa_detect(symbols(tx, c), identity_channel(4), 1e-3, c, cfg);
  CHECK(out.hard_indices == tx);
  CHECK(out.iterations_run == 1);
}

TEST_CASE("mpa is exact on a single-path channel") {
  const auto& c = qpsk();
  Rng rng(111);
  for (int t = 0; t < 20; ++t) {
    const Frame f = make_frame(8, 1, 0, 1, 0.2, c, rng);
    for (int n = 0; n < 8; ++n) REQUIRE(f.eff.columns[n].size() == 1);
    DetectorConfig cfg;
    cfg.max_iter = 1 + t % 5;
    const auto out = mpa_detect(f.y, f.eff, f.n0, c, cfg);
    REQUIRE(out.soft_probs);
    for (int n = 0; n < 8; ++n) {
      const auto& e = f.eff.columns[n][0];
      const ScalarObservation obs{f.y[e.index] / e.value, f.n0 / std::norm(e.value)};
      const auto ref = scalar_posterior(obs, c);
      for (std::size_t k = 0; k < c.size(); ++k) {
        CHECK(std::abs((*out.soft_probs)(n, static_cast<Eigen::Index>(k)) - ref[k]) < 1e-6);
      }
    }
  }
}

TEST_CASE("mpa marginals stay on the simplex") {
  const auto& c = qpsk();
  Rng rng(121);
  for (int t = 0; t < 30; ++t) {
    const Frame f = make_frame(32, 1 + t % 5, 6, 2, 0.05, c, rng);
    DetectorConfig cfg;
    cfg.early_stop = false;
    const auto out = mpa_detect(f.y, f.eff, f.n0, c, cfg);
    const RMat& p = *out.soft_probs;
    for (Eigen::Index n = 0; n < p.rows(); ++n) {
      CHECK(std::abs(p.row(n).sum() - 1.0) < 1e-9);
      CHECK(p.row(n).minCoeff() >= 0.0);
    }
    CHECK(out.residual_trace->size() == 5);
    CHECK(out.iteration_ops.size() == 5);
  }
}

TEST_CASE("vb objective is finite and tracked on request") {
  const auto& c = qpsk();
  Rng rng(131);
  const Frame f = make_frame(16, 3, 3, 1, 0.1, c, rng);
  DetectorConfig cfg;
  cfg.track_elbo = true;
  cfg.early_stop = false;
  const auto out = vb_detect(f.y, f.eff, f.n0, c, cfg);
  REQUIRE(out.state.elbo_trace.size() == 5);
  for (double e : out.state.elbo_trace) CHECK(std::isfinite(e));
  CHECK(out.state.elbo_trace.back() == doctest::Approx(vb_objective(f.y, f.eff, f.n0, out.state)));
}

TEST_CASE("early stop honours the tolerance") {
  const auto& c = qpsk();
  DetectorConfig cfg;
  cfg.max_iter = 20;
  const auto out = vb_detect(symbols({0, 1, 2, 3}, c), identity_channel(4), 1e-3, c, cfg);
  CHECK(out.state.iterations_run < 20);
  CHECK(out.state.residual_trace.back() < cfg.tol);
}

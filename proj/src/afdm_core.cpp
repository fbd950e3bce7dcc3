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

#include "afdm/afdm_core.hpp"

#include <cmath>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace afdm {

namespace {

// exp(-j 2 pi c k) with the integer part of c k removed first.
cd unit_phase(double cycles) {
  const double frac = cycles - std::floor(cycles);
  return std::polar(1.0, -2.0 * kPi * frac);
}

void check_length(const CVec& v, int n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                         std::to_string(v.size()));
  }
}

}  // namespace

void AfdmParams::validate() const {
  if (n < 2) throw ConfigError("frame length must be at least 2, got " + std::to_string(n));
  if (l_cpp < 0) throw ConfigError("prefix length must be non-negative");
  if (!std::isfinite(c1) || !std::isfinite(c2)) throw ConfigError("chirp rates must be finite");
}

double default_c1(int n, int max_doppler) {
  return (2.0 * max_doppler + 1.0) / (2.0 * n);
}

CVec chirp_diagonal(int n, double c) {
  CVec d(n);
  for (int i = 0; i < n; ++i) d[i] = unit_phase(c * static_cast<double>(i) * i);
  return d;
}

DaftOperator::DaftOperator(const AfdmParams& params) : params_(params) {
  params_.validate();
  const int n = params_.n;
  const CVec l1 = chirp_diagonal(n, params_.c1);
  const CVec l2 = chirp_diagonal(n, params_.c2);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  a_.resize(n, n);
  for (int m = 0; m < n; ++m) {
    for (int k = 0; k < n; ++k) {
      const long long mk = (static_cast<long long>(m) * k) % n;
      const cd f = norm * std::polar(1.0, -2.0 * kPi * static_cast<double>(mk) / n);
      a_(m, k) = l2[m] * f * l1[k];
    }
  }
  a_h_ = a_.adjoint();
}

CVec modulate(const CVec& x, const DaftOperator& op) {
  check_length(x, op.size(), "modulate");
  return op.a_h() * x;
}

CVec demodulate(const CVec& r, const DaftOperator& op) {
  check_length(r, op.size(), "demodulate");
  return op.a() * r;
}

CVec modulate_fast(const CVec& x, const AfdmParams& params) {
  params.validate();
  check_length(x, params.n, "modulate_fast");
  const int n = params.n;
  const CVec l1 = chirp_diagonal(n, params.c1);
  const CVec l2 = chirp_diagonal(n, params.c2);
  std::vector<cd> in(n), out;
  for (int i = 0; i < n; ++i) in[i] = std::conj(l2[i]) * x[i];
  Eigen::FFT<double> fft;
  fft.inv(out, in);  // includes 1/N
  const double scale = std::sqrt(static_cast<double>(n));
  CVec s(n);
  for (int i = 0; i < n; ++i) s[i] = std::conj(l1[i]) * out[i] * scale;
  return s;
}

CVec demodulate_fast(const CVec& r, const AfdmParams& params) {
  params.validate();
  check_length(r, params.n, "demodulate_fast");
  const int n = params.n;
  const CVec l1 = chirp_diagonal(n, params.c1);
  const CVec l2 = chirp_diagonal(n, params.c2);
  std::vector<cd> in(n), out;
  for (int i = 0; i < n; ++i) in[i] = l1[i] * r[i];
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  CVec y(n);
  for (int i = 0; i < n; ++i) y[i] = l2[i] * out[i] * scale;
  return y;
}

cd cpp_phase(int n, const AfdmParams& params) {
  // c1 (N^2 + 2 N n) = (2 N c1) (N + 2n) / 2. The integer part of 2 N c1 is
  // reduced exactly; a fractional part below 1e-12 is treated as zero so that
  // integer chirp products give an exact cyclic prefix.
  const double k = static_cast<double>(params.n) + 2.0 * n;
  const double twice = 2.0 * params.n * params.c1;
  const double whole = std::round(twice);
  double part = twice - whole;
  if (std::abs(part) <= 1e-12) part = 0.0;
  if (std::abs(whole * k) >= 0x1p52) return std::conj(unit_phase(params.c1 * params.n * k));
  return std::conj(unit_phase(std::fmod(whole * k, 2.0) / 2.0 + part * k / 2.0));
}

bool cpp_is_cyclic(const AfdmParams& params, double tol) {
  const double twice = 2.0 * params.n * params.c1;
  return params.n % 2 == 0 && std::abs(twice - std::round(twice)) <= tol;
}

CVec append_cpp(const CVec& s, const AfdmParams& params) {
  params.validate();
  check_length(s, params.n, "append_cpp");
  if (params.l_cpp > params.n) {
    throw ConfigError("prefix length " + std::to_string(params.l_cpp) + " exceeds frame length " +
                      std::to_string(params.n));
  }
  const int n = params.n;
  const int l = params.l_cpp;
  CVec out(n + l);
  for (int i = -l; i < 0; ++i) out[i + l] = s[n + i] * cpp_phase(i, params);
  out.tail(n) = s;
  return out;
}

CVec strip_cpp(const CVec& r, const AfdmParams& params) {
  check_length(r, params.n + params.l_cpp, "strip_cpp");
  return r.tail(params.n);
}

}  // namespace afdm

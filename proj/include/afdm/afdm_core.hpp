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

#include "afdm/types.hpp"

namespace afdm {

struct AfdmParams {
  int n = 0;         // frame length N
  double c1 = 0.0;   // chirp rate applied along time
  double c2 = 0.0;   // chirp rate applied along the DAFT domain
  int l_cpp = 0;     // chirp-periodic prefix length in samples

  void validate() const;
};

// c1 = (2 * max_doppler + 1) / (2N), the full-diversity choice for integer Doppler.
double default_c1(int n, int max_doppler);

/**
 * Dense DAFT matrix A = L(c2) F L(c1), where F is the unitary DFT and
 * L(c) = diag(exp(-j 2 pi c n^2)). Immutable after construction.
 */
class DaftOperator {
 public:
  explicit DaftOperator(const AfdmParams& params);

  const AfdmParams& params() const { return params_; }
  int size() const { return params_.n; }
  const CMat& a() const { return a_; }
  const CMat& a_h() const { return a_h_; }

 private:
  AfdmParams params_;
  CMat a_;
  CMat a_h_;
};

inline DaftOperator build_daft(const AfdmParams& params) { return DaftOperator(params); }

// diag(exp(-j 2 pi c n^2)), n = 0..N-1, as a vector.
CVec chirp_diagonal(int n, double c);

// s = A^H x.
CVec modulate(const CVec& x, const DaftOperator& op);
// y = A r, with the prefix already removed.
CVec demodulate(const CVec& r, const DaftOperator& op);

// Chirp-FFT-chirp evaluation of the same transforms, O(N log N).
CVec modulate_fast(const CVec& x, const AfdmParams& params);
CVec demodulate_fast(const CVec& r, const AfdmParams& params);

// Phase multiplying s[N + n] to form prefix sample n, for n in [-l_cpp, -1].
cd cpp_phase(int n, const AfdmParams& params);

// True when 2 N c1 is an integer and N is even, i.e. the prefix is cyclic.
bool cpp_is_cyclic(const AfdmParams& params, double tol = 1e-12);

// [prefix | s], length N + l_cpp.
CVec append_cpp(const CVec& s, const AfdmParams& params);
// Drops the first l_cpp samples.
CVec strip_cpp(const CVec& r, const AfdmParams& params);

}  // namespace afdm

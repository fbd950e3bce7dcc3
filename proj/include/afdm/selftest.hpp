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
#include <iosfwd>
#include <string>
#include <vector>

namespace afdm::cli {

struct SelftestOptions {
  std::uint64_t seed = 20240601;
  // Negates the VB matched-filter output; the scalar-observation check must catch it.
  bool inject_observation_fault = false;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // inputs, seed and the measured value
};

std::vector<CheckResult> run_selftest(const SelftestOptions& opts);

// Runs the suite, prints a report (text or JSON), returns an exit code.
int cmd_selftest(const SelftestOptions& opts, bool as_json, std::ostream& out);

}  // namespace afdm::cli

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

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "afdm/config.hpp"
#include "afdm/simharness.hpp"

namespace afdm::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // invariant, selftest or verification failure
  kExitConfig = 2,
  kExitIo = 3,
};

inline constexpr const char* kWorkerCapEnv = "AFDM_MAX_WORKERS";

struct RunOptions {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

// Serializers shared by the commands and the tests.
std::string ber_csv(const BerResult& res, const std::string& hash);
std::string residuals_csv(const ResidualReport& rep, const std::string& hash);
std::string residual_summary_csv(const ResidualReport& rep, const std::string& hash);
json ber_result_json(const BerResult& res, const std::string& hash);
json residual_report_json(const ResidualReport& rep, const std::string& hash);

// Resolves the config from options: file, overrides, --seed, --workers and
// the worker cap environment variable.
SimConfig resolve_config(const RunOptions& opts);

int cmd_ber(const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_residuals(const RunOptions& opts, std::ostream& out, std::ostream& err);
// Checks every file listed in <dir>/manifest.json against its digest and
// the config hash.
int cmd_verify(const std::string& dir, bool as_json, std::ostream& out, std::ostream& err);

}  // namespace afdm::cli

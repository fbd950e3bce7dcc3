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

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "afdm/simharness.hpp"

namespace afdm::cli {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

// ConfigError carrying a "file:line: message" rendering (line 0: unknown).
class ConfigFileError : public ConfigError {
 public:
  ConfigFileError(const std::string& origin, int line, const std::string& msg)
      : ConfigError(origin + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/**
 * Config files are JSON objects. Every key is optional; missing keys take
 * the SimConfig defaults. Unknown keys are rejected.
 *
 *   frame_len, constellation_k, num_frames, master_seed, workers
 *   chirp            "auto" or {"c1": .., "c2": ..}
 *   l_cpp            "auto" or an integer
 *   profile          {"num_paths", "max_delay", "max_doppler",
 *                     "power_profile": "equal" or [..]}
 *   snr_db_grid      [..]
 *   residual_snr_db  null or a number
 *   detectors        [{"kind", "label", "max_iter", "tol", "damping",
 *                      "init_variance", "interference"}]
 *   carrier_hz, bandwidth_hz
 *
 * Overrides are "dotted.key=value" strings applied to the raw document
 * before interpretation; the value is parsed as JSON and falls back to a
 * plain string. Numeric path segments index arrays.
 */
SimConfig parse_config(std::string_view text, const std::string& origin,
                       const std::vector<std::string>& overrides = {});
SimConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

void apply_override(json& doc, const std::string& assignment);

SimConfig config_from_json(const json& doc);
// Fully explicit form: every field present, defaults spelled out.
json config_to_json(const SimConfig& cfg);
std::string canonical_text(const SimConfig& cfg);
// SHA-256 of canonical_text, lowercase hex.
std::string config_hash(const SimConfig& cfg);

std::string sha256_hex(std::string_view data);

}  // namespace afdm::cli

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

#include "afdm/commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace afdm::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hash_comment(const std::string& hash) { return "# config_hash: " + hash + "\n"; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes every file to a temporary name first, then renames them into
// place, so a failed run leaves no partial outputs behind.
void write_outputs(const fs::path& dir, const std::map<std::string, std::string>& files) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::ios_base::failure("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::pair<fs::path, fs::path>> staged;
  for (const auto& [name, body] : files) {
    const fs::path tmp = dir / (name + ".tmp");
    std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
    o << body;
    o.close();
    if (!o) {
      for (const auto& s : staged) fs::remove(s.first, ec);
      fs::remove(tmp, ec);
      throw std::ios_base::failure("cannot write " + tmp.string());
    }
    staged.emplace_back(tmp, dir / name);
  }
  for (const auto& [tmp, final_path] : staged) {
    fs::rename(tmp, final_path, ec);
    if (ec) throw std::ios_base::failure("cannot rename " + tmp.string() + ": " + ec.message());
  }
}

json manifest_json(const SimConfig& cfg, const std::string& hash,
                   const std::map<std::string, std::string>& files) {
  json m;
  m["config_hash"] = hash;
  m["tool_version"] = kToolVersion;
  m["timestamp"] = utc_timestamp();
  m["master_seed"] = cfg.master_seed;
  m["outputs"] = json::array();
  for (const auto& [name, body] : files) {
    m["outputs"].push_back({{"path", name}, {"sha256", sha256_hex(body)}});
  }
  return m;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::ios_base::failure& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

std::string ber_csv(const BerResult& res, const std::string& hash) {
  std::string s = hash_comment(hash);
  s += "detector,snr_db,bits,bit_errors,ber,frames,mean_iters,mean_ops\n";
  for (const auto& p : res.points) {
    s += p.detector + "," + num(p.snr_db) + "," + std::to_string(p.bits) + "," +
         std::to_string(p.bit_errors) + "," + num(p.ber) + "," + std::to_string(p.frames) + "," +
         num(p.mean_iterations) + "," + num(p.mean_op_count) + "\n";
  }
  return s;
}

std::string residuals_csv(const ResidualReport& rep, const std::string& hash) {
  std::string s = hash_comment(hash);
  s += "detector,trial,iteration,residual\n";
  for (std::size_t d = 0; d < rep.detectors.size(); ++d) {
    for (std::size_t t = 0; t < rep.traces[d].size(); ++t) {
      const auto& tr = rep.traces[d][t];
      for (std::size_t i = 0; i < tr.size(); ++i) {
        s += rep.detectors[d] + "," + std::to_string(t) + "," + std::to_string(i + 1) + "," +
             num(tr[i]) + "\n";
      }
    }
  }
  return s;
}

std::string residual_summary_csv(const ResidualReport& rep, const std::string& hash) {
  std::string s = hash_comment(hash);
  s += "detector,iteration,p25,median,p75\n";
  for (const auto& sum : rep.summaries) {
    for (std::size_t i = 0; i < sum.median.size(); ++i) {
      s += sum.detector + "," + std::to_string(i + 1) + "," + num(sum.p25[i]) + "," +
           num(sum.median[i]) + "," + num(sum.p75[i]) + "\n";
    }
  }
  return s;
}

json ber_result_json(const BerResult& res, const std::string& hash) {
  json j;
  j["config_hash"] = hash;
  j["config"] = config_to_json(res.config);
  j["snr_definition"] = "Es/N0 in dB, Es = 1 (unit-energy constellation), N0 = 10^(-snr/10)";
  j["points"] = json::array();
  for (const auto& p : res.points) {
    j["points"].push_back({{"detector", p.detector},
                           {"snr_db", p.snr_db},
                           {"bits", p.bits},
                           {"bit_errors", p.bit_errors},
                           {"ber", p.ber},
                           {"frames", p.frames},
                           {"frame_errors", p.frame_errors},
                           {"failed_frames", p.failed_frames},
                           {"mean_iterations", p.mean_iterations},
                           {"mean_op_count", p.mean_op_count}});
  }
  j["trial_seeds"] = res.trial_seeds;
  return j;
}

json residual_report_json(const ResidualReport& rep, const std::string& hash) {
  json j;
  j["config_hash"] = hash;
  j["config"] = config_to_json(rep.config);
  j["snr_db"] = rep.snr_db;
  j["trial_seeds"] = rep.trial_seeds;
  j["summaries"] = json::array();
  for (const auto& s : rep.summaries) {
    j["summaries"].push_back(
        {{"detector", s.detector}, {"p25", s.p25}, {"median", s.median}, {"p75", s.p75}});
  }
  j["traces"] = json::object();
  for (std::size_t d = 0; d < rep.detectors.size(); ++d) j["traces"][rep.detectors[d]] = rep.traces[d];
  return j;
}

SimConfig resolve_config(const RunOptions& opts) {
  std::vector<std::string> overrides = opts.overrides;
  if (opts.seed) overrides.push_back("master_seed=" + std::to_string(*opts.seed));
  if (opts.workers) overrides.push_back("workers=" + std::to_string(*opts.workers));
  SimConfig cfg = load_config(opts.config_path, overrides);
  if (const char* cap = std::getenv(kWorkerCapEnv)) {
    const int limit = std::atoi(cap);
    if (limit >= 1) cfg.workers = std::min(cfg.workers, limit);
  }
  return cfg;
}

int cmd_ber(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SimConfig cfg = resolve_config(opts);
    // Worker count never changes results, so it is left out of the hash.
    SimConfig hashed = cfg;
    hashed.workers = 1;
    const std::string hash = config_hash(hashed);
    const BerResult res = run_ber(cfg);

    std::map<std::string, std::string> files;
    files["ber.csv"] = ber_csv(res, hash);
    files["result.json"] = ber_result_json(res, hash).dump(2) + "\n";
    json manifest = manifest_json(cfg, hash, files);
    files["manifest.json"] = manifest.dump(2) + "\n";
    write_outputs(opts.out_dir, files);
    out << "wrote " << res.points.size() << " BER rows to " << opts.out_dir << " (config "
        << hash.substr(0, 12) << ")\n";
    return int{kExitOk};
  });
}

int cmd_residuals(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SimConfig cfg = resolve_config(opts);
    SimConfig hashed = cfg;
    hashed.workers = 1;
    const std::string hash = config_hash(hashed);
    const ResidualReport rep = run_residuals(cfg);

    std::map<std::string, std::string> files;
    files["residuals.csv"] = residuals_csv(rep, hash);
    files["residuals_summary.csv"] = residual_summary_csv(rep, hash);
    files["result.json"] = residual_report_json(rep, hash).dump(2) + "\n";
    json manifest = manifest_json(cfg, hash, files);
    files["manifest.json"] = manifest.dump(2) + "\n";
    write_outputs(opts.out_dir, files);
    out << "wrote residual traces for " << rep.detectors.size() << " detectors to " << opts.out_dir
        << " (config " << hash.substr(0, 12) << ")\n";
    return int{kExitOk};
  });
}

int cmd_verify(const std::string& dir, bool as_json, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const fs::path root(dir);
    const json manifest = json::parse(read_file(root / "manifest.json"), nullptr, false);
    if (manifest.is_discarded() || !manifest.contains("config_hash") || !manifest.contains("outputs")) {
      throw std::ios_base::failure("manifest.json is missing or malformed");
    }
    const std::string hash = manifest["config_hash"].get<std::string>();
    json report = {{"config_hash", hash}, {"files", json::array()}};
    bool ok = true;
    for (const auto& entry : manifest["outputs"]) {
      const std::string name = entry["path"].get<std::string>();
      std::string problem;
      std::string body;
      try {
        body = read_file(root / name);
      } catch (const std::ios_base::failure&) {
        problem = "missing";
      }
      if (problem.empty() && sha256_hex(body) != entry["sha256"].get<std::string>()) {
        problem = "digest mismatch";
      }
      if (problem.empty()) {
        if (name.ends_with(".csv")) {
          if (body.rfind(hash_comment(hash), 0) != 0) problem = "config hash not embedded";
        } else if (name.ends_with(".json")) {
          const json j = json::parse(body, nullptr, false);
          if (j.is_discarded() || j.value("config_hash", "") != hash) {
            problem = "config hash not embedded";
          } else if (j.contains("config")) {
            SimConfig cfg = config_from_json(j["config"]);
            cfg.workers = 1;
            if (config_hash(cfg) != hash) problem = "embedded config does not hash to manifest";
          }
        }
      }
      ok = ok && problem.empty();
      report["files"].push_back({{"path", name}, {"ok", problem.empty()}, {"problem", problem}});
      if (!as_json) out << (problem.empty() ? "ok    " : "FAIL  ") << name << (problem.empty() ? "" : "  " + problem) << "\n";
    }
    report["ok"] = ok;
    if (as_json) out << report.dump(2) << "\n";
    return ok ? int{kExitOk} : int{kExitFailure};
  });
}

}  // namespace afdm::cli

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

#include "afdm/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

namespace afdm::cli {

namespace {

int line_of_offset(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  int line = 1;
  for (std::size_t i = 0; i < offset; ++i) line += text[i] == '\n';
  return line;
}

// Offset of element `idx` of the array whose '[' is at or after `pos`.
std::size_t array_element(std::string_view text, std::size_t pos, std::size_t idx) {
  pos = text.find('[', pos);
  if (pos == std::string_view::npos) return std::string_view::npos;
  int depth = 0;
  bool in_str = false;
  std::size_t seen = 0;
  for (std::size_t i = pos + 1; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_str) {
      if (ch == '\\') ++i;
      else if (ch == '"') in_str = false;
      continue;
    }
    if (ch == '"') {
      in_str = true;
    } else if (ch == '[' || ch == '{') {
      ++depth;
    } else if (ch == ']' || ch == '}') {
      if (depth-- == 0) return std::string_view::npos;
    } else if (ch == ',' && depth == 0 && ++seen == idx) {
      return i + 1;
    }
    if (idx == 0 && !std::isspace(static_cast<unsigned char>(ch))) return i;
  }
  return std::string_view::npos;
}

// Line of the last segment of a dotted path, 0 when the path cannot be
// found in the text (e.g. it came from an override).
int locate(std::string_view text, const std::string& path) {
  std::size_t pos = 0;
  std::stringstream ss(path);
  std::string seg;
  bool found = false;
  while (std::getline(ss, seg, '.')) {
    std::size_t hit;
    if (!seg.empty() && std::all_of(seg.begin(), seg.end(), [](unsigned char c) { return std::isdigit(c); })) {
      hit = array_element(text, pos, std::stoul(seg));
    } else {
      hit = text.find("\"" + seg + "\"", pos);
    }
    if (hit == std::string_view::npos) break;
    pos = hit;
    found = true;
  }
  return found ? line_of_offset(text, pos) : 0;
}

// Best guess at the key a validation message is about.
std::string key_in_message(const json& doc, const std::string& msg) {
  std::stringstream ss(msg);
  for (std::string w; ss >> w;) {
    if (doc.contains(w)) return w;
    if (doc.contains("profile") && doc["profile"].is_object() && doc["profile"].contains(w)) {
      return "profile." + w;
    }
  }
  if (msg.find("channel") != std::string::npos || msg.find("path") != std::string::npos) {
    if (doc.contains("profile")) return "profile";
  }
  return "<root>";
}

struct Reader {
  const json& doc;
  std::string path;

  const json* find(const char* key) const {
    const auto it = doc.find(key);
    return it == doc.end() ? nullptr : &*it;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(path.empty() ? key : path + "." + key, msg);
  }

  template <typename T>
  void read(const char* key, T& out) const {
    const json* v = find(key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      fail(key, "has the wrong type");
    }
  }

  void check_keys(std::initializer_list<const char*> allowed) const {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, _] : doc.items()) {
      if (!ok.count(k)) throw ConfigError(path.empty() ? k : path + "." + k, "unknown key");
    }
  }

  // Carries the offending dotted path so the caller can anchor it to a line.
  struct ConfigError : afdm::ConfigError {
    ConfigError(std::string p, const std::string& msg)
        : afdm::ConfigError("'" + p + "' " + msg), key_path(std::move(p)) {}
    std::string key_path;
  };
};

DetectorSpec detector_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw Reader::ConfigError(path, "must be an object");
  Reader r{j, path};
  r.check_keys({"kind", "label", "max_iter", "tol", "damping", "init_variance", "interference"});
  DetectorSpec spec;
  std::string kind;
  r.read("kind", kind);
  if (kind.empty()) r.fail("kind", "is required");
  try {
    spec.kind = detector_kind_from_string(kind);
  } catch (const afdm::ConfigError& e) {
    r.fail("kind", e.what());
  }
  r.read("max_iter", spec.cfg.max_iter);
  r.read("tol", spec.cfg.tol);
  r.read("damping", spec.cfg.damping);
  r.read("init_variance", spec.cfg.init_variance);
  std::string model = to_string(spec.cfg.interference);
  r.read("interference", model);
  try {
    spec.cfg.interference = vb_interference_from_string(model);
  } catch (const afdm::ConfigError& e) {
    r.fail("interference", e.what());
  }
  r.read("label", spec.label);
  if (spec.label.empty()) spec.label = default_label(spec.kind, spec.cfg);
  try {
    spec.cfg.validate();
  } catch (const afdm::ConfigError& e) {
    throw Reader::ConfigError(path, e.what());
  }
  return spec;
}

SimConfig from_json_impl(const json& doc) {
  if (!doc.is_object()) throw Reader::ConfigError("<root>", "config must be a JSON object");
  Reader r{doc, ""};
  r.check_keys({"frame_len", "constellation_k", "chirp", "l_cpp", "profile", "snr_db_grid",
                "num_frames", "detectors", "master_seed", "workers", "residual_snr_db",
                "carrier_hz", "bandwidth_hz"});
  SimConfig cfg;
  r.read("frame_len", cfg.frame_len);
  r.read("constellation_k", cfg.constellation_k);
  r.read("num_frames", cfg.num_frames);
  r.read("master_seed", cfg.master_seed);
  r.read("workers", cfg.workers);
  r.read("snr_db_grid", cfg.snr_db_grid);
  r.read("carrier_hz", cfg.carrier_hz);
  r.read("bandwidth_hz", cfg.bandwidth_hz);

  if (const json* c = r.find("chirp")) {
    if (c->is_string()) {
      if (c->get<std::string>() != "auto") r.fail("chirp", "must be \"auto\" or an object");
      cfg.chirp_auto = true;
    } else if (c->is_object()) {
      Reader cr{*c, "chirp"};
      cr.check_keys({"c1", "c2"});
      cfg.chirp_auto = false;
      cr.read("c1", cfg.c1);
      cr.read("c2", cfg.c2);
    } else {
      r.fail("chirp", "must be \"auto\" or an object");
    }
  }
  if (const json* l = r.find("l_cpp")) {
    if (l->is_string() && l->get<std::string>() == "auto") {
      cfg.l_cpp.reset();
    } else if (l->is_number_integer()) {
      cfg.l_cpp = l->get<int>();
    } else {
      r.fail("l_cpp", "must be \"auto\" or an integer");
    }
  }
  if (const json* p = r.find("profile")) {
    if (!p->is_object()) r.fail("profile", "must be an object");
    Reader pr{*p, "profile"};
    pr.check_keys({"num_paths", "max_delay", "max_doppler", "power_profile"});
    pr.read("num_paths", cfg.profile.num_paths);
    pr.read("max_delay", cfg.profile.max_delay);
    pr.read("max_doppler", cfg.profile.max_doppler);
    const json* pw = pr.find("power_profile");
    if (!pw || (pw->is_string() && pw->get<std::string>() == "equal")) {
      cfg.profile = ChannelProfile::equal_power(cfg.profile.num_paths, cfg.profile.max_delay,
                                                cfg.profile.max_doppler);
    } else {
      pr.read("power_profile", cfg.profile.power_profile);
    }
  }
  if (const json* d = r.find("detectors")) {
    if (!d->is_array()) r.fail("detectors", "must be an array");
    cfg.detectors.clear();
    for (std::size_t i = 0; i < d->size(); ++i) {
      cfg.detectors.push_back(detector_from_json((*d)[i], "detectors." + std::to_string(i)));
    }
  }
  if (const json* s = r.find("residual_snr_db")) {
    if (s->is_null()) {
      cfg.residual_snr_db.reset();
    } else if (s->is_number()) {
      cfg.residual_snr_db = s->get<double>();
    } else {
      r.fail("residual_snr_db", "must be null or a number");
    }
  }

  try {
    cfg.validate();
  } catch (const Reader::ConfigError&) {
    throw;
  } catch (const afdm::ConfigError& e) {
    throw Reader::ConfigError(key_in_message(doc, e.what()), e.what());
  }
  return cfg;
}

}  // namespace

SimConfig config_from_json(const json& doc) { return from_json_impl(doc); }

json config_to_json(const SimConfig& cfg) {
  json j;
  j["frame_len"] = cfg.frame_len;
  j["constellation_k"] = cfg.constellation_k;
  if (cfg.chirp_auto) {
    j["chirp"] = "auto";
  } else {
    j["chirp"] = {{"c1", cfg.c1}, {"c2", cfg.c2}};
  }
  if (cfg.l_cpp) {
    j["l_cpp"] = *cfg.l_cpp;
  } else {
    j["l_cpp"] = "auto";
  }
  j["profile"] = {{"num_paths", cfg.profile.num_paths},
                  {"max_delay", cfg.profile.max_delay},
                  {"max_doppler", cfg.profile.max_doppler},
                  {"power_profile", cfg.profile.power_profile}};
  j["snr_db_grid"] = cfg.snr_db_grid;
  j["num_frames"] = cfg.num_frames;
  j["detectors"] = json::array();
  for (const auto& d : cfg.detectors) {
    j["detectors"].push_back({{"kind", to_string(d.kind)},
                              {"label", d.label},
                              {"max_iter", d.cfg.max_iter},
                              {"tol", d.cfg.tol},
                              {"damping", d.cfg.damping},
                              {"init_variance", d.cfg.init_variance},
                              {"interference", to_string(d.cfg.interference)}});
  }
  j["master_seed"] = cfg.master_seed;
  j["workers"] = cfg.workers;
  j["residual_snr_db"] = cfg.residual_snr_db ? json(*cfg.residual_snr_db) : json(nullptr);
  j["carrier_hz"] = cfg.carrier_hz;
  j["bandwidth_hz"] = cfg.bandwidth_hz;
  return j;
}

std::string canonical_text(const SimConfig& cfg) { return config_to_json(cfg).dump(); }

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string config_hash(const SimConfig& cfg) { return sha256_hex(canonical_text(cfg)); }

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::stringstream ss(key);
  std::string seg;
  std::vector<std::string> segs;
  while (std::getline(ss, seg, '.')) segs.push_back(seg);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string& s = segs[i];
    const bool last = i + 1 == segs.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(s);
      } catch (const std::exception&) {
        throw ConfigError("override '" + key + "': '" + s + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("override '" + key + "': index out of range");
      node = &(*node)[idx];
    } else {
      if (!node->is_object()) *node = json::object();
      node = &(*node)[s];
    }
    if (last) *node = value;
  }
}

SimConfig parse_config(std::string_view text, const std::string& origin,
                       const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigFileError(origin, line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0), e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  try {
    return from_json_impl(doc);
  } catch (const Reader::ConfigError& e) {
    throw ConfigFileError(origin, locate(text, e.key_path), e.what());
  }
}

SimConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path, overrides);
}

}  // namespace afdm::cli

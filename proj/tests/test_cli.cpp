#include "doctest.h"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "afdm/commands.hpp"
#include "afdm/config.hpp"
#include "afdm/selftest.hpp"

using namespace afdm;
using namespace afdm::cli;
namespace fs = std::filesystem;

namespace {

const std::string kExample = std::string(AFDM_SOURCE_DIR) + "/configs/example.json";

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("afdm_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

RunOptions fast_options(const std::string& out_dir) {
  RunOptions o;
  o.config_path = kExample;
  o.out_dir = out_dir;
  o.overrides = {"num_frames=4", "frame_len=32", "profile.max_delay=6", "profile.max_doppler=1"};
  return o;
}

const char* kMinimal = R"({
  "frame_len": 16,
  "snr_db_grid": [10],
  "detectors": [{"kind": "vb"}]
})";

}  // namespace

TEST_CASE("minimal config fills defaults") {
  const SimConfig cfg = parse_config(kMinimal, "mem");
  CHECK(cfg.frame_len == 16);
  CHECK(cfg.constellation_k == 4);
  CHECK(cfg.chirp_auto);
  CHECK(!cfg.l_cpp);
  REQUIRE(cfg.detectors.size() == 1);
  CHECK(cfg.detectors[0].label == "vb-5");
  CHECK(cfg.detectors[0].cfg.max_iter == 5);
}

TEST_CASE("config round trip is a fixed point") {
  const SimConfig a = load_config(kExample);
  const std::string t1 = canonical_text(a);
  const SimConfig b = parse_config(t1, "canonical");
  CHECK(canonical_text(b) == t1);
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 64);

  SimConfig c = a;
  c.chirp_auto = false;
  c.c1 = 0.0234375;
  c.c2 = 1e-3;
  c.l_cpp = 20;
  c.profile.power_profile = {0.5, 0.3, 0.2};
  c.detectors[3].cfg.interference = VbInterference::kAllSymbols;
  c.detectors[3].label = "vb-literal";
  c.residual_snr_db.reset();
  const std::string t2 = canonical_text(c);
  CHECK(canonical_text(parse_config(t2, "canonical")) == t2);
  CHECK(config_hash(c) != config_hash(a));
}

TEST_CASE("sha256 known answer") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("overrides") {
  SimConfig cfg = load_config(kExample, {"snr_db_grid=[10]", "profile.num_paths=5",
                                         "detectors.3.max_iter=3", "detectors.3.label=vb-short",
                                         "master_seed=7"});
  CHECK(cfg.snr_db_grid == std::vector<double>{10.0});
  CHECK(cfg.profile.num_paths == 5);
  CHECK(cfg.detectors[3].cfg.max_iter == 3);
  CHECK(cfg.detectors[3].label == "vb-short");
  CHECK(cfg.master_seed == 7);
  CHECK_THROWS_AS(load_config(kExample, {"snr_db_grid"}), ConfigError);
  CHECK_THROWS_AS(load_config(kExample, {"detectors.9.max_iter=3"}), ConfigError);
  CHECK_THROWS_AS(load_config(kExample, {"detectors.x.max_iter=3"}), ConfigError);
}

TEST_CASE("errors are anchored to lines") {
  const std::string bad_value = "{\n  \"frame_len\": 16,\n  \"num_frames\": \"many\",\n"
                                "  \"detectors\": [{\"kind\": \"vb\"}]\n}";
  try {
    parse_config(bad_value, "cfg.json");
    FAIL("expected a config error");
  } catch (const ConfigFileError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).rfind("cfg.json:3:", 0) == 0);
  }

  const std::string unknown = "{\n  \"frame_len\": 16,\n\n  \"frame_length\": 16\n}";
  try {
    parse_config(unknown, "cfg.json");
    FAIL("expected a config error");
  } catch (const ConfigFileError& e) {
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("frame_length") != std::string::npos);
  }

  const std::string nested = "{\n  \"detectors\": [\n    {\"kind\": \"vb\"},\n"
                             "    {\"kind\": \"ml\"}\n  ]\n}";
  try {
    parse_config(nested, "cfg.json");
    FAIL("expected a config error");
  } catch (const ConfigFileError& e) {
    CHECK(e.line() == 4);
  }

  const std::string syntax = "{\n  \"frame_len\": 16,\n  \"num_frames\": ,\n}";
  try {
    parse_config(syntax, "cfg.json");
    FAIL("expected a config error");
  } catch (const ConfigFileError& e) {
    CHECK(e.line() == 3);
  }

  CHECK_THROWS_AS(parse_config("{\"profile\": {\"num_paths\": 3, \"speed\": 1}}", "m"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"chirp\": \"fast\"}", "m"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"frame_len\": 1, \"detectors\": [{\"kind\": \"vb\"}]}", "m"),
                  ConfigError);

  const std::string invalid = "{\n  \"detectors\": [{\"kind\": \"vb\"}],\n  \"num_frames\": 0\n}";
  try {
    parse_config(invalid, "cfg.json");
    FAIL("expected a config error");
  } catch (const ConfigFileError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("ber command writes hashed, reproducible outputs") {
  TempDir a, b;
  std::ostringstream out, err;
  REQUIRE(cmd_ber(fast_options(a.str()), out, err) == kExitOk);
  CHECK(err.str().empty());
  for (const char* f : {"ber.csv", "result.json", "manifest.json"}) CHECK(fs::exists(a.path / f));
  CHECK(std::distance(fs::directory_iterator(a.path), fs::directory_iterator{}) == 3);

  const std::string csv = slurp(a.path / "ber.csv");
  const auto rows = lines(csv);
  const SimConfig cfg = resolve_config(fast_options(a.str()));
  SimConfig hashed = cfg;
  hashed.workers = 1;
  REQUIRE(rows.size() == 2 + cfg.detectors.size() * cfg.snr_db_grid.size());
  CHECK(rows[0] == "# config_hash: " + config_hash(hashed));
  CHECK(rows[1] == "detector,snr_db,bits,bit_errors,ber,frames,mean_iters,mean_ops");

  const json result = json::parse(slurp(a.path / "result.json"));
  CHECK(result["config_hash"] == config_hash(hashed));
  const json manifest = json::parse(slurp(a.path / "manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(hashed));
  CHECK(manifest["tool_version"] == kToolVersion);
  CHECK(manifest["master_seed"] == cfg.master_seed);
  CHECK(manifest["outputs"].size() == 2);

  auto opts = fast_options(b.str());
  opts.workers = 2;
  REQUIRE(cmd_ber(opts, out, err) == kExitOk);
  CHECK(slurp(b.path / "ber.csv") == csv);
  // result.json echoes the worker count, the hash does not depend on it
  CHECK(json::parse(slurp(b.path / "result.json"))["config_hash"] == result["config_hash"]);

  std::ostringstream vout;
  CHECK(cmd_verify(a.str(), false, vout, err) == kExitOk);
}

TEST_CASE("single-SNR override") {
  TempDir d;
  auto opts = fast_options(d.str());
  opts.overrides.push_back("snr_db_grid=[10]");
  std::ostringstream out, err;
  REQUIRE(cmd_ber(opts, out, err) == kExitOk);
  CHECK(lines(slurp(d.path / "ber.csv")).size() == 2 + 4);
}

TEST_CASE("residuals command") {
  TempDir a, b;
  std::ostringstream out, err;
  REQUIRE(cmd_residuals(fast_options(a.str()), out, err) == kExitOk);
  for (const char* f : {"residuals.csv", "residuals_summary.csv", "result.json", "manifest.json"}) {
    CHECK(fs::exists(a.path / f));
  }
  const auto rows = lines(slurp(a.path / "residuals.csv"));
  CHECK(rows[1] == "detector,trial,iteration,residual");
  // two iterative detectors, 4 trials, 5 iterations each
  CHECK(rows.size() == 2 + 2 * 4 * 5);
  REQUIRE(cmd_residuals(fast_options(b.str()), out, err) == kExitOk);
  CHECK(slurp(b.path / "residuals.csv") == slurp(a.path / "residuals.csv"));
  CHECK(slurp(b.path / "residuals_summary.csv") == slurp(a.path / "residuals_summary.csv"));
  std::ostringstream vout;
  CHECK(cmd_verify(a.str(), true, vout, err) == kExitOk);
  CHECK(json::parse(vout.str())["ok"] == true);
}

TEST_CASE("verify detects tampering") {
  TempDir d;
  std::ostringstream out, err;
  REQUIRE(cmd_ber(fast_options(d.str()), out, err) == kExitOk);
  {
    std::ofstream f(d.path / "ber.csv", std::ios::app);
    f << "vb-5,99,1,1,1,1,1,1\n";
  }
  std::ostringstream vout;
  CHECK(cmd_verify(d.str(), false, vout, err) == kExitFailure);
  CHECK(vout.str().find("FAIL  ber.csv") != std::string::npos);

  fs::remove(d.path / "result.json");
  CHECK(cmd_verify(d.str(), false, vout, err) == kExitFailure);
  fs::remove(d.path / "manifest.json");
  CHECK(cmd_verify(d.str(), false, vout, err) == kExitIo);
}

TEST_CASE("exit codes for bad input") {
  TempDir d;
  std::ostringstream out, err;
  RunOptions o = fast_options(d.str());
  o.config_path = (d.path / "missing.json").string();
  CHECK(cmd_ber(o, out, err) == kExitIo);

  fs::create_directories(d.path);
  {
    std::ofstream f(d.path / "bad.json");
    f << "{\n  \"frame_len\": -4\n}\n";
  }
  o.config_path = (d.path / "bad.json").string();
  o.overrides.clear();
  o.out_dir = (d.path / "out").string();
  std::ostringstream err2;
  CHECK(cmd_ber(o, out, err2) == kExitConfig);
  CHECK(err2.str().find("bad.json:2:") != std::string::npos);
  CHECK(!fs::exists(d.path / "out" / "ber.csv"));
}

TEST_CASE("worker cap from the environment") {
  TempDir d;
  RunOptions o = fast_options(d.str());
  o.workers = 8;
  ::setenv(kWorkerCapEnv, "2", 1);
  CHECK(resolve_config(o).workers == 2);
  ::unsetenv(kWorkerCapEnv);
  CHECK(resolve_config(o).workers == 8);
}

TEST_CASE("selftest passes and catches the injected fault") {
  std::ostringstream out;
  CHECK(cmd_selftest(SelftestOptions{}, false, out) == kExitOk);
  SelftestOptions bad;
  bad.inject_observation_fault = true;
  std::ostringstream out2;
  CHECK(cmd_selftest(bad, true, out2) == kExitFailure);
  const json report = json::parse(out2.str());
  CHECK(report["ok"] == false);
  CHECK(report["first_failure"] == "scalar_observation");
}

TEST_CASE("bundled N=256 config runs to completion") {
  TempDir d;
  RunOptions o;
  o.config_path = std::string(AFDM_SOURCE_DIR) + "/configs/n256_qpsk.json";
  o.out_dir = d.str();
  o.overrides = {"num_frames=2"};
  o.workers = 1;
  std::ostringstream out, err;
  REQUIRE(cmd_ber(o, out, err) == kExitOk);
  const SimConfig cfg = load_config(o.config_path);
  CHECK(cfg.frame_len == 256);
  CHECK(lines(slurp(d.path / "ber.csv")).size() == 2 + cfg.detectors.size() * cfg.snr_db_grid.size());
}

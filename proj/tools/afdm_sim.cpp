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

#include <iostream>

#include "CLI11.hpp"

#include "afdm/commands.hpp"
#include "afdm/selftest.hpp"

int main(int argc, char** argv) {
  using namespace afdm::cli;

  CLI::App app{"AFDM link-level simulator: BER sweeps, residual traces, self checks"};
  app.require_subcommand(1);

  RunOptions run;
  std::uint64_t seed = 0;
  int workers = 0;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--config", run.config_path, "Simulation config (JSON)")->required();
    sub->add_option("--out", run.out_dir, "Output directory")->required();
    sub->add_option("--override", run.overrides, "Dotted key=value override, repeatable");
    sub->add_option("--seed", seed, "Master seed override");
    sub->add_option("--workers", workers, "Worker threads (capped by " + std::string(kWorkerCapEnv) + ")");
  };

  auto* ber = app.add_subcommand("ber", "Monte-Carlo BER sweep; writes ber.csv, result.json, manifest.json");
  add_run_flags(ber);
  auto* residuals = app.add_subcommand("residuals", "Per-iteration residuals of the iterative detectors");
  add_run_flags(residuals);

  bool as_json = false;
  SelftestOptions st;
  auto* selftest = app.add_subcommand("selftest", "Fast invariant suite");
  selftest->add_flag("--json", as_json, "Machine-readable report");
  selftest->add_option("--seed", st.seed, "Seed for the randomized checks");
  selftest->add_flag("--inject-fault", st.inject_observation_fault,
                     "Test hook: corrupt the VB scalar observation")
      ->group("");

  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "Check output files against manifest.json");
  verify->add_option("--out", verify_dir, "Directory holding manifest.json")->required();
  verify->add_flag("--json", as_json, "Machine-readable report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (ber->count("--seed") || residuals->count("--seed")) run.seed = seed;
  if (ber->count("--workers") || residuals->count("--workers")) run.workers = workers;

  if (*ber) return cmd_ber(run, std::cout, std::cerr);
  if (*residuals) return cmd_residuals(run, std::cout, std::cerr);
  if (*selftest) return cmd_selftest(st, as_json, std::cout);
  if (*verify) return cmd_verify(verify_dir, as_json, std::cout, std::cerr);
  return kExitConfig;
}

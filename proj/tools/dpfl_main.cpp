// Copyright 2026 The dpfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Experiment runner. Subcommands:
//   run        -- one federated DP training run from a config file / flags
//   sweep      -- one run per value of a single config key
//   accountant -- standalone (epsilon, delta) query for repeated rounds

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpfl/accountant.hpp"
#include "dpfl/config.hpp"
#include "dpfl/experiment.hpp"

namespace {

// Everything after the subcommand name is handed to the config parser, so
// `dpfl run --config f.ini --sigma.initial 3` works without mirroring every
// option here.
std::vector<std::string> tail_args(int argc, char** argv, int skip) {
  std::vector<std::string> args;
  for (int i = skip; i < argc; ++i) args.emplace_back(argv[i]);
  return args;
}

int run_command(int argc, char** argv) {
  const dpfl::ExperimentConfig cfg = dpfl::parse_experiment_config(tail_args(argc, argv, 2));
  const dpfl::ExperimentResult result = dpfl::run_experiment(cfg);
  std::cout << "completed " << result.records.size() << " rounds; outputs in " << result.out_dir
            << "\n";
  for (std::size_t k = 0; k < result.final_guarantees.size(); ++k) {
    const auto& g = result.final_guarantees[k];
    std::cout << "client " << k << ": rounds=" << result.final_rounds[k]
              << " eps=" << dpfl::format_double(g.epsilon) << " order=" << g.best_order << "\n";
  }
  return 0;
}

int sweep_command(int argc, char** argv) {
  CLI::App app{"parameter sweep"};
  std::string axis;
  std::vector<std::string> values;
  std::string out_root;
  app.add_option("--axis", axis, "dotted config key to vary")->required();
  app.add_option("--values", values, "one run per value")->required()->delimiter(',');
  app.add_option("--out-root", out_root, "parent directory for the runs")->required();
  app.allow_extras();  // remaining flags go to the per-run config parser
  std::vector<std::string> args = tail_args(argc, argv, 2);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  app.parse(reversed);

  const auto results = dpfl::sweep(app.remaining(), axis, values, out_root);
  for (const auto& r : results) std::cout << r.out_dir << ": " << r.records.size() << " rounds\n";
  return 0;
}

int accountant_command(int argc, char** argv) {
  CLI::App app{"epsilon query for T identical sampled-Gaussian rounds"};
  double q = 0.0;
  double sigma = 0.0;
  int rounds = 1;
  double delta = 1e-5;
  app.add_option("--q", q, "sampling ratio in (0,1]")->required();
  app.add_option("--sigma", sigma, "noise scale > 0")->required();
  app.add_option("--rounds", rounds, "number of composed rounds")->required();
  app.add_option("--delta", delta, "target delta (default 1e-5)");
  std::vector<std::string> args = tail_args(argc, argv, 2);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  app.parse(reversed);

  dpfl::PrivacyLedger ledger;
  const dpfl::RoundCost cost{q, sigma};
  for (int t = 0; t < rounds; ++t) ledger = accumulate(ledger, cost);
  const dpfl::DpGuarantee g = to_dp(ledger, delta);
  std::cout << "epsilon=" << dpfl::format_double(g.epsilon) << " delta=" << dpfl::format_double(delta)
            << " best_order=" << g.best_order << "\n";
  return 0;
}

void usage() {
  std::cout << "usage: dpfl <run|sweep|accountant> [options]\n"
               "  run        --config <file> [--<section>.<key> <value> ...]\n"
               "  sweep      --axis <key> --values v1,v2,... --out-root <dir> [config flags]\n"
               "  accountant --q <ratio> --sigma <scale> --rounds <T> [--delta <d>]\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    usage();
    return 2;
  }
  const std::string command = argv[1];
  try {
    if (command == "run") return run_command(argc, argv);
    if (command == "sweep") return sweep_command(argc, argv);
    if (command == "accountant") return accountant_command(argc, argv);
    if (command == "--help" || command == "-h") {
      usage();
      return 0;
    }
    std::cerr << "unknown command '" << command << "'\n";
    usage();
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

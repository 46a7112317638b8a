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

#ifndef DPFL_EXPERIMENT_HPP_
#define DPFL_EXPERIMENT_HPP_

#include <string>
#include <vector>

#include "dpfl/config.hpp"
#include "dpfl/federation.hpp"

namespace dpfl {

/// Deterministic "%.17g" rendering used by every CSV and the manifest.
std::string format_double(double v);

struct ExperimentResult {
  std::vector<RoundRecord> records;
  std::vector<DpGuarantee> final_guarantees;  // per client
  std::vector<int> final_rounds;              // completed rounds per client
  std::string out_dir;
};

/// Wires datasets, model, and federation from the config, runs the loop, and
/// writes metrics.csv, ledger.csv, ledger_summary.csv, partition.csv, and
/// manifest.json under cfg.out_dir (metrics and ledger rows stream out as
/// rounds complete; the manifest is written atomically at the end).
/// Exhausting every client's budget is a normal, successful end state.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Runs one experiment per value, overriding `axis` (a dotted config key);
/// each run lands in <out_root>/<axis>=<value>. Throws std::invalid_argument
/// listing valid keys when axis is not one of them.
std::vector<ExperimentResult> sweep(const std::vector<std::string>& base_args,
                                    const std::string& axis,
                                    const std::vector<std::string>& values,
                                    const std::string& out_root);

}  // namespace dpfl

#endif  // DPFL_EXPERIMENT_HPP_

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

#ifndef DPFL_CONFIG_HPP_
#define DPFL_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dpfl/federation.hpp"

namespace dpfl {

enum class DatasetKind { kSynth, kMnist, kFashionMnist };
enum class ModelKind { kLogistic, kMlp };

/// Fully resolved experiment configuration. Every field mirrors one config
/// key; file values come from an INI-style file with sections ([sigma]
/// initial = 2.0 binds sigma.initial) and flags with the same dotted names
/// override the file.
struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::kSynth;
  // synth source
  int synth_classes = 2;
  int synth_dim = 20;
  int synth_per_class = 500;
  int synth_eval_per_class = 250;
  double synth_separation = 6.0;
  // idx source
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;

  int clients = 10;
  int shards = 400;
  int shards_per_client = 40;

  ModelKind model = ModelKind::kLogistic;
  int hidden = 32;

  FederationConfig federation;

  std::string out_dir;

  /// Resolved key/value echo in schema order (used by the manifest, sweeps,
  /// and byte-stable config dumps).
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
};

/// Every recognized dotted key, in schema order.
const std::vector<std::string>& experiment_config_keys();

/// Parses flags (and an optional "--config <file>") into a validated config.
/// Flags override file values. Throws std::invalid_argument naming the
/// offending key on unknown keys, type errors, or invariant violations.
ExperimentConfig parse_experiment_config(const std::vector<std::string>& args);

}  // namespace dpfl

#endif  // DPFL_CONFIG_HPP_

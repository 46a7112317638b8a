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

#include "dpfl/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "CLI11.hpp"

namespace dpfl {
namespace {

// Raw string/number holders bound to CLI11 before validation.
struct RawConfig {
  std::string dataset_kind = "synth";
  int classes = 2;
  int dim = 20;
  int per_class = 500;
  int eval_per_class = 250;
  double separation = 6.0;
  std::string train_images, train_labels, test_images, test_labels;

  int clients = 10;
  int shards = 400;
  int shards_per_client = 40;

  int lot_size = 78;
  int max_rounds = 100;

  std::string model_kind = "logistic";
  int hidden = 32;

  std::string optimizer_kind = "adam";
  double lr = 0.002;

  std::string clip_mode = "adaptive";
  double clip_factor = 1.0;
  double clip_constant = 1.0;
  double clip_floor = 1e-6;

  std::string sigma_mode = "adaptive";
  double sigma_initial = 6.0;
  double sigma_beta = 0.9999;
  double sigma_constant = 1.1;

  double epsilon = 2.0;
  double delta = 1e-5;

  std::uint64_t seed = 1;
  std::string out;
  std::string config_path;  // consumed before parsing; bound so CLI11 knows the flag
};

// Every option takes the last value given, so later flags override earlier
// ones (and file-derived tokens).
CLI::Option* last(CLI::Option* op) {
  return op->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

void add_options(CLI::App& app, RawConfig& raw) {
  last(app.add_option("--config", raw.config_path));
  last(app.add_option("--dataset.kind", raw.dataset_kind)
           ->check(CLI::IsMember({"synth", "mnist", "fashion_mnist"})));
  last(app.add_option("--dataset.classes", raw.classes));
  last(app.add_option("--dataset.dim", raw.dim));
  last(app.add_option("--dataset.per_class", raw.per_class));
  last(app.add_option("--dataset.eval_per_class", raw.eval_per_class));
  last(app.add_option("--dataset.separation", raw.separation));
  last(app.add_option("--dataset.train_images", raw.train_images));
  last(app.add_option("--dataset.train_labels", raw.train_labels));
  last(app.add_option("--dataset.test_images", raw.test_images));
  last(app.add_option("--dataset.test_labels", raw.test_labels));

  last(app.add_option("--partition.clients", raw.clients));
  last(app.add_option("--partition.shards", raw.shards));
  last(app.add_option("--partition.shards_per_client", raw.shards_per_client));

  last(app.add_option("--federation.lot_size", raw.lot_size));
  last(app.add_option("--federation.max_rounds", raw.max_rounds));

  last(app.add_option("--model.kind", raw.model_kind)->check(CLI::IsMember({"logistic", "mlp"})));
  last(app.add_option("--model.hidden", raw.hidden));

  last(app.add_option("--optimizer.kind", raw.optimizer_kind)
           ->check(CLI::IsMember({"sgd", "adam"})));
  last(app.add_option("--optimizer.lr", raw.lr));

  last(app.add_option("--clip.mode", raw.clip_mode)->check(CLI::IsMember({"adaptive", "constant"})));
  last(app.add_option("--clip.factor", raw.clip_factor));
  last(app.add_option("--clip.constant", raw.clip_constant));
  last(app.add_option("--clip.floor", raw.clip_floor));

  last(app.add_option("--sigma.mode", raw.sigma_mode)
           ->check(CLI::IsMember({"adaptive", "constant"})));
  last(app.add_option("--sigma.initial", raw.sigma_initial));
  last(app.add_option("--sigma.beta", raw.sigma_beta));
  last(app.add_option("--sigma.constant", raw.sigma_constant));

  last(app.add_option("--privacy.epsilon", raw.epsilon));
  last(app.add_option("--privacy.delta", raw.delta));

  last(app.add_option("--run.seed", raw.seed));
  last(app.add_option("--run.out", raw.out));
}

void parse_into(RawConfig& raw, const std::vector<std::string>& args, const char* what) {
  CLI::App app{"experiment config"};
  add_options(app, raw);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    throw std::invalid_argument(std::string("config (") + what + "): " + e.what());
  }
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

// INI-style file: [section] headers, key = value lines, # or ; comments.
// Keys resolve to section.key and must match a flag name; values may be
// quoted. CLI11's own config reader maps sections to subcommands, not to
// dotted option names, so the file is tokenized here instead.
std::vector<std::string> file_to_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open file " + path);
  std::vector<std::string> tokens;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']') {
        throw std::invalid_argument("config: malformed section at " + path + ":" +
                                    std::to_string(lineno));
      }
      section = trim(stripped.substr(1, stripped.size() - 2));
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: expected key = value at " + path + ":" +
                                  std::to_string(lineno));
    }
    const std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config: empty key at " + path + ":" + std::to_string(lineno));
    }
    if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                              (value.front() == '\'' && value.back() == '\''))) {
      value = value.substr(1, value.size() - 2);
    }
    tokens.push_back("--" + (section.empty() ? key : section + "." + key));
    tokens.push_back(value);
  }
  return tokens;
}

void fail(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config: " + key + " " + why);
}

ExperimentConfig finalize(const RawConfig& raw) {
  ExperimentConfig cfg;

  if (raw.dataset_kind == "synth") {
    cfg.dataset = DatasetKind::kSynth;
  } else if (raw.dataset_kind == "mnist") {
    cfg.dataset = DatasetKind::kMnist;
  } else {
    cfg.dataset = DatasetKind::kFashionMnist;
  }

  if (cfg.dataset == DatasetKind::kSynth) {
    if (raw.classes < 2) fail("dataset.classes", "must be >= 2");
    if (raw.dim < 1) fail("dataset.dim", "must be >= 1");
    if (raw.per_class < 1) fail("dataset.per_class", "must be >= 1");
    if (raw.eval_per_class < 2) fail("dataset.eval_per_class", "must be >= 2");
    if (!(raw.separation >= 0)) fail("dataset.separation", "must be >= 0");
  } else {
    if (raw.train_images.empty()) fail("dataset.train_images", "is required for idx datasets");
    if (raw.train_labels.empty()) fail("dataset.train_labels", "is required for idx datasets");
    if (raw.test_images.empty()) fail("dataset.test_images", "is required for idx datasets");
    if (raw.test_labels.empty()) fail("dataset.test_labels", "is required for idx datasets");
  }
  cfg.synth_classes = raw.classes;
  cfg.synth_dim = raw.dim;
  cfg.synth_per_class = raw.per_class;
  cfg.synth_eval_per_class = raw.eval_per_class;
  cfg.synth_separation = raw.separation;
  cfg.train_images = raw.train_images;
  cfg.train_labels = raw.train_labels;
  cfg.test_images = raw.test_images;
  cfg.test_labels = raw.test_labels;

  if (raw.clients < 1) fail("partition.clients", "must be >= 1");
  if (raw.shards < 1) fail("partition.shards", "must be >= 1");
  if (raw.shards_per_client < 1) fail("partition.shards_per_client", "must be >= 1");
  if (static_cast<long long>(raw.clients) * raw.shards_per_client != raw.shards) {
    fail("partition.shards", "must equal clients * shards_per_client");
  }
  cfg.clients = raw.clients;
  cfg.shards = raw.shards;
  cfg.shards_per_client = raw.shards_per_client;

  cfg.model = raw.model_kind == "mlp" ? ModelKind::kMlp : ModelKind::kLogistic;
  if (raw.hidden < 1) fail("model.hidden", "must be >= 1");
  cfg.hidden = raw.hidden;

  FederationConfig& fed = cfg.federation;
  if (raw.lot_size < 1) fail("federation.lot_size", "must be >= 1");
  fed.lot_size = raw.lot_size;
  if (raw.max_rounds < 0) fail("federation.max_rounds", "must be >= 0");
  fed.max_rounds = raw.max_rounds;

  fed.optimizer = raw.optimizer_kind == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam;
  if (!(raw.lr > 0)) fail("optimizer.lr", "must be > 0");
  fed.learning_rate = raw.lr;

  fed.adaptive_clip = raw.clip_mode == "adaptive";
  if (fed.adaptive_clip) {
    if (!(raw.clip_factor > 0)) fail("clip.factor", "must be > 0");
    if (!(raw.clip_floor > 0)) fail("clip.floor", "must be > 0");
  } else if (!(raw.clip_constant > 0)) {
    fail("clip.constant", "must be > 0");
  }
  fed.clip_cfg = ClipConfig{raw.clip_factor, raw.clip_floor};
  fed.constant_clip = raw.clip_constant;

  fed.adaptive_sigma = raw.sigma_mode == "adaptive";
  if (fed.adaptive_sigma) {
    if (!(raw.sigma_initial > 0)) fail("sigma.initial", "must be > 0");
    if (!(raw.sigma_beta > 0) || !(raw.sigma_beta < 1)) fail("sigma.beta", "must lie in (0, 1)");
  } else if (!(raw.sigma_constant >= 0)) {
    fail("sigma.constant", "must be >= 0 (0 disables noise; testing only)");
  }
  fed.sigma_initial = raw.sigma_initial;
  fed.sigma_beta = raw.sigma_beta;
  fed.constant_sigma = raw.sigma_constant;

  if (!(raw.epsilon > 0)) fail("privacy.epsilon", "must be > 0");
  if (!(raw.delta > 0) || !(raw.delta < 1)) fail("privacy.delta", "must lie in (0, 1)");
  fed.budget_epsilon = raw.epsilon;
  fed.budget_delta = raw.delta;

  fed.master_seed = raw.seed;

  cfg.out_dir = raw.out;
  if (cfg.out_dir.empty()) {
    if (const char* root = std::getenv("DPFL_OUT_ROOT")) {
      cfg.out_dir = std::string(root) + "/run-seed" + std::to_string(raw.seed);
    }
  }
  return cfg;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& experiment_config_keys() {
  static const std::vector<std::string> kKeys = {
      "dataset.kind",         "dataset.classes",        "dataset.dim",
      "dataset.per_class",    "dataset.eval_per_class", "dataset.separation",
      "dataset.train_images", "dataset.train_labels",   "dataset.test_images",
      "dataset.test_labels",  "partition.clients",      "partition.shards",
      "partition.shards_per_client", "federation.lot_size", "federation.max_rounds",
      "model.kind",           "model.hidden",           "optimizer.kind",
      "optimizer.lr",         "clip.mode",              "clip.factor",
      "clip.constant",        "clip.floor",             "sigma.mode",
      "sigma.initial",        "sigma.beta",             "sigma.constant",
      "privacy.epsilon",      "privacy.delta",          "run.seed",
      "run.out"};
  return kKeys;
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::to_key_values() const {
  const char* dataset_kind = dataset == DatasetKind::kSynth    ? "synth"
                             : dataset == DatasetKind::kMnist ? "mnist"
                                                              : "fashion_mnist";
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("dataset.kind", dataset_kind);
  kv.emplace_back("dataset.classes", std::to_string(synth_classes));
  kv.emplace_back("dataset.dim", std::to_string(synth_dim));
  kv.emplace_back("dataset.per_class", std::to_string(synth_per_class));
  kv.emplace_back("dataset.eval_per_class", std::to_string(synth_eval_per_class));
  kv.emplace_back("dataset.separation", fmt_double(synth_separation));
  kv.emplace_back("dataset.train_images", train_images);
  kv.emplace_back("dataset.train_labels", train_labels);
  kv.emplace_back("dataset.test_images", test_images);
  kv.emplace_back("dataset.test_labels", test_labels);
  kv.emplace_back("partition.clients", std::to_string(clients));
  kv.emplace_back("partition.shards", std::to_string(shards));
  kv.emplace_back("partition.shards_per_client", std::to_string(shards_per_client));
  kv.emplace_back("federation.lot_size", std::to_string(federation.lot_size));
  kv.emplace_back("federation.max_rounds", std::to_string(federation.max_rounds));
  kv.emplace_back("model.kind", model == ModelKind::kMlp ? "mlp" : "logistic");
  kv.emplace_back("model.hidden", std::to_string(hidden));
  kv.emplace_back("optimizer.kind", federation.optimizer == OptimizerKind::kSgd ? "sgd" : "adam");
  kv.emplace_back("optimizer.lr", fmt_double(federation.learning_rate));
  kv.emplace_back("clip.mode", federation.adaptive_clip ? "adaptive" : "constant");
  kv.emplace_back("clip.factor", fmt_double(federation.clip_cfg.clip_factor));
  kv.emplace_back("clip.constant", fmt_double(federation.constant_clip));
  kv.emplace_back("clip.floor", fmt_double(federation.clip_cfg.floor));
  kv.emplace_back("sigma.mode", federation.adaptive_sigma ? "adaptive" : "constant");
  kv.emplace_back("sigma.initial", fmt_double(federation.sigma_initial));
  kv.emplace_back("sigma.beta", fmt_double(federation.sigma_beta));
  kv.emplace_back("sigma.constant", fmt_double(federation.constant_sigma));
  kv.emplace_back("privacy.epsilon", fmt_double(federation.budget_epsilon));
  kv.emplace_back("privacy.delta", fmt_double(federation.budget_delta));
  kv.emplace_back("run.seed", std::to_string(federation.master_seed));
  kv.emplace_back("run.out", out_dir);
  return kv;
}

ExperimentConfig parse_experiment_config(const std::vector<std::string>& args) {
  // The config file (if any) is applied first, then the flags on top.
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw std::invalid_argument("config: --config needs a path");
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }

  RawConfig raw;
  if (!config_path.empty()) {
    parse_into(raw, file_to_tokens(config_path), "file");
  }
  parse_into(raw, args, "flags");
  return finalize(raw);
}

}  // namespace dpfl

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

#include "dpfl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace dpfl {
namespace {

namespace fs = std::filesystem;

Dataset build_train(const ExperimentConfig& cfg) {
  if (cfg.dataset == DatasetKind::kSynth) {
    RngStream rng(derive_seed(cfg.federation.master_seed, seed_salt::kSynthTrain));
    return synth(cfg.synth_classes, cfg.synth_dim, cfg.synth_per_class, cfg.synth_separation, rng);
  }
  return load_idx(cfg.train_images, cfg.train_labels);
}

Dataset build_eval(const ExperimentConfig& cfg) {
  if (cfg.dataset == DatasetKind::kSynth) {
    RngStream rng(derive_seed(cfg.federation.master_seed, seed_salt::kSynthEval));
    return synth(cfg.synth_classes, cfg.synth_dim, cfg.synth_eval_per_class, cfg.synth_separation,
                 rng);
  }
  return load_idx(cfg.test_images, cfg.test_labels);
}

std::unique_ptr<Model> build_model(const ExperimentConfig& cfg, std::size_t input_dim,
                                   std::size_t classes) {
  if (cfg.model == ModelKind::kMlp) {
    return make_mlp(input_dim, static_cast<std::size_t>(cfg.hidden), classes);
  }
  return make_logistic(input_dim, classes);
}

// Seeded shuffle of the eval pool; first half validates (drives the noise
// scheduler), second half is the reported test set.
void split_val_test(std::size_t eval_size, std::uint64_t master_seed,
                    std::vector<std::uint32_t>& val_idx, std::vector<std::uint32_t>& test_idx) {
  std::vector<std::uint32_t> order(eval_size);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng(derive_seed(master_seed, seed_salt::kValTestSplit));
  rng.shuffle(std::span<std::uint32_t>(order));
  const std::size_t half = eval_size / 2;
  val_idx.assign(order.begin(), order.begin() + half);
  test_idx.assign(order.begin() + half, order.end());
}

class CsvFile {
 public:
  CsvFile(const std::string& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path);
    out_ << header << '\n';
    out_.flush();
  }
  std::ofstream& stream() { return out_; }

 private:
  std::ofstream out_;
};

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.out_dir.empty()) {
    throw std::invalid_argument("config: run.out is required (or set DPFL_OUT_ROOT)");
  }
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(cfg.out_dir);

  const Dataset train = build_train(cfg);
  const Dataset eval = build_eval(cfg);
  RngStream partition_rng(derive_seed(cfg.federation.master_seed, seed_salt::kPartition));
  const Partition partition =
      noniid_partition(train, cfg.clients, cfg.shards, cfg.shards_per_client, partition_rng);
  write_partition_csv(partition, cfg.out_dir + "/partition.csv");

  std::vector<std::uint32_t> val_idx, test_idx;
  split_val_test(eval.examples.size(), cfg.federation.master_seed, val_idx, test_idx);

  const std::size_t input_dim = train.examples.front().features.size();
  const auto model = build_model(cfg, input_dim, static_cast<std::size_t>(train.class_count));

  Simulation sim(*model, train, partition, eval, std::move(val_idx), std::move(test_idx),
                 cfg.federation);

  CsvFile metrics(cfg.out_dir + "/metrics.csv",
                  "round,client_id,eps_dp,best_order,sigma,clip_threshold,realized_lot,"
                  "train_loss,val_loss,test_acc");
  CsvFile ledger(cfg.out_dir + "/ledger.csv", "round,client_id,q,sigma,eps_dp,best_order,delta");
  const double delta = cfg.federation.budget_delta;

  auto observer = [&](const RoundRecord& r) {
    for (const ClientRoundStat& c : r.clients) {
      metrics.stream() << r.round << ',' << c.client_id << ',' << format_double(c.eps_dp) << ','
                       << c.best_order << ',' << format_double(r.sigma) << ','
                       << format_double(c.clip_threshold) << ',' << c.realized_lot << ','
                       << format_double(c.train_loss) << ',' << format_double(r.val_loss) << ','
                       << format_double(r.test_acc) << '\n';
      ledger.stream() << r.round << ',' << c.client_id << ',' << format_double(c.q) << ','
                      << format_double(r.sigma) << ',' << format_double(c.eps_dp) << ','
                      << c.best_order << ',' << format_double(delta) << '\n';
    }
    metrics.stream().flush();
    ledger.stream().flush();
  };

  ExperimentResult result;
  result.out_dir = cfg.out_dir;
  result.records = sim.run(observer);

  CsvFile summary(cfg.out_dir + "/ledger_summary.csv",
                  "client_id,rounds,q,eps_dp,best_order,delta,status");
  for (const ClientState& c : sim.clients()) {
    DpGuarantee g{0.0, delta, 0};
    if (c.ledger.rounds() > 0) g = to_dp(c.ledger, delta);
    summary.stream() << c.client_id << ',' << c.ledger.rounds() << ',' << format_double(c.q) << ','
                     << format_double(g.epsilon) << ',' << g.best_order << ','
                     << format_double(delta) << ','
                     << (c.status == ClientStatus::kActive ? "active" : "exhausted") << '\n';
    result.final_guarantees.push_back(g);
    result.final_rounds.push_back(c.ledger.rounds());
  }

  const double wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::ordered_json manifest;
  for (const auto& [key, value] : cfg.to_key_values()) manifest["config"][key] = value;
  manifest["versions"] = {{"accountant", "1.0"}, {"smallmodel", "1.0"}, {"dpcore", "1.0"},
                          {"scheduler", "1.0"},  {"federation", "1.0"}, {"datasets", "1.0"},
                          {"cli", "1.0"}};
  manifest["rounds_completed"] = result.records.size();
  manifest["wall_clock_seconds"] = wall_seconds;
  manifest["clients"] = nlohmann::ordered_json::array();
  for (const ClientState& c : sim.clients()) {
    const DpGuarantee& g = result.final_guarantees[static_cast<std::size_t>(c.client_id)];
    manifest["clients"].push_back({{"client_id", c.client_id},
                                   {"rounds", c.ledger.rounds()},
                                   {"epsilon", g.epsilon},
                                   {"best_order", g.best_order},
                                   {"delta", delta},
                                   {"status", c.status == ClientStatus::kActive ? "active"
                                                                                : "exhausted"}});
  }
  // Temp file + rename so readers never see a partial manifest.
  const std::string tmp = cfg.out_dir + "/manifest.json.tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open " + tmp);
    out << manifest.dump(2) << '\n';
  }
  fs::rename(tmp, cfg.out_dir + "/manifest.json");
  return result;
}

std::vector<ExperimentResult> sweep(const std::vector<std::string>& base_args,
                                    const std::string& axis,
                                    const std::vector<std::string>& values,
                                    const std::string& out_root) {
  const auto& keys = experiment_config_keys();
  if (std::find(keys.begin(), keys.end(), axis) == keys.end()) {
    std::string msg = "sweep: unknown axis '" + axis + "'; valid keys:";
    for (const auto& k : keys) msg += " " + k;
    throw std::invalid_argument(msg);
  }
  std::vector<ExperimentResult> results;
  for (const std::string& value : values) {
    std::vector<std::string> args = base_args;
    args.push_back("--" + axis);
    args.push_back(value);
    args.push_back("--run.out");
    args.push_back(out_root + "/" + axis + "=" + value);
    results.push_back(run_experiment(parse_experiment_config(args)));
  }
  return results;
}

}  // namespace dpfl

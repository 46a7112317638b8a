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
// The federated round loop: broadcast, local DP rounds per client, budget-
// gated upload, weighted aggregation, server-side validation, and the
// adaptive noise-scale update. In-process simulation with message-shaped
// boundaries: broadcast and upload are explicit value-passing calls, and the
// only client-to-server payload is the parameter vector.

#ifndef DPFL_FEDERATION_HPP_
#define DPFL_FEDERATION_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dpfl/accountant.hpp"
#include "dpfl/datasets.hpp"
#include "dpfl/dpcore.hpp"
#include "dpfl/model.hpp"
#include "dpfl/rng.hpp"
#include "dpfl/scheduler.hpp"

namespace dpfl {

enum class ClientStatus { kActive, kExhausted };

/// Everything a client sends up after a completed round. Parameters plus
/// scalar metrics only; per-sample gradients never leave the client.
struct ClientUpload {
  int client_id = 0;
  ParamVector params;
  DpGuarantee guarantee;
  double q = 0.0;
  double sigma = 0.0;
  double clip_threshold = 0.0;
  int realized_lot = 0;
  double train_loss = 0.0;
};

struct ClientState {
  int client_id = 0;
  std::vector<std::uint32_t> shard;  // indices into the training set
  double q = 0.0;                    // lot_size / |shard|
  ParamVector params;
  OptimizerState opt;
  ClipState clip;
  PrivacyLedger ledger;
  RngStream rng;
  std::vector<double> cached_norms;  // previous round's raw per-sample norms
  double last_sigma = 0.0;           // sigma used in the previous round
  bool has_prev_round = false;
  ClientStatus status = ClientStatus::kActive;
};

/// One row group per completed round.
struct ClientRoundStat {
  int client_id = 0;
  double q = 0.0;
  double eps_dp = 0.0;
  int best_order = 0;
  double clip_threshold = 0.0;
  int realized_lot = 0;
  double train_loss = 0.0;
};

struct RoundRecord {
  int round = 0;
  double sigma = 0.0;
  std::vector<ClientRoundStat> clients;  // uploaders only, sorted by id
  double val_loss = 0.0;
  double test_acc = 0.0;
};

struct FederationConfig {
  int lot_size = 78;
  int max_rounds = 100;
  double budget_epsilon = 2.0;
  double budget_delta = 1e-5;

  bool adaptive_clip = true;
  ClipConfig clip_cfg;            // adaptive mode
  double constant_clip = 1.0;     // constant mode

  bool adaptive_sigma = true;
  double sigma_initial = 6.0;     // adaptive mode
  double sigma_beta = 0.9999;     // adaptive mode
  double constant_sigma = 1.1;    // constant mode; 0 disables noise and accounting (testing)

  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 0.002;

  std::uint64_t master_seed = 1;
};

/// Poisson sampling: each shard element is included independently with
/// probability q, in shard order. Consumes one uniform per element, so the
/// stream position does not depend on the draw outcomes.
std::vector<Example> sample_lot(const Dataset& ds, std::span<const std::uint32_t> shard, double q,
                                RngStream& rng);

/// Weighted average over the uploading subset, weights renormalized to sum
/// to one (exhausted clients' weight is redistributed proportionally).
/// `weights` is indexed by client_id and covers all clients. Uploads are
/// summed in client_id order. Throws std::runtime_error("no uploads") when
/// the subset is empty.
ParamVector aggregate(std::vector<const ClientUpload*> uploads, std::span<const double> weights);

class Simulation {
 public:
  /// `eval` holds the held-out pool; val_idx drives the noise scheduler and
  /// test_idx is the reported test set. Client k's stream is derived from
  /// the master seed with salt kClientBase + k; the model is initialized
  /// from salt kModelInit.
  Simulation(const Model& model, const Dataset& train, Partition partition, const Dataset& eval,
             std::vector<std::uint32_t> val_idx, std::vector<std::uint32_t> test_idx,
             FederationConfig cfg);

  /// Runs the loop: broadcast -> parallel client rounds -> aggregate ->
  /// validate -> sigma update, until max_rounds or every client is
  /// exhausted. The observer (when set) fires once per completed round.
  std::vector<RoundRecord> run(const std::function<void(const RoundRecord&)>& observer = {});

  /// One local round for one client (broadcast params + current sigma in,
  /// optional upload out). The privacy cost is accumulated first and then
  /// compared against the budget; a round that crosses the budget is
  /// discarded (no upload, ledger not committed) and the client becomes
  /// exhausted. An empty lot still performs the noise-only update and still
  /// pays the round's cost. sigma_t = 0 skips accounting entirely (testing
  /// mode) and reports eps 0.
  std::optional<ClientUpload> client_round(ClientState& client, const ParamVector& broadcast,
                                           double sigma_t);

  const std::vector<ClientState>& clients() const { return clients_; }
  std::span<const double> weights() const { return weights_; }
  const ParamVector& global_params() const { return global_params_; }

 private:
  const Model& model_;
  const Dataset& train_;
  const Dataset& eval_;
  std::vector<std::uint32_t> val_idx_;
  std::vector<std::uint32_t> test_idx_;
  FederationConfig cfg_;
  std::vector<ClientState> clients_;
  std::vector<double> weights_;
  ParamVector global_params_;
};

}  // namespace dpfl

#endif  // DPFL_FEDERATION_HPP_

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

#include "dpfl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpfl {

std::vector<Example> sample_lot(const Dataset& ds, std::span<const std::uint32_t> shard, double q,
                                RngStream& rng) {
  if (!(q > 0.0) || !(q <= 1.0)) {
    throw std::invalid_argument("sample_lot: q must lie in (0, 1]");
  }
  std::vector<Example> lot;
  for (std::uint32_t idx : shard) {
    if (rng.uniform() < q) lot.push_back(ds.examples[idx]);
  }
  return lot;
}

ParamVector aggregate(std::vector<const ClientUpload*> uploads, std::span<const double> weights) {
  if (uploads.empty()) throw std::runtime_error("aggregate: no uploads");
  std::sort(uploads.begin(), uploads.end(),
            [](const ClientUpload* a, const ClientUpload* b) { return a->client_id < b->client_id; });

  double total = 0.0;
  for (const ClientUpload* u : uploads) {
    if (u->client_id < 0 || static_cast<std::size_t>(u->client_id) >= weights.size()) {
      throw std::invalid_argument("aggregate: weights do not cover uploader " +
                                  std::to_string(u->client_id));
    }
    total += weights[static_cast<std::size_t>(u->client_id)];
  }

  ParamVector out = zeros(uploads.front()->params.shape);
  const std::size_t dim = out.size();
  for (const ClientUpload* u : uploads) {
    if (u->params.size() != dim) {
      throw std::invalid_argument("aggregate: parameter dimension mismatch");
    }
    const double w = weights[static_cast<std::size_t>(u->client_id)] / total;
    for (std::size_t i = 0; i < dim; ++i) out.values[i] += w * u->params.values[i];
  }
  return out;
}

Simulation::Simulation(const Model& model, const Dataset& train, Partition partition,
                       const Dataset& eval, std::vector<std::uint32_t> val_idx,
                       std::vector<std::uint32_t> test_idx, FederationConfig cfg)
    : model_(model),
      train_(train),
      eval_(eval),
      val_idx_(std::move(val_idx)),
      test_idx_(std::move(test_idx)),
      cfg_(cfg),
      global_params_(zeros(model.shape())) {
  const std::size_t num_clients = partition.client_indices.size();
  if (num_clients == 0) throw std::invalid_argument("Simulation: need at least one client");
  if (cfg_.lot_size < 1) throw std::invalid_argument("Simulation: lot_size must be >= 1");

  RngStream init_rng(derive_seed(cfg_.master_seed, seed_salt::kModelInit));
  global_params_ = model_.init_params(init_rng);

  std::size_t total_examples = 0;
  for (const auto& shard : partition.client_indices) total_examples += shard.size();

  clients_.reserve(num_clients);
  weights_.resize(num_clients);
  for (std::size_t k = 0; k < num_clients; ++k) {
    auto& shard = partition.client_indices[k];
    if (shard.empty()) throw std::invalid_argument("Simulation: client shard must be nonempty");
    if (static_cast<std::size_t>(cfg_.lot_size) > shard.size()) {
      throw std::invalid_argument("Simulation: lot_size exceeds client shard size");
    }
    weights_[k] = static_cast<double>(shard.size()) / static_cast<double>(total_examples);

    const double q = static_cast<double>(cfg_.lot_size) / static_cast<double>(shard.size());
    ClientState client{.client_id = static_cast<int>(k),
                       .shard = std::move(shard),
                       .q = q,
                       .params = global_params_,
                       .opt = cfg_.optimizer == OptimizerKind::kAdam
                                  ? OptimizerState::adam(cfg_.learning_rate, model_.param_count())
                                  : OptimizerState::sgd(cfg_.learning_rate),
                       .clip = ClipState{},
                       .ledger = PrivacyLedger{},
                       .rng = RngStream(derive_seed(cfg_.master_seed, seed_salt::kClientBase + k)),
                       .cached_norms = {},
                       .last_sigma = 0.0,
                       .has_prev_round = false,
                       .status = ClientStatus::kActive};
    if (cfg_.adaptive_clip) {
      client.clip = init_threshold(model_, global_params_, cfg_.clip_cfg, cfg_.lot_size, client.rng);
    } else {
      if (!(cfg_.constant_clip > 0.0)) {
        throw std::invalid_argument("Simulation: constant clip threshold must be > 0");
      }
      client.clip = ClipState{cfg_.constant_clip, 0.0};
    }
    clients_.push_back(std::move(client));
  }
}

std::optional<ClientUpload> Simulation::client_round(ClientState& client,
                                                     const ParamVector& broadcast, double sigma_t) {
  if (client.status != ClientStatus::kActive) return std::nullopt;

  client.params = broadcast;
  const std::vector<Example> lot = sample_lot(train_, client.shard, client.q, client.rng);

  // Threshold noise is drawn before gradient noise, every round.
  if (cfg_.adaptive_clip && client.has_prev_round) {
    client.clip = next_threshold(client.cached_norms, client.clip, cfg_.clip_cfg,
                                 client.last_sigma, cfg_.lot_size, client.rng);
  }
  const double threshold = client.clip.threshold;

  PerSampleBatch batch = per_sample_gradients(model_, client.params, lot);
  const std::vector<double> raw_norms = per_sample_norms(batch.gradients);
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  if (!batch.losses.empty()) {
    train_loss = 0.0;
    for (double l : batch.losses) train_loss += l;
    train_loss /= static_cast<double>(batch.losses.size());
  }

  clip_batch(batch.gradients, threshold);
  const ParamVector update =
      noisy_mean(batch.gradients, threshold, sigma_t, cfg_.lot_size, client.rng, model_.shape());
  apply_update(client.params, client.opt, update);

  DpGuarantee guarantee{0.0, cfg_.budget_delta, 0};
  if (sigma_t > 0.0) {
    // Accumulate first, then gate: the round that crosses the budget is
    // discarded, so no reported epsilon ever exceeds it.
    PrivacyLedger next = accumulate(client.ledger, RoundCost{client.q, sigma_t});
    guarantee = to_dp(next, cfg_.budget_delta);
    if (guarantee.epsilon > cfg_.budget_epsilon) {
      client.status = ClientStatus::kExhausted;
      return std::nullopt;
    }
    client.ledger = std::move(next);
  }

  client.cached_norms = raw_norms;
  client.last_sigma = sigma_t;
  client.has_prev_round = true;

  return ClientUpload{.client_id = client.client_id,
                      .params = client.params,
                      .guarantee = guarantee,
                      .q = client.q,
                      .sigma = sigma_t,
                      .clip_threshold = threshold,
                      .realized_lot = static_cast<int>(lot.size()),
                      .train_loss = train_loss};
}

std::vector<RoundRecord> Simulation::run(const std::function<void(const RoundRecord&)>& observer) {
  std::vector<RoundRecord> records;
  SigmaState sigma_state(cfg_.adaptive_sigma ? cfg_.sigma_initial : 1.0,
                         cfg_.adaptive_sigma ? cfg_.sigma_beta : 0.5);

  for (int t = 0; t < cfg_.max_rounds; ++t) {
    const double sigma_t =
        cfg_.adaptive_sigma ? sigma_state.current_sigma() : cfg_.constant_sigma;

    // Client rounds are independent; each owns its state and stream, so the
    // result does not depend on scheduling. Single-client runs stay serial
    // so the per-sample kernels keep their inner parallelism.
    const std::int64_t num_clients = static_cast<std::int64_t>(clients_.size());
    std::vector<std::optional<ClientUpload>> slots(clients_.size());
    std::exception_ptr error;
    if (num_clients > 1) {
#pragma omp parallel for schedule(dynamic)
      for (std::int64_t k = 0; k < num_clients; ++k) {
        try {
          slots[k] = client_round(clients_[k], global_params_, sigma_t);
        } catch (...) {
#pragma omp critical
          if (!error) error = std::current_exception();
        }
      }
      if (error) std::rethrow_exception(error);
    } else {
      slots[0] = client_round(clients_[0], global_params_, sigma_t);
    }

    std::vector<const ClientUpload*> uploads;
    for (const auto& slot : slots) {
      if (slot.has_value()) uploads.push_back(&*slot);
    }
    if (uploads.empty()) break;  // every client exhausted: terminal state

    global_params_ = aggregate(uploads, weights_);
    const EvalResult val = evaluate(model_, global_params_, eval_.examples, val_idx_);
    const EvalResult test = evaluate(model_, global_params_, eval_.examples, test_idx_);
    if (cfg_.adaptive_sigma) sigma_state.observe_loss(val.mean_loss);

    RoundRecord record;
    record.round = t;
    record.sigma = sigma_t;
    record.val_loss = val.mean_loss;
    record.test_acc = test.accuracy;
    for (const ClientUpload* u : uploads) {
      record.clients.push_back(ClientRoundStat{.client_id = u->client_id,
                                               .q = u->q,
                                               .eps_dp = u->guarantee.epsilon,
                                               .best_order = u->guarantee.best_order,
                                               .clip_threshold = u->clip_threshold,
                                               .realized_lot = u->realized_lot,
                                               .train_loss = u->train_loss});
    }
    std::sort(record.clients.begin(), record.clients.end(),
              [](const ClientRoundStat& a, const ClientRoundStat& b) {
                return a.client_id < b.client_id;
              });
    if (observer) observer(record);
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace dpfl

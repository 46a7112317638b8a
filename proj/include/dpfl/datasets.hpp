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
// IDX image/label loading, the label-sorted non-IID shard partition, and
// synthetic Gaussian-blob datasets for desk-scale runs.

#ifndef DPFL_DATASETS_HPP_
#define DPFL_DATASETS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dpfl/model.hpp"
#include "dpfl/rng.hpp"

namespace dpfl {

struct Dataset {
  std::vector<Example> examples;
  int class_count = 0;
  std::string source;
};

/// Per-client index lists into a parent dataset. Lists are pairwise disjoint
/// and cover the parent exactly.
struct Partition {
  std::vector<std::vector<std::uint32_t>> client_indices;
};

/// Loads an IDX image/label file pair. Pixels are scaled to [0,1] by
/// division by 255; image i pairs with label i. Throws std::runtime_error
/// whose message names the failure: "bad magic", "truncated", or
/// "count mismatch".
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes the dataset back to IDX (big-endian headers, raw bytes; pixel
/// values are re-quantized by round(v * 255)). rows * cols must equal the
/// feature dimension.
void write_idx(const Dataset& ds, std::uint32_t rows, std::uint32_t cols,
               const std::string& images_path, const std::string& labels_path);

/// Label-sorted non-IID partition: stable-sorts indices by label (original
/// index breaks ties), splits them into `shards` contiguous equal pieces,
/// and deals each client `shards_per_client` consecutive shards, with the
/// block order drawn from the seeded stream (a plain uniform shard
/// permutation when shards_per_client is 1). Requires
/// shards * shard_size == |ds| and clients * shards_per_client == shards.
Partition noniid_partition(const Dataset& ds, int clients, int shards, int shards_per_client,
                           RngStream& rng);

/// Gaussian blobs with pairwise class-mean distance `separation` (axis-
/// aligned; requires dim >= classes when separation > 0). Labels come from
/// the generating blob. Per example, features are drawn first, in order.
Dataset synth(int classes, int dim, int per_class, double separation, RngStream& rng);

/// One "client_id,index" row per assigned example.
void write_partition_csv(const Partition& partition, const std::string& path);

}  // namespace dpfl

#endif  // DPFL_DATASETS_HPP_

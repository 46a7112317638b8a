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

#include "dpfl/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace dpfl {
namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("load_idx: truncated file " + path);
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_idx: cannot open " + path);
  return in;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream images = open_input(images_path);
  const std::uint32_t images_magic = read_u32_be(images, images_path);
  if (images_magic != kImagesMagic) {
    throw std::runtime_error("load_idx: bad magic in " + images_path);
  }
  const std::uint32_t count = read_u32_be(images, images_path);
  const std::uint32_t rows = read_u32_be(images, images_path);
  const std::uint32_t cols = read_u32_be(images, images_path);

  std::ifstream labels = open_input(labels_path);
  const std::uint32_t labels_magic = read_u32_be(labels, labels_path);
  if (labels_magic != kLabelsMagic) {
    throw std::runtime_error("load_idx: bad magic in " + labels_path);
  }
  const std::uint32_t label_count = read_u32_be(labels, labels_path);
  if (label_count != count) {
    throw std::runtime_error("load_idx: count mismatch between " + images_path + " and " +
                             labels_path);
  }

  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  Dataset ds;
  ds.source = images_path;
  ds.examples.resize(count);
  std::vector<unsigned char> pixel_buf(dim);
  int max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!images.read(reinterpret_cast<char*>(pixel_buf.data()),
                     static_cast<std::streamsize>(dim))) {
      throw std::runtime_error("load_idx: truncated file " + images_path);
    }
    Example& ex = ds.examples[i];
    ex.features.resize(dim);
    for (std::size_t p = 0; p < dim; ++p) ex.features[p] = pixel_buf[p] / 255.0;
    unsigned char label;
    if (!labels.read(reinterpret_cast<char*>(&label), 1)) {
      throw std::runtime_error("load_idx: truncated file " + labels_path);
    }
    ex.label = label;
    max_label = std::max(max_label, ex.label);
  }
  ds.class_count = max_label + 1;
  return ds;
}

void write_idx(const Dataset& ds, std::uint32_t rows, std::uint32_t cols,
               const std::string& images_path, const std::string& labels_path) {
  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  for (const auto& ex : ds.examples) {
    if (ex.features.size() != dim) {
      throw std::invalid_argument("write_idx: rows*cols does not match feature dimension");
    }
  }
  std::ofstream images(images_path, std::ios::binary);
  if (!images) throw std::runtime_error("write_idx: cannot open " + images_path);
  write_u32_be(images, kImagesMagic);
  write_u32_be(images, static_cast<std::uint32_t>(ds.examples.size()));
  write_u32_be(images, rows);
  write_u32_be(images, cols);
  std::vector<unsigned char> pixel_buf(dim);
  for (const auto& ex : ds.examples) {
    for (std::size_t p = 0; p < dim; ++p) {
      const double v = std::clamp(ex.features[p], 0.0, 1.0);
      pixel_buf[p] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    images.write(reinterpret_cast<const char*>(pixel_buf.data()),
                 static_cast<std::streamsize>(dim));
  }

  std::ofstream labels(labels_path, std::ios::binary);
  if (!labels) throw std::runtime_error("write_idx: cannot open " + labels_path);
  write_u32_be(labels, kLabelsMagic);
  write_u32_be(labels, static_cast<std::uint32_t>(ds.examples.size()));
  for (const auto& ex : ds.examples) {
    const unsigned char label = static_cast<unsigned char>(ex.label);
    labels.write(reinterpret_cast<const char*>(&label), 1);
  }
}

Partition noniid_partition(const Dataset& ds, int clients, int shards, int shards_per_client,
                           RngStream& rng) {
  if (clients < 1 || shards < 1 || shards_per_client < 1) {
    throw std::invalid_argument("noniid_partition: clients, shards, shards_per_client must be >= 1");
  }
  const std::size_t total = ds.examples.size();
  if (shards == 0 || total % static_cast<std::size_t>(shards) != 0) {
    throw std::invalid_argument("noniid_partition: dataset size " + std::to_string(total) +
                                " is not divisible into " + std::to_string(shards) + " shards");
  }
  if (static_cast<long long>(clients) * shards_per_client != shards) {
    throw std::invalid_argument("noniid_partition: clients * shards_per_client must equal shards");
  }
  const std::size_t shard_size = total / static_cast<std::size_t>(shards);

  // Stable label sort: original index is the tiebreaker, so shard boundaries
  // are deterministic.
  std::vector<std::uint32_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&ds](std::uint32_t a, std::uint32_t b) {
    return ds.examples[a].label < ds.examples[b].label;
  });

  // Shards are dealt as contiguous blocks of shards_per_client, block order
  // shuffled by the seeded stream. Contiguity keeps each client's label
  // support narrow, which is the point of the split: a uniform permutation
  // over individual shards would hand nearly every label to every client at
  // the 40-shards-per-client scale. With shards_per_client = 1 this is a
  // plain uniform shard permutation.
  std::vector<std::uint32_t> block_ids(static_cast<std::size_t>(clients));
  std::iota(block_ids.begin(), block_ids.end(), 0);
  rng.shuffle(std::span<std::uint32_t>(block_ids));

  Partition part;
  part.client_indices.resize(static_cast<std::size_t>(clients));
  for (int k = 0; k < clients; ++k) {
    auto& mine = part.client_indices[static_cast<std::size_t>(k)];
    mine.reserve(static_cast<std::size_t>(shards_per_client) * shard_size);
    const std::size_t first_shard =
        static_cast<std::size_t>(block_ids[static_cast<std::size_t>(k)]) * shards_per_client;
    for (int s = 0; s < shards_per_client; ++s) {
      const std::size_t begin = (first_shard + static_cast<std::size_t>(s)) * shard_size;
      for (std::size_t i = 0; i < shard_size; ++i) {
        mine.push_back(order[begin + i]);
      }
    }
  }
  return part;
}

Dataset synth(int classes, int dim, int per_class, double separation, RngStream& rng) {
  if (classes < 1 || dim < 1 || per_class < 0) {
    throw std::invalid_argument("synth: classes, dim must be >= 1 and per_class >= 0");
  }
  if (!(separation >= 0.0)) throw std::invalid_argument("synth: separation must be >= 0");
  if (separation > 0.0 && dim < classes) {
    throw std::invalid_argument("synth: dim must be >= classes when separation > 0");
  }

  // Class c sits at (separation / sqrt(2)) * e_c, which makes every pairwise
  // mean distance exactly `separation`.
  const double offset = separation / std::sqrt(2.0);
  Dataset ds;
  ds.class_count = classes;
  ds.source = "synth";
  ds.examples.reserve(static_cast<std::size_t>(classes) * per_class);
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Example ex;
      ex.features.resize(static_cast<std::size_t>(dim));
      for (double& f : ex.features) f = rng.gaussian(1.0);
      if (separation > 0.0) ex.features[static_cast<std::size_t>(c)] += offset;
      ex.label = c;
      ds.examples.push_back(std::move(ex));
    }
  }
  return ds;
}

void write_partition_csv(const Partition& partition, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_partition_csv: cannot open " + path);
  out << "client_id,index\n";
  for (std::size_t k = 0; k < partition.client_indices.size(); ++k) {
    for (std::uint32_t idx : partition.client_indices[k]) {
      out << k << ',' << idx << '\n';
    }
  }
}

}  // namespace dpfl

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

#include "dpfl/dpcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpfl {
namespace {

constexpr double kClipSlack = 1e-12;

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) {
    throw std::invalid_argument(std::string(what) + " must be > 0, got " + std::to_string(v));
  }
}

}  // namespace

double l2_norm(std::span<const double> values) {
  double sq = 0.0;
  for (double v : values) sq += v * v;
  return std::sqrt(sq);
}

void clip_in_place(ParamVector& gradient, double c) {
  require_positive(c, "clip: threshold");
  const double norm = l2_norm(gradient.values);
  if (!std::isfinite(norm)) throw std::invalid_argument("clip: non-finite gradient");
  const double scale = norm / c;
  // Inputs inside the slack band pass through untouched. The band is what
  // makes clipping bitwise idempotent: a rescaled vector's recomputed norm
  // can sit an ulp above c, and must not trigger a second rescale.
  if (scale <= 1.0 + kClipSlack) return;
  for (double& v : gradient.values) v /= scale;
}

ParamVector clip(const ParamVector& gradient, double c) {
  ParamVector out = gradient;
  clip_in_place(out, c);
  return out;
}

void clip_batch_serial(std::vector<ParamVector>& gradients, double c) {
  for (auto& g : gradients) clip_in_place(g, c);
}

void clip_batch(std::vector<ParamVector>& gradients, double c) {
  const std::int64_t n = static_cast<std::int64_t>(gradients.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      clip_in_place(gradients[i], c);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

std::vector<double> per_sample_norms_serial(const std::vector<ParamVector>& gradients) {
  std::vector<double> norms(gradients.size());
  for (std::size_t i = 0; i < gradients.size(); ++i) norms[i] = l2_norm(gradients[i].values);
  return norms;
}

std::vector<double> per_sample_norms(const std::vector<ParamVector>& gradients) {
  std::vector<double> norms(gradients.size());
  const std::int64_t n = static_cast<std::int64_t>(gradients.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) norms[i] = l2_norm(gradients[i].values);
  return norms;
}

ParamVector noisy_mean(const std::vector<ParamVector>& clipped, double c, double sigma,
                       int lot_size, RngStream& rng,
                       const std::shared_ptr<const ShapeDescriptor>& shape) {
  require_positive(c, "noisy_mean: threshold");
  if (!(sigma >= 0.0)) throw std::invalid_argument("noisy_mean: sigma must be >= 0");
  if (lot_size < 1) throw std::invalid_argument("noisy_mean: lot_size must be >= 1");

  ParamVector out = zeros(shape);
  const std::size_t dim = out.size();
  for (const auto& g : clipped) {
    if (g.size() != dim) throw std::invalid_argument("noisy_mean: gradient dimension mismatch");
    if (l2_norm(g.values) > c + kClipSlack) {
      throw std::invalid_argument("noisy_mean: input exceeds clip bound");
    }
    for (std::size_t i = 0; i < dim; ++i) out.values[i] += g.values[i];
  }
  if (sigma > 0.0) {
    const double stddev = sigma * c;
    for (std::size_t i = 0; i < dim; ++i) out.values[i] += rng.gaussian(stddev);
  }
  const double inv_lot = 1.0 / static_cast<double>(lot_size);
  for (std::size_t i = 0; i < dim; ++i) out.values[i] *= inv_lot;
  return out;
}

ClipState next_threshold(std::span<const double> prev_per_sample_norms, const ClipState& state,
                         const ClipConfig& cfg, double sigma_prev, int lot_size, RngStream& rng) {
  require_positive(cfg.clip_factor, "next_threshold: clip_factor");
  require_positive(cfg.floor, "next_threshold: floor");
  require_positive(state.threshold, "next_threshold: previous threshold");
  if (!(sigma_prev >= 0.0)) throw std::invalid_argument("next_threshold: sigma_prev must be >= 0");
  if (lot_size < 1) throw std::invalid_argument("next_threshold: lot_size must be >= 1");

  double sum = 0.0;
  for (double norm : prev_per_sample_norms) {
    if (!(norm >= 0.0) || !std::isfinite(norm)) {
      throw std::invalid_argument("next_threshold: norms must be finite and >= 0");
    }
    sum += std::min(norm, state.threshold);
  }
  if (sigma_prev > 0.0) {
    sum += rng.gaussian(state.threshold * sigma_prev);
  }
  const double noisy_mean_norm = std::abs(sum / static_cast<double>(lot_size));
  const double threshold = std::max(cfg.clip_factor * noisy_mean_norm, cfg.floor);
  return ClipState{threshold, sigma_prev};
}

ClipState init_threshold(const Model& model, const ParamVector& params, const ClipConfig& cfg,
                         int lot_size, RngStream& rng) {
  require_positive(cfg.clip_factor, "init_threshold: clip_factor");
  require_positive(cfg.floor, "init_threshold: floor");
  if (lot_size < 1) throw std::invalid_argument("init_threshold: lot_size must be >= 1");

  // One lot of synthetic examples; per example, features first, then label.
  std::vector<Example> lot(static_cast<std::size_t>(lot_size));
  for (auto& ex : lot) {
    ex.features.resize(model.input_dim());
    for (double& f : ex.features) f = rng.gaussian(1.0);
    ex.label = static_cast<int>(rng.uniform_int(model.class_count()));
  }

  const PerSampleBatch batch = per_sample_gradients(model, params, lot);
  const std::vector<double> norms = per_sample_norms(batch.gradients);
  double mean = 0.0;
  for (double n : norms) mean += n;
  mean /= static_cast<double>(lot_size);
  return ClipState{std::max(cfg.clip_factor * mean, cfg.floor), 0.0};
}

}  // namespace dpfl

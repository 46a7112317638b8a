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
// Per-sample l2 clipping, noisy gradient aggregation, and the adaptive
// clipping-threshold update that feeds each round's threshold from the
// previous round's noisy mean gradient norm.

#ifndef DPFL_DPCORE_HPP_
#define DPFL_DPCORE_HPP_

#include <memory>
#include <span>
#include <vector>

#include "dpfl/model.hpp"
#include "dpfl/rng.hpp"

namespace dpfl {

struct ClipConfig {
  /// Multiplier applied to the noisy mean gradient norm of the previous
  /// round to obtain the current threshold.
  double clip_factor = 1.0;
  /// Minimum threshold. The additive Gaussian noise can drive the raw update
  /// to zero or below; the floor keeps clipping well defined.
  double floor = 1e-6;
};

/// Current clipping threshold plus the noise scale whose release produced
/// it. previous_sigma is 0 right after init_threshold: the initial threshold
/// comes from synthetic data and involves no noisy release.
struct ClipState {
  double threshold = 1.0;
  double previous_sigma = 0.0;
};

double l2_norm(std::span<const double> values);

/// Scales gradient by 1 / max(1, ||g||_2 / c), so the output norm is at most
/// c (within 1e-12 slack); inputs already within the bound pass through
/// unchanged. Throws on non-finite input.
ParamVector clip(const ParamVector& gradient, double c);
void clip_in_place(ParamVector& gradient, double c);

/// Clips every gradient in the batch. OpenMP kernel plus serial reference.
void clip_batch(std::vector<ParamVector>& gradients, double c);
void clip_batch_serial(std::vector<ParamVector>& gradients, double c);

/// Raw l2 norm of each gradient. OpenMP kernel plus serial reference.
std::vector<double> per_sample_norms(const std::vector<ParamVector>& gradients);
std::vector<double> per_sample_norms_serial(const std::vector<ParamVector>& gradients);

/// (sum of clipped gradients + per-coordinate N(0, (sigma*c)^2)) / lot_size.
///
/// lot_size is the nominal lot size, not the realized sample count, which
/// keeps the mechanism's sensitivity fixed at c / lot_size. An empty batch is
/// allowed and yields pure noise / lot_size. sigma = 0 is a degenerate
/// testing mode that skips the noise draws entirely. Throws if an input
/// exceeds the clip bound beyond 1e-12 slack.
ParamVector noisy_mean(const std::vector<ParamVector>& clipped, double c, double sigma,
                       int lot_size, RngStream& rng,
                       const std::shared_ptr<const ShapeDescriptor>& shape);

/// Next adaptive threshold from the previous round's raw per-sample gradient
/// norms:
///
///   C_t = clip_factor * | (sum_i min(norm_i, C_prev) + N(0, (C_prev*sigma_prev)^2)) / L |
///
/// then clamped to >= floor. The norms are clipped by the previous threshold
/// before averaging; the absolute value realizes the l2 norm of the scalar
/// noisy mean. The returned state carries the new threshold and sigma_prev.
ClipState next_threshold(std::span<const double> prev_per_sample_norms, const ClipState& state,
                         const ClipConfig& cfg, double sigma_prev, int lot_size, RngStream& rng);

/// Initial threshold from one synthetic lot (standard-normal features,
/// uniform labels): clip_factor times the mean per-sample gradient norm at
/// `params`, floored. Synthetic inputs touch no data, so no privacy cost.
ClipState init_threshold(const Model& model, const ParamVector& params, const ClipConfig& cfg,
                         int lot_size, RngStream& rng);

}  // namespace dpfl

#endif  // DPFL_DPCORE_HPP_

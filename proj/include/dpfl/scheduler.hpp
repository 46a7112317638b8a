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

#ifndef DPFL_SCHEDULER_HPP_
#define DPFL_SCHEDULER_HPP_

#include <vector>

namespace dpfl {

/// Server-side noise-scale decay driven by validation loss. The scale decays
/// by beta whenever the last four recorded losses are strictly decreasing;
/// windows overlap, so a long monotone run decays every round. The history
/// starts with three +infinity sentinels; a window still containing a
/// sentinel never fires (an infinite entry is not a recorded drop), so the
/// earliest possible decay is at the fourth observed loss.
///
/// Invariant: sigma == sigma_initial * beta^decay_count, where the right
/// side is evaluated by repeated multiplication in decay order; the identity
/// is bitwise with respect to that evaluation order.
class SigmaState {
 public:
  SigmaState(double sigma_initial, double beta);

  /// Records one validation loss and applies the decay rule. Throws
  /// std::invalid_argument on a non-finite loss.
  void observe_loss(double loss);

  double current_sigma() const { return sigma_; }
  double sigma_initial() const { return sigma_initial_; }
  double beta() const { return beta_; }
  int decay_count() const { return decay_count_; }

  /// Full recorded history including the three initial sentinels.
  const std::vector<double>& loss_history() const { return losses_; }

 private:
  double sigma_;
  double sigma_initial_;
  double beta_;
  int decay_count_ = 0;
  std::vector<double> losses_;
};

}  // namespace dpfl

#endif  // DPFL_SCHEDULER_HPP_

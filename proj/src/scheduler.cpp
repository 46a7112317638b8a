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

#include "dpfl/scheduler.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpfl {

SigmaState::SigmaState(double sigma_initial, double beta)
    : sigma_(sigma_initial), sigma_initial_(sigma_initial), beta_(beta) {
  if (!(sigma_initial > 0.0)) {
    throw std::invalid_argument("SigmaState: initial sigma must be > 0");
  }
  if (!(beta > 0.0) || !(beta < 1.0)) {
    throw std::invalid_argument("SigmaState: beta must lie in (0, 1)");
  }
  losses_.assign(3, std::numeric_limits<double>::infinity());
}

void SigmaState::observe_loss(double loss) {
  if (!std::isfinite(loss)) {
    throw std::invalid_argument("SigmaState: loss must be finite");
  }
  losses_.push_back(loss);
  const std::size_t n = losses_.size();
  // A window still holding an initial sentinel never fires: an infinite
  // entry is not a recorded drop, so the first possible decay comes at the
  // fourth recorded loss. Observed losses are finite, hence only the oldest
  // slot can be infinite.
  const bool decreasing = std::isfinite(losses_[n - 4]) && losses_[n - 4] > losses_[n - 3] &&
                          losses_[n - 3] > losses_[n - 2] && losses_[n - 2] > losses_[n - 1];
  if (decreasing) {
    sigma_ *= beta_;
    decay_count_ += 1;
  }
}

}  // namespace dpfl

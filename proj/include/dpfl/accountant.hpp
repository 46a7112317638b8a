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
// Renyi-DP accountant for the sampled Gaussian mechanism: per-round RDP cost
// at integer orders, additive composition across rounds with heterogeneous
// noise scales, and conversion of the accumulated cost to an (epsilon,
// delta)-DP guarantee minimized over the order grid.

#ifndef DPFL_ACCOUNTANT_HPP_
#define DPFL_ACCOUNTANT_HPP_

#include <cstdint>
#include <vector>

namespace dpfl {

/// Integer Renyi orders over which conversions minimize. Orders must be
/// integers >= 2, strictly increasing.
class RdpOrderGrid {
 public:
  /// Default grid {2, 3, ..., 64}.
  RdpOrderGrid();
  explicit RdpOrderGrid(std::vector<int> orders);

  const std::vector<int>& orders() const { return orders_; }
  std::size_t size() const { return orders_.size(); }

 private:
  std::vector<int> orders_;
};

/// One subsampled-Gaussian release: sampling ratio q in (0,1] (q = 0 accepted
/// as a free degenerate round) and noise scale sigma > 0.
struct RoundCost {
  double q = 0.0;
  double sigma = 1.0;
};

/// Accumulated RDP cost over an order grid. Immutable snapshot; accumulation
/// returns a new value, so ledgers are safe to share across threads.
///
/// An entry of +infinity marks an order whose per-round cost overflowed even
/// in log space; such orders are skipped during conversion instead of
/// aborting the whole ledger.
class PrivacyLedger {
 public:
  PrivacyLedger();
  explicit PrivacyLedger(RdpOrderGrid grid);

  const RdpOrderGrid& grid() const { return grid_; }
  const std::vector<double>& rdp_eps() const { return rdp_eps_; }
  int rounds() const { return rounds_; }

  friend PrivacyLedger accumulate(const PrivacyLedger& ledger, const RoundCost& cost);

 private:
  RdpOrderGrid grid_;
  std::vector<double> rdp_eps_;
  int rounds_ = 0;
};

/// (epsilon, delta)-DP guarantee together with the grid order attaining it.
struct DpGuarantee {
  double epsilon = 0.0;
  double delta = 0.0;
  int best_order = 0;
};

/// RDP cost of one sampled-Gaussian round at the given integer order:
///
///   (1/(a-1)) * log A_a,
///   A_a = sum_{k=0}^{a} C(a,k) (1-q)^{a-k} q^k exp((k^2-k)/(2 sigma^2)).
///
/// Evaluated in log space (log-gamma binomials, max-shifted log-sum-exp) so
/// the result stays finite and accurate for orders up to 64 and sigma down to
/// 0.3, where C(64,32) and the exponential factors overflow naive doubles.
/// The k = 0 and k = 1 terms are folded into a log1p of the excess above the
/// binomial mass, which keeps full relative precision when A_a is close to 1.
///
/// Returns a nonnegative value; +infinity signals that this (q, sigma, order)
/// combination overflows even after stabilization and the order must be
/// skipped. Throws std::invalid_argument for order < 2, q outside [0, 1], or
/// sigma <= 0.
double sgm_rdp(const RoundCost& cost, int order);

/// Adds one round's cost at every grid order (additive RDP composition).
/// Orders already unusable stay unusable. Throws on invalid cost.
PrivacyLedger accumulate(const PrivacyLedger& ledger, const RoundCost& cost);

/// Converts accumulated RDP to (epsilon, delta)-DP:
///
///   epsilon = min over usable orders of  rdp_eps[a] + log(1/delta)/(a-1)
///
/// with the smallest attaining order reported on ties. Throws
/// std::invalid_argument for delta outside (0,1) and std::runtime_error when
/// every order is unusable.
DpGuarantee to_dp(const PrivacyLedger& ledger, double delta);

/// Largest T such that T identical rounds of `cost` still satisfy
/// epsilon <= budget; 0 if a single round already exceeds it (any budget
/// below the one-round conversion floor, including 0, yields 0). Returns
/// INT64_MAX when the cost is free at some order (q = 0) and the budget can
/// never be exhausted.
std::int64_t rounds_until_budget(const RoundCost& cost, double delta, double budget,
                                 const RdpOrderGrid& grid = RdpOrderGrid());

}  // namespace dpfl

#endif  // DPFL_ACCOUNTANT_HPP_

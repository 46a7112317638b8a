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
// Test-only 100-decimal-digit reference for the accountant. Deliberately
// independent of the production path: the bound is evaluated directly in
// product form (exact running binomials, explicit powers, one exp per
// sigma), with no log-space stabilization, and only the final result is
// rounded to double.

#ifndef DPFL_TESTS_ORACLE_MP_HPP_
#define DPFL_TESTS_ORACLE_MP_HPP_

#include <cstdint>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace mp_oracle {

using Real = boost::multiprecision::cpp_bin_float_100;

// x^e with the x = 0, e = 0 corner pinned to 1 (q = 1 hits it).
inline Real ipow(const Real& x, int e) {
  if (e == 0) return Real(1);
  return pow(x, e);
}

/// (1/(a-1)) * log sum_{k=0}^{a} C(a,k) (1-q)^{a-k} q^k exp((k^2-k)/(2 s^2)),
/// summed term by term in 100-digit arithmetic.
inline Real sgm_rdp(const Real& q, const Real& sigma, int order) {
  if (q == 0) return Real(0);
  const Real e1 = exp(Real(1) / (2 * sigma * sigma));
  const Real e2 = e1 * e1;
  Real a_sum = 0;
  Real binom = 1;  // C(order, k)
  Real fac = 1;    // exp((k^2 - k)/(2 sigma^2)), advanced via fac *= e2^k
  Real gpow = 1;   // e2^k
  for (int k = 0; k <= order; ++k) {
    a_sum += binom * ipow(1 - q, order - k) * ipow(q, k) * fac;
    binom = binom * (order - k) / (k + 1);
    fac *= gpow;
    gpow *= e2;
  }
  return log(a_sum) / (order - 1);
}

struct DpResult {
  Real epsilon;
  int best_order;
};

/// min over orders of rdp[i] + log(1/delta)/(order_i - 1); smallest order
/// wins ties.
inline DpResult to_dp(const std::vector<Real>& rdp, const std::vector<int>& orders,
                      const Real& delta) {
  const Real log_inv_delta = log(1 / delta);
  DpResult best{Real(0), -1};
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const Real eps = rdp[i] + log_inv_delta / (orders[i] - 1);
    if (best.best_order < 0 || eps < best.epsilon) {
      best.epsilon = eps;
      best.best_order = orders[i];
    }
  }
  return best;
}

/// Epsilon after T identical rounds, composed by repeated addition.
inline DpResult compose_identical(const Real& q, const Real& sigma, int rounds,
                                  const Real& delta, const std::vector<int>& orders) {
  std::vector<Real> per_round(orders.size());
  for (std::size_t i = 0; i < orders.size(); ++i) per_round[i] = sgm_rdp(q, sigma, orders[i]);
  std::vector<Real> rdp(orders.size(), Real(0));
  for (int t = 0; t < rounds; ++t) {
    for (std::size_t i = 0; i < orders.size(); ++i) rdp[i] += per_round[i];
  }
  return to_dp(rdp, orders, delta);
}

/// One-round-at-a-time scan: first T whose epsilon exceeds the budget, plus
/// the epsilon at T and at T-1.
struct BudgetScan {
  int first_exceeding_round;  // 1-based round count
  Real eps_at_exceed;
  Real eps_before;  // epsilon after first_exceeding_round - 1 rounds
};

inline BudgetScan scan_until_budget(const Real& q, const Real& sigma, const Real& delta,
                                    const Real& budget, const std::vector<int>& orders,
                                    int max_rounds = 1000000) {
  std::vector<Real> per_round(orders.size());
  for (std::size_t i = 0; i < orders.size(); ++i) per_round[i] = sgm_rdp(q, sigma, orders[i]);
  std::vector<Real> rdp(orders.size(), Real(0));
  Real prev_eps = 0;
  for (int t = 1; t <= max_rounds; ++t) {
    for (std::size_t i = 0; i < orders.size(); ++i) rdp[i] += per_round[i];
    const DpResult r = to_dp(rdp, orders, delta);
    if (r.epsilon > budget) return BudgetScan{t, r.epsilon, prev_eps};
    prev_eps = r.epsilon;
  }
  return BudgetScan{-1, Real(0), prev_eps};
}

inline std::vector<int> default_orders() {
  std::vector<int> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  return orders;
}

}  // namespace mp_oracle

#endif  // DPFL_TESTS_ORACLE_MP_HPP_

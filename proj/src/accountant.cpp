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

#include "dpfl/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dpfl {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(expm1(f)) for f > 0 without overflow; above 36 the -1 is below one ulp.
double log_expm1(double f) {
  if (f > 36.0) return f;
  return std::log(std::expm1(f));
}

double log_binom(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

void validate_cost(const RoundCost& cost, const char* who) {
  if (!(cost.q >= 0.0) || !(cost.q <= 1.0)) {
    throw std::invalid_argument(std::string(who) + ": sampling ratio q must lie in [0, 1], got " +
                                std::to_string(cost.q));
  }
  if (!(cost.sigma > 0.0)) {
    throw std::invalid_argument(std::string(who) + ": noise scale sigma must be > 0, got " +
                                std::to_string(cost.sigma));
  }
}

}  // namespace

RdpOrderGrid::RdpOrderGrid() {
  orders_.reserve(63);
  for (int a = 2; a <= 64; ++a) orders_.push_back(a);
}

RdpOrderGrid::RdpOrderGrid(std::vector<int> orders) : orders_(std::move(orders)) {
  if (orders_.empty()) throw std::invalid_argument("RdpOrderGrid: grid must be nonempty");
  int prev = 1;
  for (int a : orders_) {
    if (a < 2) throw std::invalid_argument("RdpOrderGrid: orders must be integers >= 2");
    if (a <= prev) throw std::invalid_argument("RdpOrderGrid: orders must be strictly increasing");
    prev = a;
  }
}

PrivacyLedger::PrivacyLedger() : PrivacyLedger(RdpOrderGrid()) {}

PrivacyLedger::PrivacyLedger(RdpOrderGrid grid)
    : grid_(std::move(grid)), rdp_eps_(grid_.size(), 0.0) {}

double sgm_rdp(const RoundCost& cost, int order) {
  if (order < 2) {
    throw std::invalid_argument("sgm_rdp: order must be an integer >= 2, got " +
                                std::to_string(order));
  }
  validate_cost(cost, "sgm_rdp");

  if (cost.q == 0.0) return 0.0;  // only the k = 0 term survives, A = 1

  const double inv_two_sigma_sq = 1.0 / (2.0 * cost.sigma * cost.sigma);
  if (cost.q == 1.0) {
    // Plain Gaussian mechanism: A = exp((a^2 - a)/(2 sigma^2)), so the cost
    // reduces to a/(2 sigma^2) exactly.
    const double eps = static_cast<double>(order) * inv_two_sigma_sq;
    return std::isfinite(eps) ? eps : kInf;
  }

  // A - 1 = sum_{k=2}^{a} C(a,k) (1-q)^{a-k} q^k expm1((k^2-k)/(2 sigma^2));
  // the k = 0,1 terms cancel against the binomial mass since their exponent
  // is zero. Summed in log space with a max shift.
  const double log_q = std::log(cost.q);
  const double log_1mq = std::log1p(-cost.q);
  std::vector<double> log_terms;
  log_terms.reserve(static_cast<std::size_t>(order) - 1);
  double max_term = -kInf;
  for (int k = 2; k <= order; ++k) {
    const double f = (static_cast<double>(k) * k - k) * inv_two_sigma_sq;
    double lt = log_binom(order, k) + k * log_q + log_expm1(f);
    if (order - k > 0) lt += (order - k) * log_1mq;
    log_terms.push_back(lt);
    max_term = std::max(max_term, lt);
  }
  if (!std::isfinite(max_term)) return max_term > 0 ? kInf : 0.0;

  double sum = 0.0;
  for (double lt : log_terms) sum += std::exp(lt - max_term);
  const double log_excess = max_term + std::log(sum);  // log(A - 1)

  const double log_a = log_excess > 36.0 ? log_excess : std::log1p(std::exp(log_excess));
  const double eps = log_a / (order - 1);
  if (!std::isfinite(eps)) return kInf;
  return std::max(eps, 0.0);
}

PrivacyLedger accumulate(const PrivacyLedger& ledger, const RoundCost& cost) {
  validate_cost(cost, "accumulate");
  PrivacyLedger out = ledger;
  const auto& orders = out.grid_.orders();
  for (std::size_t i = 0; i < orders.size(); ++i) {
    out.rdp_eps_[i] += sgm_rdp(cost, orders[i]);
  }
  out.rounds_ += 1;
  return out;
}

DpGuarantee to_dp(const PrivacyLedger& ledger, double delta) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("to_dp: delta must lie in (0, 1), got " + std::to_string(delta));
  }
  const double log_inv_delta = std::log(1.0 / delta);
  const auto& orders = ledger.grid().orders();
  const auto& rdp = ledger.rdp_eps();

  double best = kInf;
  int best_order = 0;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (!std::isfinite(rdp[i])) continue;  // order overflowed, skip
    const double eps = rdp[i] + log_inv_delta / (orders[i] - 1);
    if (eps < best) {  // strict: smallest order wins ties
      best = eps;
      best_order = orders[i];
    }
  }
  if (best_order == 0) {
    throw std::runtime_error("to_dp: no usable order in ledger (all overflowed)");
  }
  return DpGuarantee{best, delta, best_order};
}

std::int64_t rounds_until_budget(const RoundCost& cost, double delta, double budget,
                                 const RdpOrderGrid& grid) {
  if (!(budget >= 0.0)) {
    throw std::invalid_argument("rounds_until_budget: budget must be >= 0");
  }
  validate_cost(cost, "rounds_until_budget");
  const double log_inv_delta = std::log(1.0 / delta);
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("rounds_until_budget: delta must lie in (0, 1)");
  }

  const auto& orders = grid.orders();
  std::vector<double> per_round(orders.size());
  double min_usable = kInf;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    per_round[i] = sgm_rdp(cost, orders[i]);
    if (std::isfinite(per_round[i])) min_usable = std::min(min_usable, per_round[i]);
  }
  if (!std::isfinite(min_usable)) return 0;  // every order overflows in one round

  auto eps_at = [&](std::int64_t t) {
    double best = kInf;
    for (std::size_t i = 0; i < orders.size(); ++i) {
      if (!std::isfinite(per_round[i])) continue;
      const double eps = static_cast<double>(t) * per_round[i] + log_inv_delta / (orders[i] - 1);
      best = std::min(best, eps);
    }
    return best;
  };

  if (eps_at(1) > budget) return 0;
  if (min_usable == 0.0) return std::numeric_limits<std::int64_t>::max();  // free rounds (q = 0)

  std::int64_t lo = 1;  // eps(lo) <= budget
  std::int64_t hi = 2;
  while (eps_at(hi) <= budget) {
    lo = hi;
    if (hi > (std::numeric_limits<std::int64_t>::max() >> 1)) {
      return std::numeric_limits<std::int64_t>::max();
    }
    hi <<= 1;
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (eps_at(mid) <= budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace dpfl

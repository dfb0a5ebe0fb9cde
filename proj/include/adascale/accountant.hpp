// Copyright 2026 The AdaScale Authors
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
// Renyi differential privacy accounting for the Poisson-sampled Gaussian
// mechanism at integer orders, with additive composition across rounds and
// conversion to (epsilon, delta)-DP.

#ifndef ADASCALE_ACCOUNTANT_HPP
#define ADASCALE_ACCOUNTANT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace adascale {

// Integer Renyi order alpha >= 2.
struct RdpOrder {
  int alpha;

  explicit RdpOrder(int a) : alpha(a) {
    if (a < 2) {
      throw std::invalid_argument("RdpOrder: alpha must be an integer >= 2, got " +
                                  std::to_string(a));
    }
  }
};

// Parameters of one sampled-Gaussian query: Poisson sampling rate q in (0, 1]
// and the dimensionless effective noise multiplier sigma_eff > 0.
struct SgmParams {
  double q;
  double sigma_eff;

  SgmParams(double q_in, double sigma_in) : q(q_in), sigma_eff(sigma_in) {
    if (!(q > 0.0) || !(q <= 1.0)) {
      throw std::invalid_argument("SgmParams: q must lie in (0, 1], got " +
                                  std::to_string(q_in));
    }
    if (!(sigma_eff > 0.0)) {
      throw std::invalid_argument("SgmParams: sigma_eff must be > 0, got " +
                                  std::to_string(sigma_in));
    }
  }
};

// Converted DP guarantee; `order` records the Renyi order the conversion was
// evaluated at. Epsilon is reported as computed and may be negative for tiny
// rho; callers treating it as a budget may clamp at zero.
struct DpGuarantee {
  double epsilon;
  double delta;
  int order;
};

// Per-device cumulative RDP at one fixed order. Value type: composition
// returns an updated copy.
struct PrivacyLedger {
  std::vector<double> per_device_rdp;
  RdpOrder alpha;
  int rounds_accumulated = 0;

  PrivacyLedger(std::size_t num_devices, RdpOrder order)
      : per_device_rdp(num_devices, 0.0), alpha(order) {}
};

namespace detail {

// log C(n, k). Exact 64-bit integer arithmetic up to n = 60 (the largest n
// for which the running product cannot overflow), log-gamma above.
inline double log_binomial(int n, int k) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  if (n <= 60) {
    unsigned long long c = 1;
    const int kk = std::min(k, n - k);
    for (int i = 1; i <= kk; ++i) {
      c = c * static_cast<unsigned long long>(n - kk + i) /
          static_cast<unsigned long long>(i);
    }
    return std::log(static_cast<double>(c));
  }
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace detail

// RDP of the sampled Gaussian mechanism at integer order alpha:
//   rho = A_alpha / (alpha - 1),
//   A_alpha = ln sum_{k=0}^{alpha} C(alpha,k) (1-q)^{alpha-k} q^k
//             exp((k^2 - k) / (2 sigma_eff^2)).
// The binomial weights sum to one and the k = 0, 1 exponents vanish, so
//   A_alpha = log1p( sum_{k>=2} w_k (e^{b_k} - 1) )
// with each addend evaluated as exp(log w_k + b_k) * (-expm1(-b_k)). That
// form keeps full relative precision when the leakage is tiny and cannot
// overflow while log w_k + b_k stays below ~650; beyond that the max-shifted
// log-sum-exp over all k takes over (A_alpha itself is then >= 650 and the
// shift absorbs exponents like (alpha^2 - alpha)/(2 sigma^2) for sigma as
// small as 0.1 and alpha up to a few hundred). The ln(1-q) factor is only
// attached for k < alpha, where its coefficient is nonzero, so q = 1 falls
// out of the same expression: only the k = alpha term survives, giving the
// plain Gaussian-mechanism value alpha / (2 sigma^2).
inline double rdp_of_sgm(RdpOrder order, SgmParams params) {
  const int alpha = order.alpha;
  const double log_q = std::log(params.q);
  const double log_1mq = std::log1p(-params.q);  // -inf at q = 1
  const double inv_two_sigma_sq =
      1.0 / (2.0 * params.sigma_eff * params.sigma_eff);

  struct Arg {
    double log_w;
    double b;
  };
  std::vector<Arg> args;
  args.reserve(alpha + 1);
  double shift = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= alpha; ++k) {
    double lw = detail::log_binomial(alpha, k);
    if (k < alpha) {
      if (params.q == 1.0) continue;  // zero weight
      lw += (alpha - k) * log_1mq;
    }
    if (k > 0) lw += k * log_q;
    const double b = static_cast<double>(k) * (k - 1) * inv_two_sigma_sq;
    args.push_back({lw, b});
    shift = std::max(shift, lw + b);
  }

  double log_a_alpha;
  if (shift <= 650.0) {
    double d = 0.0;
    for (const Arg& a : args) {
      if (a.b > 0.0) d += std::exp(a.log_w + a.b) * (-std::expm1(-a.b));
    }
    log_a_alpha = std::log1p(d);
  } else {
    double sum = 0.0;
    for (const Arg& a : args) sum += std::exp(a.log_w + a.b - shift);
    log_a_alpha = shift + std::log(sum);
  }
  return log_a_alpha / (alpha - 1);
}

// Additive composition: entrywise ledger + round_increments, one more round.
inline PrivacyLedger compose(const PrivacyLedger& ledger,
                             const std::vector<double>& round_increments) {
  if (round_increments.size() != ledger.per_device_rdp.size()) {
    throw std::invalid_argument(
        "compose: increment vector length " +
        std::to_string(round_increments.size()) + " != ledger size " +
        std::to_string(ledger.per_device_rdp.size()));
  }
  for (double r : round_increments) {
    if (!(r >= 0.0)) {
      throw std::invalid_argument("compose: negative RDP increment " +
                                  std::to_string(r));
    }
  }
  PrivacyLedger out = ledger;
  for (std::size_t m = 0; m < out.per_device_rdp.size(); ++m) {
    out.per_device_rdp[m] += round_increments[m];
  }
  out.rounds_accumulated += 1;
  return out;
}

// (alpha, rho)-RDP implies (epsilon, delta)-DP with
//   epsilon = rho + ln((alpha-1)/alpha) - (ln delta + ln alpha) / (alpha - 1).
inline DpGuarantee rdp_to_dp(double rho, RdpOrder order, double delta) {
  if (!(rho >= 0.0)) {
    throw std::invalid_argument("rdp_to_dp: rho must be >= 0, got " +
                                std::to_string(rho));
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("rdp_to_dp: delta must lie in (0, 1), got " +
                                std::to_string(delta));
  }
  const double alpha = static_cast<double>(order.alpha);
  const double epsilon =
      rho + std::log((alpha - 1.0) / alpha) -
      (std::log(delta) + std::log(alpha)) / (alpha - 1.0);
  return DpGuarantee{epsilon, delta, order.alpha};
}

// Minimum-epsilon conversion over a ledger tracked at several orders.
inline DpGuarantee best_dp_over_orders(
    const std::map<int, double>& rho_at_orders, double delta) {
  if (rho_at_orders.empty()) {
    throw std::invalid_argument("best_dp_over_orders: empty order map");
  }
  bool first = true;
  DpGuarantee best{0.0, delta, 0};
  for (const auto& [alpha, rho] : rho_at_orders) {
    const DpGuarantee g = rdp_to_dp(rho, RdpOrder(alpha), delta);
    if (first || g.epsilon < best.epsilon) {
      best = g;
      first = false;
    }
  }
  return best;
}

}  // namespace adascale

#endif  // ADASCALE_ACCOUNTANT_HPP

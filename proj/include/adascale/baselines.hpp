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
// Comparison methods: closed-form EqualAlloc, the offline Optimal oracle via
// Lagrangian dual decomposition, and budget-tracking EstimFuture.
//
// The offline problem
//
//   min sum_t sum_m rho_alpha(q_m, sigma_{m,t}(x_t))
//   s.t. sum_t c_t (1/x_t - 1/x_max) <= T nu,  0 < x_t <= x_max
//
// decouples across rounds once the constraint is priced by a multiplier mu.
// In the rescaled variable y = x_t / c_t the per-round leakage is the same
// function R(y) for every round (sigma_m = kappa~_m / sqrt(y) with
// kappa~_m = M B_m / (G sqrt(2 d)) independent of the channel), so each inner
// subproblem has its stationary point at the single root of
// y^2 R'(y) = mu, capped per round at x_max. One derivative bisection per
// multiplier evaluation therefore prices all T rounds at once.

#ifndef ADASCALE_BASELINES_HPP
#define ADASCALE_BASELINES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "adascale/controller.hpp"

namespace adascale {

// x_t = x_max / (1 + x_max nu / c_t); the resulting constraint term equals nu
// exactly every round.
inline double equal_alloc(double c_t, double nu, double x_max) {
  return x_max / (1.0 + x_max * nu / c_t);
}

struct OfflineSolution {
  std::vector<double> x_star;
  double mu_star = 0.0;
  double primal_value = 0.0;
  double dual_value = 0.0;
  double constraint_slack = 0.0;  // T nu - realized LHS (absolute units)
  // (mu, constraint LHS) pairs in evaluation order; the LHS must be
  // nonincreasing in mu.
  std::vector<std::pair<double, double>> outer_iterates;
};

namespace detail {

// kappa~_m = M B_m / (G sqrt(2 d)): round-independent sigma scale in y = x/c.
inline std::vector<DeviceKappa> device_kappas_rescaled(
    const std::vector<DeviceProfile>& profiles, int model_dim, double clip_g) {
  const double num_devices = static_cast<double>(profiles.size());
  std::vector<DeviceKappa> out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) {
    out.push_back({num_devices * p.batch_size /
                       (clip_g * std::sqrt(2.0 * model_dim)),
                   p.sampling_rate()});
  }
  return out;
}

// Root of y^2 R'(y) = mu for mu > 0; y^2 R'(y) is strictly increasing from 0
// to infinity.
inline double shared_stationary_y(const LeakageModel& leakage, double mu) {
  auto h = [&](double y) { return y * y * leakage.derivative(y); };
  double y_lo = 1.0;
  double y_hi = 1.0;
  int guard = 0;
  while (h(y_hi) < mu && guard++ < 2000) y_hi *= 2.0;
  guard = 0;
  while (h(y_lo) >= mu && guard++ < 2000) y_lo *= 0.5;
  while (y_hi - y_lo > 1e-13 * y_hi) {
    const double mid = 0.5 * (y_lo + y_hi);
    if (h(mid) < mu) {
      y_lo = mid;
    } else {
      y_hi = mid;
    }
  }
  return 0.5 * (y_lo + y_hi);
}

}  // namespace detail

// Offline optimum by outer bisection on the dual multiplier. The constraint
// LHS is monotone nonincreasing in mu, so the bracket [0, mu_hi] found by
// doubling always contains a multiplier whose LHS matches the budget to the
// outer tolerance 1e-9 * T nu.
inline OfflineSolution offline_optimal(const ChannelTrace& trace,
                                       const std::vector<DeviceProfile>& profiles,
                                       const ControllerConfig& config,
                                       const NoiseSpec& noise) {
  if (config.nu < 0.0) {
    throw std::invalid_argument("offline_optimal: infeasible, nu < 0");
  }
  const int num_rounds = trace.num_rounds;
  const double x_max = config.x_max;

  std::vector<double> c(num_rounds);
  for (int t = 0; t < num_rounds; ++t) {
    c[t] = detail::constraint_coeff(noise, trace.h_min_sq[t]);
  }

  const auto kappas =
      detail::device_kappas_rescaled(profiles, noise.model_dim, config.clip_G);
  detail::LeakageModel leakage(config.alpha.alpha, kappas);

  OfflineSolution sol;
  sol.x_star.assign(num_rounds, x_max);

  auto primal_of = [&](const std::vector<double>& x) {
    double v = 0.0;
    for (int t = 0; t < num_rounds; ++t) v += leakage.value(x[t] / c[t]);
    return v;
  };
  auto lhs_of = [&](const std::vector<double>& x) {
    double v = 0.0;
    for (int t = 0; t < num_rounds; ++t) {
      v += std::max(c[t] * (1.0 / x[t] - 1.0 / x_max), 0.0);
    }
    return v;
  };

  const double budget = num_rounds * config.nu;
  if (budget == 0.0) {
    // Zero budget forces x_t = x_max everywhere; the multiplier is arbitrary.
    sol.primal_value = primal_of(sol.x_star);
    sol.dual_value = sol.primal_value;
    return sol;
  }

  auto x_at = [&](double mu, std::vector<double>& x_out) {
    const double y_star = detail::shared_stationary_y(leakage, mu);
    for (int t = 0; t < num_rounds; ++t) {
      x_out[t] = std::min(c[t] * y_star, x_max);
    }
  };
  std::vector<double> x(num_rounds);
  auto eval_lhs = [&](double mu) {
    x_at(mu, x);
    const double l = lhs_of(x);
    sol.outer_iterates.emplace_back(mu, l);
    return l;
  };

  double mu_hi = 1.0;
  int guard = 0;
  while (eval_lhs(mu_hi) > budget && guard++ < 400) mu_hi *= 2.0;
  double mu_lo = 0.0;
  double mu = mu_hi;
  const double tol = 1e-9 * budget;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (mu_lo + mu_hi);
    if (mid == mu_lo || mid == mu_hi) break;  // bracket at double resolution
    const double l = eval_lhs(mid);
    if (std::abs(l - budget) <= tol) {
      mu = mid;
      break;
    }
    if (l > budget) {
      mu_lo = mid;
    } else {
      mu_hi = mid;
    }
    mu = mu_hi;
  }

  x_at(mu, sol.x_star);
  const double lhs = lhs_of(sol.x_star);
  sol.mu_star = mu;
  sol.primal_value = primal_of(sol.x_star);
  sol.constraint_slack = budget - lhs;
  // The inner minimizers at mu_star are exactly x_star, so the dual value is
  // the priced primal minus mu * budget.
  sol.dual_value = sol.primal_value + mu * lhs - mu * budget;
  return sol;
}

struct BudgetTracker {
  double total_budget = 0.0;  // T nu
  double spent = 0.0;
  int rounds_left = 0;
};

// One EstimFuture decision. The surrogate offline problem covers the current
// round at its true coefficient plus rounds_left - 1 future rounds at the
// MMSE-estimated coefficient, under the remaining budget. With two distinct
// coefficients the dual water level solves a two-piece linear equation in
// closed form; the returned x is the current round's coordinate of that
// surrogate optimum. Updates the tracker with the realized constraint term.
inline double estim_future(double c_now, BudgetTracker& tracker,
                           double expected_h_min_sq_value,
                           const NoiseSpec& noise, double x_max) {
  if (tracker.rounds_left < 1) {
    throw std::invalid_argument("estim_future: no rounds left");
  }
  const double remaining = std::max(tracker.total_budget - tracker.spent, 0.0);
  tracker.rounds_left -= 1;
  if (remaining == 0.0) {
    return x_max;
  }
  const double c_hat =
      noise.model_dim * noise.sigma_n_sq / expected_h_min_sq_value;
  const double a_now = c_now / x_max;
  const double a_hat = c_hat / x_max;
  const int future = tracker.rounds_left;  // rounds after this one

  // Water level w solves max(w - a_now, 0) + future * max(w - a_hat, 0) =
  // remaining; each term is that round's constraint spend.
  const double lo = std::min(a_now, a_hat);
  const double hi = std::max(a_now, a_hat);
  const double lo_weight = (a_now <= a_hat) ? 1.0 : static_cast<double>(future);
  const double knee = lo_weight * (hi - lo);
  double w;
  if (remaining <= knee) {
    w = lo + remaining / lo_weight;
  } else {
    w = hi + (remaining - knee) / (1.0 + future);
  }

  const double spend_now = std::max(w - a_now, 0.0);
  tracker.spent += spend_now;
  return c_now / std::max(w, a_now);
}

// Per-round trajectory bookkeeping shared by the non-queue methods: given a
// policy x(t, c_t), records decisions, composes the ledger, and accumulates
// the realized constraint average.
struct BaselineRun {
  std::vector<RoundDecision> decisions;
  PrivacyLedger ledger;
  double total_rho = 0.0;
  double mean_constraint_lhs = 0.0;
};

inline BaselineRun run_with_policy(
    const ChannelTrace& trace, const std::vector<DeviceProfile>& profiles,
    const ControllerConfig& config, const NoiseSpec& noise,
    const std::function<double(int, double)>& policy,
    bool record_decisions = true) {
  noise.validate();
  const int num_devices = trace.num_devices;
  const int num_rounds = trace.num_rounds;
  BaselineRun run{.decisions = {},
                  .ledger = PrivacyLedger(num_devices, config.alpha)};
  if (record_decisions) run.decisions.reserve(num_rounds);

  std::vector<double> rho(num_devices);
  double lhs_sum = 0.0;
  for (int t = 0; t < num_rounds; ++t) {
    const double h_min_sq = trace.h_min_sq[t];
    const double c_t = detail::constraint_coeff(noise, h_min_sq);
    const double x = policy(t, c_t);
    const auto kappas =
        device_kappas_for_round(profiles, noise, config.clip_G, h_min_sq);
    for (int m = 0; m < num_devices; ++m) {
      rho[m] = rdp_of_sgm(config.alpha,
                          SgmParams(kappas[m].q, kappas[m].kappa / std::sqrt(x)));
      run.total_rho += rho[m];
    }
    run.ledger = compose(run.ledger, rho);
    const double term = std::max(c_t * (1.0 / x - 1.0 / config.x_max), 0.0);
    lhs_sum += term;
    if (record_decisions) {
      RoundDecision d;
      d.x = x;
      d.eta = eta_from_x(x, h_min_sq);
      d.c = c_t;
      d.constraint_term = term;
      d.sigma_per_device.resize(num_devices);
      for (int m = 0; m < num_devices; ++m) {
        d.sigma_per_device[m] = kappas[m].kappa / std::sqrt(x);
      }
      d.rho_per_device = rho;
      run.decisions.push_back(std::move(d));
    }
  }
  run.mean_constraint_lhs = lhs_sum / num_rounds;
  return run;
}

inline BaselineRun run_equal_alloc(const ChannelTrace& trace,
                                   const std::vector<DeviceProfile>& profiles,
                                   const ControllerConfig& config,
                                   const NoiseSpec& noise,
                                   bool record_decisions = true) {
  return run_with_policy(
      trace, profiles, config, noise,
      [&](int, double c_t) { return equal_alloc(c_t, config.nu, config.x_max); },
      record_decisions);
}

inline BaselineRun run_estim_future(const ChannelTrace& trace,
                                    const std::vector<DeviceProfile>& profiles,
                                    const ControllerConfig& config,
                                    const NoiseSpec& noise,
                                    bool record_decisions = true) {
  BudgetTracker tracker{trace.num_rounds * config.nu, 0.0, trace.num_rounds};
  const double mean_gain = expected_h_min_sq(profiles);
  return run_with_policy(
      trace, profiles, config, noise,
      [&, mean_gain](int, double c_t) {
        return estim_future(c_t, tracker, mean_gain, noise, config.x_max);
      },
      record_decisions);
}

inline BaselineRun run_offline_optimal(
    const ChannelTrace& trace, const std::vector<DeviceProfile>& profiles,
    const ControllerConfig& config, const NoiseSpec& noise,
    const OfflineSolution& solution, bool record_decisions = true) {
  return run_with_policy(
      trace, profiles, config, noise,
      [&](int t, double) { return solution.x_star[t]; }, record_decisions);
}

}  // namespace adascale

#endif  // ADASCALE_BASELINES_HPP

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
// Online receive-scaling controller: virtual queue, convex per-round
// objective, analytic derivative, bisection solver, and the x_t -> eta_t
// mapping.
//
// Per round the server picks x in (0, x_max] minimizing
//
//   J(x) = V sum_m rho_alpha(q_m, kappa_m / sqrt(x))
//        + Q c (1/x - 1/x_max) + (1/2) c^2 (1/x - 1/x_max)^2,
//
// where c = d sigma_n^2 / h_min^2 and kappa_m = M B_m sigma_n /
// (sqrt(2) G h_min). Substituting sigma = kappa / sqrt(x) makes every
// exponent of the RDP sum linear in x, so the leakage term is a logsumexp of
// affine functions of x: convex, with a closed-form derivative.

#ifndef ADASCALE_CONTROLLER_HPP
#define ADASCALE_CONTROLLER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adascale/accountant.hpp"
#include "adascale/channel.hpp"

namespace adascale {

struct ControllerConfig {
  double V;            // penalty weight on leakage
  double nu;           // per-round constraint budget
  double x_max;        // P_max d M^2 / G^2
  RdpOrder alpha;      // accounting order
  double clip_G;       // gradient-norm bound, realized as clipping threshold
  double bisect_tol;   // solver tolerance tau on x

  void validate() const {
    if (!(V > 0.0)) throw std::invalid_argument("ControllerConfig: V must be > 0");
    if (!(nu >= 0.0)) throw std::invalid_argument("ControllerConfig: nu must be >= 0");
    if (!(x_max > 0.0)) throw std::invalid_argument("ControllerConfig: x_max must be > 0");
    if (!(clip_G > 0.0)) throw std::invalid_argument("ControllerConfig: clip_G must be > 0");
    if (!(bisect_tol > 0.0)) throw std::invalid_argument("ControllerConfig: bisect_tol must be > 0");
  }
};

inline double x_max_from(double p_max, int model_dim, int num_devices,
                         double clip_g) {
  return p_max * model_dim * num_devices * num_devices / (clip_g * clip_g);
}

struct ControllerState {
  double Q = 0.0;  // virtual queue, always >= 0, Q = 0 at t = 0
  int round = 0;
};

// Per-device sampled-Gaussian parameters of one round: sigma_m(x) = kappa/sqrt(x).
struct DeviceKappa {
  double kappa;
  double q;
};

struct RoundDecision {
  double x = 0.0;
  double eta = 0.0;
  double c = 0.0;                // d sigma_n^2 / h_min^2
  double constraint_term = 0.0;  // c (1/x - 1/x_max)
  std::vector<double> sigma_per_device;
  std::vector<double> rho_per_device;
};

namespace detail {

// Leakage term of the per-round objective with x-linear exponents:
// per device, A(x) = LSE_k(log w_k + b_k x) with binomial-Bernoulli weights
// w_k and slopes b_k = (k^2 - k) / (2 kappa^2); rho = A / (alpha - 1).
class LeakageModel {
 public:
  LeakageModel(int alpha, std::span<const DeviceKappa> devices)
      : alpha_(alpha), inv_am1_(1.0 / (alpha - 1)) {
    terms_.reserve(devices.size() * (alpha + 1));
    device_begin_.reserve(devices.size() + 1);
    for (const DeviceKappa& dev : devices) {
      device_begin_.push_back(terms_.size());
      const double log_q = std::log(dev.q);
      const double log_1mq = std::log1p(-dev.q);
      const double half_inv_kappa_sq = 0.5 / (dev.kappa * dev.kappa);
      for (int k = 0; k <= alpha; ++k) {
        if (k < alpha && dev.q == 1.0) continue;
        double lw = log_binomial(alpha, k);
        if (k < alpha) lw += (alpha - k) * log_1mq;
        if (k > 0) lw += k * log_q;
        const double b = static_cast<double>(k) * (k - 1) * half_inv_kappa_sq;
        terms_.push_back({lw, b});
      }
    }
    device_begin_.push_back(terms_.size());
  }

  // sum_m rho_m(x)
  double value(double x) const {
    double total = 0.0;
    for (std::size_t d = 0; d + 1 < device_begin_.size(); ++d) {
      double shift = -std::numeric_limits<double>::infinity();
      for (std::size_t i = device_begin_[d]; i < device_begin_[d + 1]; ++i) {
        shift = std::max(shift, terms_[i].log_w + terms_[i].b * x);
      }
      double sum = 0.0;
      for (std::size_t i = device_begin_[d]; i < device_begin_[d + 1]; ++i) {
        sum += std::exp(terms_[i].log_w + terms_[i].b * x - shift);
      }
      total += std::max(shift + std::log(sum), 0.0);
    }
    return total * inv_am1_;
  }

  // d/dx sum_m rho_m(x) = sum_m (sum_k w_k b_k e^{b_k x}) /
  // ((alpha - 1) sum_k w_k e^{b_k x}), max-shifted per device.
  double derivative(double x) const {
    double total = 0.0;
    for (std::size_t d = 0; d + 1 < device_begin_.size(); ++d) {
      double shift = -std::numeric_limits<double>::infinity();
      for (std::size_t i = device_begin_[d]; i < device_begin_[d + 1]; ++i) {
        shift = std::max(shift, terms_[i].log_w + terms_[i].b * x);
      }
      double num = 0.0;
      double den = 0.0;
      for (std::size_t i = device_begin_[d]; i < device_begin_[d + 1]; ++i) {
        const double e = std::exp(terms_[i].log_w + terms_[i].b * x - shift);
        den += e;
        num += e * terms_[i].b;
      }
      total += num / den;
    }
    return total * inv_am1_;
  }

  int alpha() const { return alpha_; }

 private:
  struct Term {
    double log_w;
    double b;
  };
  int alpha_;
  double inv_am1_;
  std::vector<Term> terms_;
  std::vector<std::size_t> device_begin_;
};

// Full per-round objective. quad_weight is 1 for the online controller and 0
// for the offline dual subproblem, which shares everything else.
struct RoundObjective {
  const LeakageModel& leakage;
  double V;
  double Q;
  double c;
  double x_max;
  double quad_weight = 1.0;

  double gap(double x) const { return 1.0 / x - 1.0 / x_max; }

  double value(double x) const {
    const double g = gap(x);
    return V * leakage.value(x) + Q * c * g +
           quad_weight * 0.5 * c * c * g * g;
  }

  double derivative(double x) const {
    const double g = gap(x);
    return V * leakage.derivative(x) -
           (Q * c + quad_weight * c * c * g) / (x * x);
  }
};

struct SolveResult {
  double x;
  bool at_upper_bound;  // returned x = x_max with derivative <= 0 there
  bool degenerate;      // bracket search exhausted; returned bracket lower end
  int halvings;         // geometric bracketing steps from x_max
  int bisection_iters;  // iterations on [x_lo, x_max]
};

// Minimizes a convex RoundObjective over (0, x_max] by bisection on the
// derivative. The lower bracket end is found by geometric halving from x_max;
// the derivative tends to -inf as x -> 0+ whenever c > 0, so halving
// terminates. If 128 halvings never see a negative derivative the inputs are
// degenerate (e.g. Q = 0 with vanishing c) and the bracket lower end is
// returned with a flag.
inline SolveResult minimize_round_objective(const RoundObjective& f,
                                            double x_max, double tol) {
  if (f.derivative(x_max) <= 0.0) {
    return {x_max, true, false, 0, 0};
  }
  double lo = x_max;
  int halvings = 0;
  bool found = false;
  while (halvings < 128) {
    lo *= 0.5;
    ++halvings;
    if (f.derivative(lo) < 0.0) {
      found = true;
      break;
    }
  }
  if (!found) {
    return {lo, false, true, halvings, 0};
  }
  double hi = x_max;
  int iters = 0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    ++iters;
    if (f.derivative(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {0.5 * (lo + hi), false, false, halvings, iters};
}

}  // namespace detail

// kappa_m = M B_m sigma_n / (sqrt(2) G h_min) for one round.
inline std::vector<DeviceKappa> device_kappas_for_round(
    const std::vector<DeviceProfile>& profiles, const NoiseSpec& noise,
    double clip_g, double h_min_sq) {
  const int num_devices = static_cast<int>(profiles.size());
  const double h_min = std::sqrt(h_min_sq);
  std::vector<DeviceKappa> out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) {
    const double kappa = num_devices * p.batch_size * noise.sigma_n() /
                         (std::sqrt(2.0) * clip_g * h_min);
    out.push_back({kappa, p.sampling_rate()});
  }
  return out;
}

// J(x) of the per-round problem; see the header comment.
inline double per_round_objective(double x, double Q, double c_t,
                                  const ControllerConfig& config,
                                  const std::vector<DeviceKappa>& devices) {
  if (!(x > 0.0) || x > config.x_max * (1.0 + 1e-12)) {
    throw std::invalid_argument("per_round_objective: x outside (0, x_max]");
  }
  detail::LeakageModel leakage(config.alpha.alpha, devices);
  detail::RoundObjective f{leakage, config.V, Q, c_t, config.x_max};
  return f.value(x);
}

// dJ/dx, exact up to floating point; used as the bisection oracle.
inline double per_round_derivative(double x, double Q, double c_t,
                                   const ControllerConfig& config,
                                   const std::vector<DeviceKappa>& devices) {
  if (!(x > 0.0) || x > config.x_max * (1.0 + 1e-12)) {
    throw std::invalid_argument("per_round_derivative: x outside (0, x_max]");
  }
  detail::LeakageModel leakage(config.alpha.alpha, devices);
  detail::RoundObjective f{leakage, config.V, Q, c_t, config.x_max};
  return f.derivative(x);
}

// Solves the per-round problem. Returns x_max when the derivative is already
// nonpositive there, otherwise the unique stationary point within bisect_tol.
inline double solve_per_round(double Q, double c_t,
                              const ControllerConfig& config,
                              const std::vector<DeviceKappa>& devices) {
  if (!(c_t > 0.0)) {
    throw std::invalid_argument("solve_per_round: c_t must be > 0");
  }
  config.validate();
  detail::LeakageModel leakage(config.alpha.alpha, devices);
  detail::RoundObjective f{leakage, config.V, Q, c_t, config.x_max};
  return detail::minimize_round_objective(f, config.x_max, config.bisect_tol).x;
}

// Q <- max{Q + constraint_term - nu, 0}, t <- t + 1.
inline ControllerState queue_update(const ControllerState& state,
                                    double constraint_term, double nu) {
  if (!(constraint_term >= 0.0)) {
    throw std::invalid_argument("queue_update: negative constraint term " +
                                std::to_string(constraint_term));
  }
  return ControllerState{std::max(state.Q + constraint_term - nu, 0.0),
                         state.round + 1};
}

// eta_t = x_t min_m |h_{m,t}|^2 / k_m^2.
inline double eta_from_x(double x, std::span<const double> gain_sq,
                         std::span<const double> k_sq) {
  if (!(x > 0.0)) throw std::invalid_argument("eta_from_x: x must be > 0");
  double h_min_sq = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < gain_sq.size(); ++m) {
    h_min_sq = std::min(h_min_sq, gain_sq[m] / k_sq[m]);
  }
  return x * h_min_sq;
}

inline double eta_from_x(double x, double h_min_sq) { return x * h_min_sq; }

struct AdaScaleRun {
  std::vector<RoundDecision> decisions;
  std::vector<double> queue_history;  // Q_0 .. Q_T
  PrivacyLedger ledger;
  double total_rho = 0.0;            // sum over rounds and devices
  double mean_constraint_lhs = 0.0;  // (1/T) sum_t c_t (1/x_t - 1/x_max)
};

namespace detail {

inline double constraint_coeff(const NoiseSpec& noise, double h_min_sq) {
  return noise.model_dim * noise.sigma_n_sq / h_min_sq;
}

}  // namespace detail

// Runs AdaScale over a whole trace: solve -> queue update -> eta, composing
// the RDP ledger along the way. `record_decisions` false skips the per-round
// vectors (used by the sweep tuner, which only needs the constraint average).
inline AdaScaleRun run_adascale(const ChannelTrace& trace,
                                const std::vector<DeviceProfile>& profiles,
                                const ControllerConfig& config,
                                const NoiseSpec& noise,
                                bool record_decisions = true) {
  config.validate();
  noise.validate();
  if (static_cast<int>(profiles.size()) != trace.num_devices) {
    throw std::invalid_argument("run_adascale: trace/profile size mismatch");
  }
  const int num_devices = trace.num_devices;
  const int num_rounds = trace.num_rounds;

  // Weights of the leakage logsumexp depend only on (alpha, q_m); the slopes
  // rescale per round through kappa ~ 1/h_min. Building the model once per
  // round from cached kappas keeps the solver loop allocation-light.
  std::vector<DeviceKappa> kappas(num_devices);
  for (int m = 0; m < num_devices; ++m) {
    kappas[m].q = profiles[m].sampling_rate();
  }
  const double kappa_base = num_devices * noise.sigma_n() /
                            (std::sqrt(2.0) * config.clip_G);

  AdaScaleRun run{.decisions = {},
                  .queue_history = {},
                  .ledger = PrivacyLedger(num_devices, config.alpha)};
  run.queue_history.reserve(num_rounds + 1);
  ControllerState state;
  run.queue_history.push_back(state.Q);
  if (record_decisions) run.decisions.reserve(num_rounds);

  std::vector<double> rho(num_devices);
  double lhs_sum = 0.0;
  for (int t = 0; t < num_rounds; ++t) {
    const double h_min_sq = trace.h_min_sq[t];
    const double h_min = std::sqrt(h_min_sq);
    const double c_t = detail::constraint_coeff(noise, h_min_sq);
    for (int m = 0; m < num_devices; ++m) {
      kappas[m].kappa = kappa_base * profiles[m].batch_size / h_min;
    }
    detail::LeakageModel leakage(config.alpha.alpha, kappas);
    detail::RoundObjective f{leakage, config.V, state.Q, c_t, config.x_max};
    const double x =
        detail::minimize_round_objective(f, config.x_max, config.bisect_tol).x;

    const double term = std::max(c_t * (1.0 / x - 1.0 / config.x_max), 0.0);
    for (int m = 0; m < num_devices; ++m) {
      rho[m] = rdp_of_sgm(config.alpha,
                          SgmParams(kappas[m].q, kappas[m].kappa / std::sqrt(x)));
      run.total_rho += rho[m];
    }
    run.ledger = compose(run.ledger, rho);
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
    state = queue_update(state, term, config.nu);
    run.queue_history.push_back(state.Q);
  }
  run.mean_constraint_lhs = lhs_sum / num_rounds;
  return run;
}

}  // namespace adascale

#endif  // ADASCALE_CONTROLLER_HPP

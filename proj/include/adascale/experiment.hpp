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
// Experiment configuration, bound certificates, and sweep orchestration.

#ifndef ADASCALE_EXPERIMENT_HPP
#define ADASCALE_EXPERIMENT_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "adascale/baselines.hpp"
#include "adascale/channel.hpp"
#include "adascale/controller.hpp"

namespace adascale {

struct SystemSection {
  int devices = 10;       // M
  int model_dim = 26010;  // d
  int rounds = 500;       // T
  double p_max_dbm = 23.0;
  double noise_dbm = -90.0;  // sigma_n^2
  double r_min = 10.0;
  double r_max = 200.0;
  int batch_size = 60;    // B
  int dataset_size = 6000;  // n
  double clip = 1.0;      // C, identified with G
  int alpha = 3;
  double delta = 1e-5;
};

struct ControllerSection {
  std::vector<std::string> methods = {"adascale", "optimal", "equalalloc",
                                      "estimfuture"};
  std::vector<double> nu_grid = {0.01, 0.02, 0.04, 0.08, 0.16};
  double V = 0.0;       // raw penalty weight; 0 means not set
  double v_beta = 0.0;  // with v_coeff > 0, V = v_coeff * T^v_beta
  double v_coeff = 0.0;
  double tau_rel = 1e-10;  // bisection tolerance = tau_rel * x_max
};

struct SeedsSection {
  std::uint64_t placement = 1;
  std::uint64_t fading = 2;
  std::uint64_t sampling = 3;
  std::uint64_t noise = 4;
  int trials = 100;
};

struct OutputSection {
  std::string dir = "out";
};

struct ExperimentConfig {
  SystemSection system;
  ControllerSection controller;
  SeedsSection seeds;
  OutputSection output;

  double p_max_watts() const { return dbm_to_watts(system.p_max_dbm); }
  double sigma_n_sq() const { return dbm_to_watts(system.noise_dbm); }
  double x_max() const {
    return x_max_from(p_max_watts(), system.model_dim, system.devices,
                      system.clip);
  }
  NoiseSpec noise_spec() const {
    return NoiseSpec{sigma_n_sq(), p_max_watts(), system.model_dim};
  }
  std::vector<DeviceProfile> placed_profiles() const {
    return make_placed_profiles(system.devices, system.r_min, system.r_max,
                                system.batch_size, system.dataset_size, 1.0,
                                seeds.placement);
  }
  // Raw V takes precedence; otherwise the (beta, coefficient) form.
  double resolve_v() const {
    if (controller.V > 0.0) return controller.V;
    if (controller.v_coeff > 0.0) {
      return controller.v_coeff * std::pow(system.rounds, controller.v_beta);
    }
    return 0.0;
  }
  ControllerConfig controller_config(double nu, double v) const {
    return ControllerConfig{v,
                            nu,
                            x_max(),
                            RdpOrder(system.alpha),
                            system.clip,
                            controller.tau_rel * x_max()};
  }

  void validate() const {
    if (system.devices < 1 || system.model_dim < 1 || system.rounds < 1) {
      throw std::invalid_argument("config: M, d, T must be positive");
    }
    if (controller.nu_grid.empty()) {
      throw std::invalid_argument("config: nu list must be non-empty");
    }
    if (seeds.trials < 1) {
      throw std::invalid_argument("config: trials must be >= 1");
    }
  }
};

namespace detail {

// Static-partition parallel map with deterministic slot assignment.
template <typename Fn>
void parallel_for(int count, int num_threads, Fn&& fn) {
  num_threads = std::max(1, std::min(num_threads, count));
  if (num_threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(num_threads);
  std::atomic<int> next{0};
  for (int w = 0; w < num_threads; ++w) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Worst-case queue cap computed from the trace:
//   Q_T_max = sqrt(2 V sum_t sum_m rho_alpha(q_m, sigma_min_{m,t}) + T nu^2),
// with sigma_min_{m,t} the effective noise multiplier at x = x_max.
inline double compute_q_t_max(const ChannelTrace& trace,
                              const std::vector<DeviceProfile>& profiles,
                              const ControllerConfig& config,
                              const NoiseSpec& noise) {
  double rho_sum = 0.0;
  const double inv_sqrt_xmax = 1.0 / std::sqrt(config.x_max);
  for (int t = 0; t < trace.num_rounds; ++t) {
    const auto kappas = device_kappas_for_round(profiles, noise, config.clip_G,
                                                trace.h_min_sq[t]);
    for (const auto& k : kappas) {
      rho_sum += rdp_of_sgm(config.alpha,
                            SgmParams(k.q, k.kappa * inv_sqrt_xmax));
    }
  }
  return std::sqrt(2.0 * config.V * rho_sum +
                   trace.num_rounds * config.nu * config.nu);
}

struct BoundCertificate {
  double q_t_max = 0.0;
  double max_queue = 0.0;       // max_t Q_t
  double violation_lhs = 0.0;   // (1/T) sum_t c_t (1/x_t - 1/x_max) - nu
  double violation_bound = 0.0; // Q_T_max / T
  double regret = 0.0;          // time-averaged leakage gap to the oracle
  double regret_bound = 0.0;    // Q_T_max nu / V + T nu^2 / 2V + nu^2 / 2V
  bool queue_ok = false;
  bool violation_ok = false;
  bool regret_ok = false;

  bool all_ok() const { return queue_ok && violation_ok && regret_ok; }
};

// Checks the proven queue, violation, and regret bounds for one AdaScale run
// against the offline oracle on the identical trace. Pass flags use a 1e-9
// relative slack for float accumulation.
inline BoundCertificate certify_run(const AdaScaleRun& run,
                                    const OfflineSolution& offline,
                                    const ChannelTrace& trace,
                                    const std::vector<DeviceProfile>& profiles,
                                    const ControllerConfig& config,
                                    const NoiseSpec& noise) {
  const int num_rounds = trace.num_rounds;
  if (static_cast<int>(run.queue_history.size()) != num_rounds + 1 ||
      static_cast<int>(offline.x_star.size()) != num_rounds) {
    throw std::invalid_argument("certify_run: run/oracle/trace length mismatch");
  }
  // A solution computed on a different trace would (generically) blow the
  // budget when re-priced on this one.
  double offline_lhs = 0.0;
  for (int t = 0; t < num_rounds; ++t) {
    const double c_t = detail::constraint_coeff(noise, trace.h_min_sq[t]);
    offline_lhs +=
        std::max(c_t * (1.0 / offline.x_star[t] - 1.0 / config.x_max), 0.0);
  }
  const double budget = num_rounds * config.nu;
  if (offline_lhs > budget * (1.0 + 1e-6) + 1e-12) {
    throw std::invalid_argument(
        "certify_run: oracle solution infeasible on this trace (trace mismatch?)");
  }

  BoundCertificate cert;
  cert.q_t_max = compute_q_t_max(trace, profiles, config, noise);
  cert.max_queue =
      *std::max_element(run.queue_history.begin(), run.queue_history.end());
  cert.violation_lhs = run.mean_constraint_lhs - config.nu;
  cert.violation_bound = cert.q_t_max / num_rounds;
  cert.regret = (run.total_rho - offline.primal_value) / num_rounds;
  cert.regret_bound = cert.q_t_max * config.nu / config.V +
                      num_rounds * config.nu * config.nu / (2.0 * config.V) +
                      config.nu * config.nu / (2.0 * config.V);

  const double slack = 1e-9;
  cert.queue_ok = cert.max_queue <= cert.q_t_max * (1.0 + slack);
  cert.violation_ok =
      cert.violation_lhs <= cert.violation_bound * (1.0 + slack);
  cert.regret_ok = cert.regret <= cert.regret_bound * (1.0 + slack);
  return cert;
}

// Optional multi-order accounting path: re-accumulates a decision trajectory
// at every order in [alpha_lo, alpha_hi] and converts each device at its best
// order. The default reporting path stays at the single configured order.
inline std::vector<DpGuarantee> best_dp_per_device(
    const std::vector<RoundDecision>& decisions,
    const std::vector<DeviceProfile>& profiles, double delta, int alpha_lo = 2,
    int alpha_hi = 64) {
  if (alpha_lo < 2 || alpha_hi < alpha_lo) {
    throw std::invalid_argument("best_dp_per_device: bad order range");
  }
  std::vector<DpGuarantee> out;
  out.reserve(profiles.size());
  for (std::size_t m = 0; m < profiles.size(); ++m) {
    std::map<int, double> rho_at_orders;
    for (int alpha = alpha_lo; alpha <= alpha_hi; ++alpha) {
      double total = 0.0;
      for (const auto& d : decisions) {
        total += rdp_of_sgm(RdpOrder(alpha),
                            SgmParams(profiles[m].sampling_rate(),
                                      d.sigma_per_device[m]));
      }
      rho_at_orders[alpha] = total;
    }
    out.push_back(best_dp_over_orders(rho_at_orders, delta));
  }
  return out;
}

struct SweepRow {
  double nu = 0.0;
  std::string method;
  int trial = 0;
  std::uint64_t fading_seed = 0;
  double v_used = 0.0;
  double realized_lhs = 0.0;
  double mean_rho = 0.0;      // (1/M) sum_m rho_m (total over rounds)
  double mean_epsilon = 0.0;  // (1/M) sum_m eps_m at the configured delta
};

struct SweepAggregate {
  double nu = 0.0;
  std::string method;
  double v_used = 0.0;
  double mean_lhs = 0.0;
  double mean_rho = 0.0;
  double rho_ci95 = 0.0;
  double mean_epsilon = 0.0;
  double epsilon_ci95 = 0.0;
  int trials = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepAggregate> aggregates;
};

struct VTuneResult {
  double v = 0.0;
  double realized_lhs = 0.0;
  int steps = 0;
  std::vector<std::pair<double, double>> iterates;  // (V, mean LHS)
};

namespace detail {

inline double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / xs.size();
}

inline double ci95_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / (xs.size() - 1));
  return 1.96 * sd / std::sqrt(static_cast<double>(xs.size()));
}

// Scale-aware initial guess for the penalty weight: at Q = 0 the per-round
// optimality condition in y = x/c reads V y^2 R'(y) = 1/y - a, so the V that
// spends nu on a typical round is nu / H(1/(a_bar + nu)).
inline double v_initial_guess(const std::vector<DeviceProfile>& profiles,
                              const ControllerConfig& config,
                              const NoiseSpec& noise) {
  const double mean_gain = expected_h_min_sq(profiles);
  const double c_bar = constraint_coeff(noise, mean_gain);
  const double a_bar = c_bar / config.x_max;
  const double y_bar = 1.0 / (a_bar + std::max(config.nu, 1e-12 * a_bar));
  const auto kappas =
      device_kappas_rescaled(profiles, noise.model_dim, config.clip_G);
  LeakageModel leakage(config.alpha.alpha, kappas);
  const double h = y_bar * y_bar * leakage.derivative(y_bar);
  return std::max(config.nu, 1e-300) / std::max(h, 1e-300);
}

}  // namespace detail

// Mean realized constraint LHS of AdaScale over a set of traces at a given V.
inline double mean_realized_lhs(const std::vector<ChannelTrace>& traces,
                                const std::vector<DeviceProfile>& profiles,
                                const ControllerConfig& config,
                                const NoiseSpec& noise, int num_threads) {
  std::vector<double> lhs(traces.size());
  detail::parallel_for(
      static_cast<int>(traces.size()), num_threads, [&](int i) {
        lhs[i] = run_adascale(traces[i], profiles, config, noise, false)
                     .mean_constraint_lhs;
      });
  return detail::mean_of(lhs);
}

// Tunes V by bisection on ln V so the seed-mean realized constraint LHS lands
// within `match_rel` of target_lhs. The LHS is monotone nondecreasing in V
// (larger V weights privacy more, lowering x and raising the spend), which
// the recorded iterates let callers assert. Throws after 60 steps.
inline VTuneResult tune_adascale_v(const std::vector<ChannelTrace>& traces,
                                   const std::vector<DeviceProfile>& profiles,
                                   const ControllerConfig& base,
                                   const NoiseSpec& noise, double target_lhs,
                                   double match_rel = 0.01,
                                   int num_threads = 1) {
  VTuneResult result;
  int steps = 0;
  auto lhs_at = [&](double v) {
    ControllerConfig cfg = base;
    cfg.V = v;
    ++steps;
    if (steps > 60) {
      throw std::runtime_error("tune_adascale_v: no match within 60 steps");
    }
    const double l =
        mean_realized_lhs(traces, profiles, cfg, noise, num_threads);
    result.iterates.emplace_back(v, l);
    return l;
  };

  double v_mid = detail::v_initial_guess(profiles, base, noise);
  double f_mid = lhs_at(v_mid);
  const double tol = match_rel * target_lhs;
  double v_lo = v_mid, v_hi = v_mid, f_lo = f_mid, f_hi = f_mid;
  while (f_lo > target_lhs) {
    v_lo /= 16.0;
    f_lo = lhs_at(v_lo);
  }
  while (f_hi < target_lhs) {
    v_hi *= 16.0;
    f_hi = lhs_at(v_hi);
  }
  const bool lo_closer =
      std::abs(f_lo - target_lhs) <= std::abs(f_hi - target_lhs);
  double v_best = lo_closer ? v_lo : v_hi;
  double f_best = lo_closer ? f_lo : f_hi;
  while (std::abs(f_best - target_lhs) > tol) {
    const double v = std::sqrt(v_lo * v_hi);  // bisect in log space
    const double f = lhs_at(v);
    if (std::abs(f - target_lhs) < std::abs(f_best - target_lhs)) {
      v_best = v;
      f_best = f;
    }
    if (f < target_lhs) {
      v_lo = v;
    } else {
      v_hi = v;
    }
  }
  result.v = v_best;
  result.realized_lhs = f_best;
  result.steps = steps;
  return result;
}

// Full sweep: for every (nu, method) runs all trials on shared traces,
// auto-tuning V for AdaScale so realized LHS matches nu within 1%. Rows come
// out in deterministic (nu, method, trial) order.
inline SweepReport sweep(const ExperimentConfig& config, int num_threads = 1) {
  config.validate();
  const auto profiles = config.placed_profiles();
  const NoiseSpec noise = config.noise_spec();
  const int trials = config.seeds.trials;

  std::vector<ChannelTrace> traces(trials);
  detail::parallel_for(trials, num_threads, [&](int s) {
    traces[s] =
        generate_trace(profiles, config.system.rounds,
                       config.seeds.fading + static_cast<std::uint64_t>(s));
  });

  SweepReport report;
  const RdpOrder order(config.system.alpha);
  const double delta = config.system.delta;

  for (double nu : config.controller.nu_grid) {
    for (const std::string& method : config.controller.methods) {
      ControllerConfig cfg = config.controller_config(nu, 1.0);
      double v_used = 0.0;
      if (method == "adascale") {
        try {
          const VTuneResult tuned = tune_adascale_v(
              traces, profiles, cfg, noise, nu, 0.01, num_threads);
          v_used = tuned.v;
          cfg.V = tuned.v;
        } catch (const std::runtime_error& e) {
          throw std::runtime_error("sweep: nu=" + std::to_string(nu) + ": " +
                                   e.what());
        }
      }

      std::vector<SweepRow> rows(trials);
      detail::parallel_for(trials, num_threads, [&](int s) {
        double lhs = 0.0;
        PrivacyLedger ledger(profiles.size(), order);
        if (method == "adascale") {
          auto run = run_adascale(traces[s], profiles, cfg, noise, false);
          lhs = run.mean_constraint_lhs;
          ledger = std::move(run.ledger);
        } else if (method == "equalalloc") {
          auto run = run_equal_alloc(traces[s], profiles, cfg, noise, false);
          lhs = run.mean_constraint_lhs;
          ledger = std::move(run.ledger);
        } else if (method == "estimfuture") {
          auto run = run_estim_future(traces[s], profiles, cfg, noise, false);
          lhs = run.mean_constraint_lhs;
          ledger = std::move(run.ledger);
        } else if (method == "optimal") {
          const auto sol = offline_optimal(traces[s], profiles, cfg, noise);
          auto run =
              run_offline_optimal(traces[s], profiles, cfg, noise, sol, false);
          lhs = run.mean_constraint_lhs;
          ledger = std::move(run.ledger);
        } else {
          throw std::invalid_argument("sweep: unknown method " + method);
        }

        SweepRow row;
        row.nu = nu;
        row.method = method;
        row.trial = s;
        row.fading_seed = config.seeds.fading + static_cast<std::uint64_t>(s);
        row.v_used = v_used;
        row.realized_lhs = lhs;
        double rho_sum = 0.0, eps_sum = 0.0;
        for (double rho_m : ledger.per_device_rdp) {
          rho_sum += rho_m;
          eps_sum += rdp_to_dp(rho_m, order, delta).epsilon;
        }
        row.mean_rho = rho_sum / profiles.size();
        row.mean_epsilon = eps_sum / profiles.size();
        rows[s] = std::move(row);
      });

      std::vector<double> lhs_v, rho_v, eps_v;
      for (const auto& r : rows) {
        lhs_v.push_back(r.realized_lhs);
        rho_v.push_back(r.mean_rho);
        eps_v.push_back(r.mean_epsilon);
        report.rows.push_back(r);
      }
      SweepAggregate agg;
      agg.nu = nu;
      agg.method = method;
      agg.v_used = v_used;
      agg.mean_lhs = detail::mean_of(lhs_v);
      agg.mean_rho = detail::mean_of(rho_v);
      agg.rho_ci95 = detail::ci95_of(rho_v);
      agg.mean_epsilon = detail::mean_of(eps_v);
      agg.epsilon_ci95 = detail::ci95_of(eps_v);
      agg.trials = trials;
      report.aggregates.push_back(agg);
    }
  }
  return report;
}

}  // namespace adascale

#endif  // ADASCALE_EXPERIMENT_HPP

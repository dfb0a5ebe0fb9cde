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

#include "adascale/controller.hpp"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "adascale/experiment.hpp"
#include "oracles.hpp"

namespace adascale {
namespace {

ControllerConfig make_config(double v, double nu, double x_max, int alpha,
                             double tau_rel = 1e-10) {
  return ControllerConfig{v, nu, x_max, RdpOrder(alpha), 1.0, tau_rel * x_max};
}

// A random but well-scaled per-round instance: kappas chosen so sigma at
// x_max lands in a physically plausible band.
struct Instance {
  ControllerConfig config;
  std::vector<DeviceKappa> devices;
  double Q;
  double c;
};

Instance random_instance(test::TestRng& rng, bool with_queue = true) {
  const double x_max = std::pow(10.0, rng.uniform(-1.0, 5.0));
  const int alpha = std::vector<int>{2, 3, 4, 8}[rng.uniform_int(0, 3)];
  const int devices = rng.uniform_int(1, 5);
  Instance inst{make_config(std::pow(10.0, rng.uniform(-5.0, 1.0)), 0.01,
                            x_max, alpha),
                {},
                with_queue ? std::pow(10.0, rng.uniform(-3.0, 2.0)) : 0.0,
                0.0};
  if (with_queue && rng.uniform() < 0.3) inst.Q = 0.0;
  for (int m = 0; m < devices; ++m) {
    const double sigma_at_xmax = std::pow(10.0, rng.uniform(-0.5, 1.5));
    inst.devices.push_back(
        {sigma_at_xmax * std::sqrt(x_max), rng.uniform(0.001, 1.0)});
  }
  // c scaled so the constraint term at x ~ x_max/4 is O(0.001 .. 10).
  inst.c = std::pow(10.0, rng.uniform(-3.0, 1.0)) / (3.0 / x_max);
  return inst;
}

TEST(PerRoundObjective, BracketTermsVanishAtXMax) {
  test::TestRng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    Instance inst = random_instance(rng);
    double leakage = 0.0;
    for (const auto& d : inst.devices) {
      leakage += rdp_of_sgm(inst.config.alpha,
                            SgmParams(d.q, d.kappa / std::sqrt(inst.config.x_max)));
    }
    const double j = per_round_objective(inst.config.x_max, inst.Q, inst.c,
                                         inst.config, inst.devices);
    EXPECT_NEAR(j, inst.config.V * leakage,
                1e-12 * std::max(1.0, std::abs(j)));
  }
}

TEST(PerRoundObjective, PureQuadraticPenaltyWhenLeakageWeightVanishes) {
  auto config = make_config(1e-300, 0.01, 2.0, 3);
  const std::vector<DeviceKappa> devices = {{2.0, 0.1}};
  // With V ~ 0 and Q = 0 only the quadratic term remains.
  const double at_half = per_round_objective(1.0, 0.0, 1.0, config, devices);
  EXPECT_NEAR(at_half, 0.5 * 1.0 * (1.0 - 0.5) * (1.0 - 0.5), 1e-12);
  const double at_max = per_round_objective(2.0, 0.0, 1.0, config, devices);
  EXPECT_NEAR(at_max, 0.0, 1e-300);
}

TEST(PerRoundObjective, FixedTestPointComposesAccountantValue) {
  // M=1, alpha=3, q=0.1, kappa=2, x=1, Q=1, c=1, x_max=2, V=1:
  // J = rho(sigma=2) + 0.5 + 0.125.
  auto config = make_config(1.0, 0.01, 2.0, 3);
  const std::vector<DeviceKappa> devices = {{2.0, 0.1}};
  const double rho = rdp_of_sgm(RdpOrder(3), SgmParams(0.1, 2.0));
  const double j = per_round_objective(1.0, 1.0, 1.0, config, devices);
  EXPECT_NEAR(j, rho + 0.625, 1e-13);
  EXPECT_NEAR(j, 0.6293739, 1e-6);
}

TEST(PerRoundObjective, RejectsOutOfRangeX) {
  auto config = make_config(1.0, 0.01, 2.0, 3);
  const std::vector<DeviceKappa> devices = {{2.0, 0.1}};
  EXPECT_THROW(per_round_objective(0.0, 1.0, 1.0, config, devices),
               std::invalid_argument);
  EXPECT_THROW(per_round_objective(2.5, 1.0, 1.0, config, devices),
               std::invalid_argument);
  EXPECT_THROW(per_round_derivative(-1.0, 1.0, 1.0, config, devices),
               std::invalid_argument);
}

TEST(PerRoundDerivative, MatchesCentralFiniteDifference) {
  test::TestRng rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    Instance inst = random_instance(rng);
    const double x = inst.config.x_max * rng.uniform(0.05, 0.95);
    auto objective = [&](double xx) {
      return per_round_objective(xx, inst.Q, inst.c, inst.config, inst.devices);
    };
    const double h = x * 1e-6;
    const double numeric = test::central_difference(objective, x, h);
    const double analytic =
        per_round_derivative(x, inst.Q, inst.c, inst.config, inst.devices);
    EXPECT_NEAR(analytic, numeric,
                1e-6 * std::max(std::abs(numeric), std::abs(analytic)))
        << "trial " << trial;
  }
}

TEST(PerRoundDerivative, PositiveAtXMaxWithEmptyQueue) {
  test::TestRng rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    Instance inst = random_instance(rng, /*with_queue=*/false);
    const double d = per_round_derivative(inst.config.x_max, 0.0, inst.c,
                                          inst.config, inst.devices);
    EXPECT_GT(d, 0.0);
  }
}

TEST(PerRoundDerivative, DivergesToMinusInfinityNearZero) {
  auto config = make_config(1.0, 0.01, 2.0, 3);
  const std::vector<DeviceKappa> devices = {{2.0, 0.1}};
  double prev = per_round_derivative(1e-2, 1.0, 1.0, config, devices);
  for (double x : {1e-3, 1e-4, 1e-5}) {
    const double d = per_round_derivative(x, 1.0, 1.0, config, devices);
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, -1e10);  // -c^2/x^3 dominates
}

TEST(SolvePerRound, PenaltyOnlyObjectiveReturnsXMax) {
  // V -> 0 with Q > 0: the objective is decreasing on the whole interval.
  auto config = make_config(1e-300, 0.01, 100.0, 3);
  const std::vector<DeviceKappa> devices = {{20.0, 0.1}};
  const double x = solve_per_round(5.0, 2.0, config, devices);
  EXPECT_DOUBLE_EQ(x, 100.0);
  EXPECT_THROW(solve_per_round(5.0, 0.0, config, devices),
               std::invalid_argument);
}

TEST(SolvePerRound, ObjectiveIsConvexOnLogGrid) {
  // Numerical convexity certificate: central second differences of the
  // objective are bounded below by -1e-8 across a 200-point log grid.
  test::TestRng rng(61);
  for (int trial = 0; trial < 40; ++trial) {
    Instance inst = random_instance(rng);
    auto objective = [&](double xx) {
      detail::LeakageModel leakage(inst.config.alpha.alpha, inst.devices);
      detail::RoundObjective f{leakage, inst.config.V, inst.Q, inst.c,
                               inst.config.x_max};
      return f.value(xx);
    };
    for (int i = 0; i < 200; ++i) {
      const double x =
          inst.config.x_max * std::pow(10.0, -6.0 + 6.0 * (i + 1) / 200.0);
      const double h = x * 1e-4;
      if (x + h > inst.config.x_max) continue;
      const double second = test::second_difference(objective, x, h);
      EXPECT_GE(second, -1e-8) << "trial " << trial << " x " << x;
    }
  }
}

TEST(SolvePerRound, ReturnedPointIsLocallyOptimal) {
  test::TestRng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    Instance inst = random_instance(rng);
    const double x =
        solve_per_round(inst.Q, inst.c, inst.config, inst.devices);
    auto objective = [&](double xx) {
      return per_round_objective(xx, inst.Q, inst.c, inst.config, inst.devices);
    };
    const double fx = objective(x);
    const double step = 10.0 * inst.config.bisect_tol;
    if (x + step <= inst.config.x_max) {
      EXPECT_LE(fx, objective(x + step) + 1e-12 * std::abs(fx));
    }
    if (x - step > 0.0) {
      EXPECT_LE(fx, objective(x - step) + 1e-12 * std::abs(fx));
    }
  }
}

TEST(SolvePerRound, KktConditionHolds) {
  // Either the boundary with nonpositive derivative, or an interior point
  // whose bracket width certifies the root.
  test::TestRng rng(83);
  for (int trial = 0; trial < 50; ++trial) {
    Instance inst = random_instance(rng);
    detail::LeakageModel leakage(inst.config.alpha.alpha, inst.devices);
    detail::RoundObjective f{leakage, inst.config.V, inst.Q, inst.c,
                             inst.config.x_max};
    const auto result = detail::minimize_round_objective(
        f, inst.config.x_max, inst.config.bisect_tol);
    ASSERT_FALSE(result.degenerate);
    if (result.at_upper_bound) {
      EXPECT_LE(f.derivative(inst.config.x_max), 0.0);
    } else {
      // The sign must flip within one tolerance of the returned point.
      EXPECT_LT(f.derivative(result.x - inst.config.bisect_tol), 0.0);
      EXPECT_GT(f.derivative(result.x + inst.config.bisect_tol), 0.0);
    }
  }
}

TEST(SolvePerRound, IterationCountMatchesComplexityClaim) {
  test::TestRng rng(97);
  for (int trial = 0; trial < 30; ++trial) {
    Instance inst = random_instance(rng);
    detail::LeakageModel leakage(inst.config.alpha.alpha, inst.devices);
    detail::RoundObjective f{leakage, inst.config.V, inst.Q, inst.c,
                             inst.config.x_max};
    const auto result = detail::minimize_round_objective(
        f, inst.config.x_max, inst.config.bisect_tol);
    const int cap = static_cast<int>(
        std::ceil(std::log2(inst.config.x_max / inst.config.bisect_tol)));
    EXPECT_LE(result.bisection_iters, cap);
  }
}

TEST(SolvePerRound, DegenerateInputsReturnFlaggedLowerEnd) {
  // Q = 0 with a vanishing constraint coefficient: the derivative stays
  // positive over the whole bracket.
  auto config = make_config(1.0, 0.01, 2.0, 3);
  const std::vector<DeviceKappa> devices = {{2.0, 0.5}};
  detail::LeakageModel leakage(3, devices);
  detail::RoundObjective f{leakage, config.V, 0.0, 1e-300, config.x_max};
  const auto result =
      detail::minimize_round_objective(f, config.x_max, config.bisect_tol);
  EXPECT_TRUE(result.degenerate);
  EXPECT_EQ(result.halvings, 128);
  EXPECT_GT(result.x, 0.0);
}

TEST(QueueUpdate, ArithmeticAndClamp) {
  ControllerState s{5.0, 3};
  const ControllerState a = queue_update(s, 2.0, 3.0);
  EXPECT_DOUBLE_EQ(a.Q, 4.0);
  EXPECT_EQ(a.round, 4);

  const ControllerState b = queue_update(ControllerState{1.0, 0}, 0.0, 3.0);
  EXPECT_DOUBLE_EQ(b.Q, 0.0);

  const ControllerState c = queue_update(ControllerState{0.0, 0}, 3.0, 3.0);
  EXPECT_DOUBLE_EQ(c.Q, 0.0);

  EXPECT_THROW(queue_update(s, -0.1, 3.0), std::invalid_argument);
}

TEST(EtaFromX, DefinitionAndLinearity) {
  const std::vector<double> gains = {2.0, 0.5, 8.0};
  const std::vector<double> k_sq = {1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(eta_from_x(2.0, gains, k_sq), 1.0);

  std::vector<double> scaled = gains;
  for (double& g : scaled) g *= 4.0;
  EXPECT_DOUBLE_EQ(eta_from_x(2.0, scaled, k_sq),
                   4.0 * eta_from_x(2.0, gains, k_sq));
  EXPECT_THROW(eta_from_x(0.0, gains, k_sq), std::invalid_argument);
}

TEST(EtaFromX, PowerBudgetBindsExactlyAtXMax) {
  // P_{m,t} = eta G^2 k_m^2 / (d M^2 |h_m|^2) <= P_max with equality for the
  // binding device when x = x_max.
  const auto profiles = make_placed_profiles(6, 10.0, 200.0, 60, 6000, 1.0, 2);
  const ChannelTrace trace = generate_trace(profiles, 20, 3);
  const double p_max = dbm_to_watts(23.0);
  const int d = 1000;
  const double clip_g = 1.0;
  const double x_max = x_max_from(p_max, d, 6, clip_g);
  for (int t = 0; t < trace.num_rounds; ++t) {
    const double eta = eta_from_x(x_max, trace.h_min_sq[t]);
    double max_power = 0.0;
    for (int m = 0; m < 6; ++m) {
      const double power = eta * clip_g * clip_g * profiles[m].k_sq() /
                           (d * 36.0 * trace.gain_sq(t, m));
      max_power = std::max(max_power, power);
      EXPECT_LE(power, p_max * (1.0 + 1e-12));
    }
    EXPECT_NEAR(max_power, p_max, p_max * 1e-12);
  }
}

struct PaperSetup {
  std::vector<DeviceProfile> profiles;
  ChannelTrace trace;
  NoiseSpec noise;
  ControllerConfig config;
};

PaperSetup paper_setup(int rounds, double v, double nu,
                       std::uint64_t fading_seed) {
  PaperSetup s{make_placed_profiles(10, 10.0, 200.0, 60, 6000, 1.0, 1),
               {},
               NoiseSpec{dbm_to_watts(-90.0), dbm_to_watts(23.0), 26010},
               ControllerConfig{v, nu,
                                x_max_from(dbm_to_watts(23.0), 26010, 10, 1.0),
                                RdpOrder(3), 1.0, 0.0}};
  s.config.bisect_tol = 1e-10 * s.config.x_max;
  s.trace = generate_trace(s.profiles, rounds, fading_seed);
  return s;
}

TEST(RunAdaScale, SlackBudgetKeepsQueueAtZeroAndXAtMax) {
  // nu large enough that the solver's unconstrained choice never spends it.
  // With V > 0 and Q = 0 the stationary point sits just below x_max, so x
  // lands within the solver tolerance of the boundary.
  PaperSetup s = paper_setup(50, 1e-12, 1e12, 11);
  const AdaScaleRun run = run_adascale(s.trace, s.profiles, s.config, s.noise);
  for (double q : run.queue_history) EXPECT_DOUBLE_EQ(q, 0.0);
  for (const auto& d : run.decisions) {
    EXPECT_GE(d.x, s.config.x_max * (1.0 - 1e-4));
    EXPECT_LE(d.constraint_term, 1e-6);
  }
  // Per-round leakage matches the sigma-min leakage used by the queue cap.
  const double q_t_max =
      compute_q_t_max(s.trace, s.profiles, s.config, s.noise);
  double rho_sum = 0.0;
  for (const auto& d : run.decisions) {
    for (double r : d.rho_per_device) rho_sum += r;
  }
  const double expected = std::sqrt(2.0 * s.config.V * rho_sum +
                                    s.trace.num_rounds * s.config.nu * s.config.nu);
  EXPECT_NEAR(q_t_max, expected, 1e-6 * expected);
}

TEST(RunAdaScale, SingleRoundLedgerMatchesAccountant) {
  PaperSetup s = paper_setup(1, 1e-5, 0.01, 13);
  const AdaScaleRun run = run_adascale(s.trace, s.profiles, s.config, s.noise);
  ASSERT_EQ(run.decisions.size(), 1u);
  ASSERT_EQ(run.ledger.rounds_accumulated, 1);
  const RoundDecision& d = run.decisions[0];
  for (int m = 0; m < 10; ++m) {
    const double expected = rdp_of_sgm(
        s.config.alpha,
        SgmParams(s.profiles[m].sampling_rate(), d.sigma_per_device[m]));
    EXPECT_DOUBLE_EQ(run.ledger.per_device_rdp[m], expected);
    // sigma_m = M B_m sigma_n / (sqrt(2 x) G h_min).
    const double sigma = 10.0 * s.profiles[m].batch_size * s.noise.sigma_n() /
                         (std::sqrt(2.0 * d.x) * s.config.clip_G *
                          std::sqrt(s.trace.h_min_sq[0]));
    EXPECT_NEAR(d.sigma_per_device[m], sigma, 1e-12 * sigma);
  }
}

TEST(RunAdaScale, QueueStaysBelowWorstCaseCap) {
  for (std::uint64_t seed : {21, 22, 23}) {
    PaperSetup s = paper_setup(500, 2e-6, 0.01, seed);
    const AdaScaleRun run =
        run_adascale(s.trace, s.profiles, s.config, s.noise, false);
    const double cap = compute_q_t_max(s.trace, s.profiles, s.config, s.noise);
    for (double q : run.queue_history) {
      EXPECT_LE(q, cap * (1.0 + 1e-9));
      EXPECT_GE(q, 0.0);
    }
    EXPECT_DOUBLE_EQ(run.queue_history.front(), 0.0);
  }
}

TEST(RunAdaScale, PowerFeasibleEveryRoundAndDevice) {
  PaperSetup s = paper_setup(100, 2e-6, 0.01, 29);
  const AdaScaleRun run = run_adascale(s.trace, s.profiles, s.config, s.noise);
  for (int t = 0; t < s.trace.num_rounds; ++t) {
    const double eta = run.decisions[t].eta;
    for (int m = 0; m < 10; ++m) {
      const double power = eta * s.config.clip_G * s.config.clip_G *
                           s.profiles[m].k_sq() /
                           (s.noise.model_dim * 100.0 * s.trace.gain_sq(t, m));
      EXPECT_LE(power, s.noise.p_max * (1.0 + 1e-12));
    }
  }
}

TEST(RunAdaScale, DeterministicAcrossRepeats) {
  PaperSetup s = paper_setup(60, 2e-6, 0.02, 31);
  const AdaScaleRun a = run_adascale(s.trace, s.profiles, s.config, s.noise);
  const AdaScaleRun b = run_adascale(s.trace, s.profiles, s.config, s.noise);
  ASSERT_EQ(a.decisions.size(), b.decisions.size());
  for (std::size_t t = 0; t < a.decisions.size(); ++t) {
    EXPECT_EQ(a.decisions[t].x, b.decisions[t].x);
    EXPECT_EQ(a.decisions[t].eta, b.decisions[t].eta);
    EXPECT_EQ(a.queue_history[t], b.queue_history[t]);
  }
  EXPECT_EQ(a.total_rho, b.total_rho);
}

TEST(RunAdaScale, KktHoldsOnEveryRound) {
  PaperSetup s = paper_setup(80, 2e-6, 0.01, 37);
  const AdaScaleRun run = run_adascale(s.trace, s.profiles, s.config, s.noise);
  for (int t = 0; t < s.trace.num_rounds; ++t) {
    const auto kappas = device_kappas_for_round(s.profiles, s.noise,
                                                s.config.clip_G,
                                                s.trace.h_min_sq[t]);
    const double c_t =
        s.noise.model_dim * s.noise.sigma_n_sq / s.trace.h_min_sq[t];
    const double Q = run.queue_history[t];
    const double x = run.decisions[t].x;
    if (x == s.config.x_max) {
      EXPECT_LE(per_round_derivative(x, Q, c_t, s.config, kappas), 0.0);
    } else {
      EXPECT_LT(
          per_round_derivative(std::max(x - s.config.bisect_tol, x * 0.5), Q,
                               c_t, s.config, kappas),
          0.0);
      EXPECT_GT(per_round_derivative(
                    std::min(x + s.config.bisect_tol, s.config.x_max), Q, c_t,
                    s.config, kappas),
                0.0);
    }
  }
}

}  // namespace
}  // namespace adascale

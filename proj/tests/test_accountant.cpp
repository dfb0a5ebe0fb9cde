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

#include "adascale/accountant.hpp"

#include <cmath>
#include <map>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace adascale {
namespace {

TEST(RdpOfSgm, FullSamplingCollapsesToGaussianMechanism) {
  // q = 1 keeps only the k = alpha term: rho = alpha / (2 sigma^2).
  const double rho = rdp_of_sgm(RdpOrder(3), SgmParams(1.0, 2.0));
  EXPECT_NEAR(rho, 3.0 / 8.0, 1e-15);
}

TEST(RdpOfSgm, VanishingSamplingRateGivesVanishingLeakage) {
  // q = 0 is out of domain, but rho -> 0 as q -> 0+.
  EXPECT_THROW(SgmParams(0.0, 2.0), std::invalid_argument);
  double prev = rdp_of_sgm(RdpOrder(3), SgmParams(1e-4, 2.0));
  for (double q : {1e-6, 1e-8, 1e-10}) {
    const double rho = rdp_of_sgm(RdpOrder(3), SgmParams(q, 2.0));
    EXPECT_LT(rho, prev);
    prev = rho;
  }
  EXPECT_LT(prev, 1e-12);
}

TEST(RdpOfSgm, MatchesFourTermHandSummation) {
  // alpha = 3, q = 0.1, sigma = 2: sum = 0.729 + 0.243 + 0.027 e^{1/4}
  // + 0.001 e^{3/4}; frozen from the extended-precision oracle.
  const double expected = static_cast<double>(
      test::rdp_direct_reference(3, 0.1L, 2.0L));
  EXPECT_NEAR(expected, 0.0043739, 1e-6);  // the coarse hand value
  const double rho = rdp_of_sgm(RdpOrder(3), SgmParams(0.1, 2.0));
  EXPECT_NEAR(rho, expected, 1e-9 * expected);
}

TEST(RdpOfSgm, RejectsBadArguments) {
  EXPECT_THROW(RdpOrder(1), std::invalid_argument);
  EXPECT_THROW(RdpOrder(-3), std::invalid_argument);
  EXPECT_THROW(SgmParams(1.5, 1.0), std::invalid_argument);
  EXPECT_THROW(SgmParams(-0.1, 1.0), std::invalid_argument);
  EXPECT_THROW(SgmParams(0.5, 0.0), std::invalid_argument);
  EXPECT_THROW(SgmParams(0.5, -1.0), std::invalid_argument);
}

TEST(RdpOfSgm, NoOverflowAtSmallSigmaLargeAlpha) {
  // The largest exponent is (alpha^2 - alpha)/(2 sigma^2) ~ 3.3e6; the
  // log-sum-exp path must return a finite value.
  const double rho = rdp_of_sgm(RdpOrder(256), SgmParams(0.5, 0.1));
  EXPECT_TRUE(std::isfinite(rho));
  EXPECT_GT(rho, 0.0);
}

TEST(RdpOfSgm, OracleEquivalenceGrid) {
  // Log-sum-exp vs extended-precision direct summation, relative 1e-10.
  const int alphas[] = {2, 3, 4, 8, 16, 32, 64};
  const double qs[] = {1e-3, 1e-2, 0.1, 0.5, 1.0};
  const double sigmas[] = {0.5, 1.0, 2.0, 10.0, 100.0};
  for (int alpha : alphas) {
    for (double q : qs) {
      for (double sigma : sigmas) {
        const double expected = static_cast<double>(test::rdp_direct_reference(
            alpha, static_cast<long double>(q),
            static_cast<long double>(sigma)));
        const double actual = rdp_of_sgm(RdpOrder(alpha), SgmParams(q, sigma));
        EXPECT_NEAR(actual, expected, 1e-10 * std::max(expected, 1e-300))
            << "alpha=" << alpha << " q=" << q << " sigma=" << sigma;
      }
    }
  }
}

TEST(RdpOfSgm, GaussianLimitAcrossOrders) {
  for (int alpha : {2, 3, 4, 8, 16, 32, 64}) {
    for (double sigma : {0.5, 1.0, 3.0, 10.0, 100.0}) {
      const double expected = alpha / (2.0 * sigma * sigma);
      const double actual = rdp_of_sgm(RdpOrder(alpha), SgmParams(1.0, sigma));
      EXPECT_NEAR(actual, expected, 1e-12 * expected);
    }
  }
}

TEST(RdpOfSgm, StrictlyDecreasingInSigma) {
  for (int alpha : {2, 3, 16}) {
    for (double q : {0.01, 0.5, 1.0}) {
      double prev = rdp_of_sgm(RdpOrder(alpha), SgmParams(q, 0.3));
      for (int i = 1; i < 50; ++i) {
        const double sigma = 0.3 * std::pow(400.0, i / 49.0);
        const double rho = rdp_of_sgm(RdpOrder(alpha), SgmParams(q, sigma));
        EXPECT_LT(rho, prev) << "alpha=" << alpha << " q=" << q
                             << " sigma=" << sigma;
        prev = rho;
      }
    }
  }
}

TEST(RdpOfSgm, NondecreasingInSamplingRate) {
  for (int alpha : {2, 3, 32}) {
    for (double sigma : {0.5, 2.0, 20.0}) {
      double prev = 0.0;
      for (int i = 1; i <= 40; ++i) {
        const double q = i / 40.0;
        const double rho = rdp_of_sgm(RdpOrder(alpha), SgmParams(q, sigma));
        EXPECT_GE(rho, prev - 1e-18);
        prev = rho;
      }
    }
  }
}

TEST(RdpOfSgm, NondecreasingInOrder) {
  for (double q : {0.01, 0.3, 1.0}) {
    for (double sigma : {0.7, 2.0, 30.0}) {
      double prev = 0.0;
      for (int alpha = 2; alpha <= 64; ++alpha) {
        const double rho = rdp_of_sgm(RdpOrder(alpha), SgmParams(q, sigma));
        EXPECT_GE(rho, prev * (1.0 - 1e-12));
        prev = rho;
      }
    }
  }
}

TEST(Compose, AccumulatesFromZero) {
  PrivacyLedger ledger(2, RdpOrder(3));
  ledger = compose(ledger, {0.1, 0.2});
  EXPECT_DOUBLE_EQ(ledger.per_device_rdp[0], 0.1);
  EXPECT_DOUBLE_EQ(ledger.per_device_rdp[1], 0.2);
  EXPECT_EQ(ledger.rounds_accumulated, 1);

  ledger = compose(ledger, {0.0, 0.0});
  EXPECT_DOUBLE_EQ(ledger.per_device_rdp[0], 0.1);
  EXPECT_DOUBLE_EQ(ledger.per_device_rdp[1], 0.2);
  EXPECT_EQ(ledger.rounds_accumulated, 2);

  PrivacyLedger other(2, RdpOrder(3));
  other = compose(other, {0.1, 0.2});
  other = compose(other, {0.3, 0.1});
  EXPECT_DOUBLE_EQ(other.per_device_rdp[0], 0.4);
  EXPECT_DOUBLE_EQ(other.per_device_rdp[1], 0.3);
  EXPECT_EQ(other.rounds_accumulated, 2);
}

TEST(Compose, AdditivityProperty) {
  test::TestRng rng(7);
  PrivacyLedger base(4, RdpOrder(2));
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(4), b(4), ab(4);
    for (int i = 0; i < 4; ++i) {
      a[i] = rng.uniform(0.0, 1.0);
      b[i] = rng.uniform(0.0, 1.0);
      ab[i] = a[i] + b[i];
    }
    const PrivacyLedger two_steps = compose(compose(base, a), b);
    const PrivacyLedger one_step = compose(base, ab);
    for (int i = 0; i < 4; ++i) {
      EXPECT_DOUBLE_EQ(two_steps.per_device_rdp[i], one_step.per_device_rdp[i]);
    }
  }
}

TEST(Compose, RejectsBadIncrements) {
  PrivacyLedger ledger(2, RdpOrder(3));
  EXPECT_THROW(compose(ledger, {0.1}), std::invalid_argument);
  EXPECT_THROW(compose(ledger, {0.1, 0.2, 0.3}), std::invalid_argument);
  EXPECT_THROW(compose(ledger, {0.1, -0.2}), std::invalid_argument);
}

TEST(RdpToDp, MatchesDirectEvaluation) {
  // rho = 1, alpha = 10, delta = 1e-5: 1 + ln(0.9) + 9.2103404/9.
  const DpGuarantee g = rdp_to_dp(1.0, RdpOrder(10), 1e-5);
  EXPECT_NEAR(g.epsilon, 1.9180107, 1e-6);
  EXPECT_EQ(g.order, 10);

  // rho = 0, alpha = 2, delta = 0.5: the bracket cancels, leaving ln(1/2).
  const DpGuarantee neg = rdp_to_dp(0.0, RdpOrder(2), 0.5);
  EXPECT_NEAR(neg.epsilon, std::log(0.5), 1e-15);
  EXPECT_LT(neg.epsilon, 0.0);  // reported as computed, not clamped

  // rho = 0.375, alpha = 3, delta = 1e-5: frozen direct evaluation.
  const double expected =
      0.375 + std::log(2.0 / 3.0) - (std::log(1e-5) + std::log(3.0)) / 2.0;
  EXPECT_NEAR(expected, 5.1766915, 1e-7);
  const DpGuarantee mid = rdp_to_dp(0.375, RdpOrder(3), 1e-5);
  EXPECT_NEAR(mid.epsilon, expected, 1e-12);
}

TEST(RdpToDp, RejectsBadArguments) {
  EXPECT_THROW(rdp_to_dp(-0.1, RdpOrder(3), 1e-5), std::invalid_argument);
  EXPECT_THROW(rdp_to_dp(1.0, RdpOrder(3), 0.0), std::invalid_argument);
  EXPECT_THROW(rdp_to_dp(1.0, RdpOrder(3), 1.0), std::invalid_argument);
  EXPECT_THROW(rdp_to_dp(1.0, RdpOrder(3), 1.5), std::invalid_argument);
}

TEST(BestDpOverOrders, SingletonAndDomination) {
  const DpGuarantee single = best_dp_over_orders({{4, 0.5}}, 1e-5);
  EXPECT_EQ(single.order, 4);
  EXPECT_NEAR(single.epsilon, rdp_to_dp(0.5, RdpOrder(4), 1e-5).epsilon, 0.0);

  // At equal rho the smaller order pays a larger conversion penalty here.
  const DpGuarantee two = best_dp_over_orders({{2, 1.0}, {16, 1.0}}, 1e-5);
  EXPECT_EQ(two.order, 16);
}

TEST(BestDpOverOrders, MatchesExhaustiveScan) {
  test::TestRng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    std::map<int, double> rho_at_orders;
    for (int alpha = 2; alpha <= 64; ++alpha) {
      // A rough composed-ledger shape: rho grows with order.
      rho_at_orders[alpha] = rng.uniform(0.0, 0.02) * alpha * alpha;
    }
    const DpGuarantee best = best_dp_over_orders(rho_at_orders, 1e-5);
    double scan = std::numeric_limits<double>::infinity();
    for (const auto& [alpha, rho] : rho_at_orders) {
      scan = std::min(scan, rdp_to_dp(rho, RdpOrder(alpha), 1e-5).epsilon);
    }
    EXPECT_DOUBLE_EQ(best.epsilon, scan);
  }
}

TEST(BestDpOverOrders, RejectsEmptyMap) {
  EXPECT_THROW(best_dp_over_orders({}, 1e-5), std::invalid_argument);
}

}  // namespace
}  // namespace adascale

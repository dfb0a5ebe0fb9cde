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
// Test-only oracles, kept independent of the implementation paths they check:
// extended-precision direct summation for the sampled-Gaussian RDP, central
// finite differences, and a tiny deterministic uniform generator for
// randomized test instances.

#ifndef ADASCALE_TESTS_ORACLES_HPP
#define ADASCALE_TESTS_ORACLES_HPP

#include <cmath>
#include <cstdint>
#include <functional>

namespace adascale::test {

// Direct summation of the sampled-Gaussian RDP series in 80-bit long double:
//   rho = ln( sum_k C(alpha,k) (1-q)^(alpha-k) q^k e^{(k^2-k)/(2 sigma^2)} )
//         / (alpha - 1).
// The k = 0 and k = 1 exponents are zero and the binomial weights sum to one
// exactly, so the series is summed with the unit constant split off
// (log1p of sum_{k>=2} w_k expm1(b_k)), which keeps full long-double relative
// precision even when the leakage is ~1e-10. Valid wherever the largest term
// fits a long double (alpha <= 64 and sigma >= 0.5 comfortably qualify).
inline long double rdp_direct_reference(int alpha, long double q,
                                        long double sigma) {
  long double d = 0.0L;
  long double binom = 1.0L;  // C(alpha, 0)
  for (int k = 0; k <= alpha; ++k) {
    if (k >= 2) {
      const long double w =
          binom * std::pow(1.0L - q, alpha - k) * std::pow(q, k);
      d += w * std::expm1((static_cast<long double>(k) * k - k) /
                          (2.0L * sigma * sigma));
    }
    binom = binom * (alpha - k) / (k + 1);
  }
  return std::log1p(d) / (alpha - 1);
}

inline double central_difference(const std::function<double(double)>& f,
                                 double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double second_difference(const std::function<double(double)>& f,
                                double x, double h) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

// Deterministic uniform variates for randomized test instances (xorshift64*);
// unrelated to the library's keyed streams.
class TestRng {
 public:
  explicit TestRng(std::uint64_t seed) : state_(seed ? seed : 1) {}
  std::uint64_t next_u64() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545f4914f6cdd1dULL;
  }
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(next_u64() % (hi - lo + 1));
  }
 private:
  std::uint64_t state_;
};

}  // namespace adascale::test

#endif  // ADASCALE_TESTS_ORACLES_HPP

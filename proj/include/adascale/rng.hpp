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

#ifndef ADASCALE_RNG_HPP
#define ADASCALE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace adascale {

// SplitMix64 (Steele, Lea & Flood, "Fast splittable pseudorandom number
// generators"). One multiply-xorshift finalizer per output, 2^64 period per
// stream. All randomness in this library flows through keyed streams of this
// generator, so identical (seed, tag, round, device) inputs reproduce
// bit-identical draws on any platform with IEEE-754 doubles.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; draws come in pairs and the second is
  // cached, so a stream consumes one uint64 pair per two normals.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

namespace detail {

inline constexpr std::uint64_t kSplitMixGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Purpose tags keep independent uses of the same experiment seed decorrelated.
struct StreamTag {
  std::uint64_t value;
  constexpr explicit StreamTag(std::string_view name)
      : value(detail::fnv1a64(name)) {}
};

inline constexpr StreamTag kTagPlacement{"placement"};
inline constexpr StreamTag kTagFading{"fading"};
inline constexpr StreamTag kTagSampling{"sampling"};
inline constexpr StreamTag kTagNoiseRe{"noise_re"};
inline constexpr StreamTag kTagNoiseIm{"noise_im"};
inline constexpr StreamTag kTagProblem{"problem"};

// Derives the stream state for (experiment seed, purpose, round, device) by
// chaining the SplitMix64 finalizer over the key fields.
inline SplitMix64 make_stream(std::uint64_t seed, StreamTag tag,
                              std::uint64_t round = 0,
                              std::uint64_t device = 0) {
  using detail::kSplitMixGamma;
  using detail::mix64;
  std::uint64_t s = mix64(seed + kSplitMixGamma);
  s = mix64(s ^ tag.value);
  s = mix64(s + round * kSplitMixGamma);
  s = mix64(s + device * kSplitMixGamma);
  return SplitMix64(s);
}

}  // namespace adascale

#endif  // ADASCALE_RNG_HPP

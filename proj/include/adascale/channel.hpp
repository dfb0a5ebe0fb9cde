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
// Device placement, COST-Hata path loss, and i.i.d. Rayleigh channel traces.
// Every method in the library consumes channels only through the per-round
// minimum normalized gain min_m |h_{m,t}|^2 / k_m^2 that a trace precomputes.

#ifndef ADASCALE_CHANNEL_HPP
#define ADASCALE_CHANNEL_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "adascale/rng.hpp"

namespace adascale {

// Static per-device parameters. q_m and k_m^2 are derived from the batch and
// dataset sizes so the Poisson-sampling identities hold by construction.
struct DeviceProfile {
  int index = 0;
  double distance_m = 0.0;        // meters from the server
  double path_loss_linear = 1.0;  // PL_m as a linear power ratio
  int batch_size = 1;             // expected batch size B_m
  int dataset_size = 1;           // n_m
  double loss_weight = 1.0;       // c_m

  double sampling_rate() const {
    return static_cast<double>(batch_size) / dataset_size;
  }
  // E[|B|^2]/B^2 = 1 + (1 - q)/B under Poisson sampling.
  double k_sq() const { return 1.0 + (1.0 - sampling_rate()) / batch_size; }

  void validate() const {
    if (batch_size < 1 || dataset_size < 1 || batch_size > dataset_size) {
      throw std::invalid_argument(
          "DeviceProfile: need 1 <= batch_size <= dataset_size");
    }
    if (!(path_loss_linear > 0.0)) {
      throw std::invalid_argument("DeviceProfile: path loss must be > 0");
    }
  }
};

// Receiver noise power (watts), per-device power budget (watts), and the
// model dimension d that scales the per-round constraint coefficient.
struct NoiseSpec {
  double sigma_n_sq;
  double p_max;
  int model_dim;

  void validate() const {
    if (!(sigma_n_sq > 0.0) || !(p_max > 0.0) || model_dim < 1) {
      throw std::invalid_argument("NoiseSpec: all fields must be positive");
    }
  }
  double sigma_n() const { return std::sqrt(sigma_n_sq); }
};

inline double dbm_to_watts(double value_dbm) {
  return std::pow(10.0, (value_dbm - 30.0) / 10.0);
}

// COST Hata path loss 33.44 + 35.22 log10(d) dB, returned as a linear ratio.
inline double cost_hata_path_loss(double distance_m) {
  if (!(distance_m > 0.0)) {
    throw std::invalid_argument("cost_hata_path_loss: distance must be > 0");
  }
  return std::pow(10.0, (33.44 + 35.22 * std::log10(distance_m)) / 10.0);
}

// T x M complex fading trace plus the derived per-round minimum normalized
// gain. Immutable after generation; identical inputs give bit-identical
// traces.
struct ChannelTrace {
  int num_rounds = 0;
  int num_devices = 0;
  std::vector<std::complex<double>> h;  // row-major [t * M + m]
  std::vector<double> h_min_sq;         // min_m |h[t,m]|^2 / k_m^2
  std::uint64_t fading_seed = 0;

  const std::complex<double>& at(int t, int m) const {
    return h[static_cast<std::size_t>(t) * num_devices + m];
  }
  double gain_sq(int t, int m) const { return std::norm(at(t, m)); }
};

// h_{m,t} ~ CN(0, 1/PL_m): independent real/imaginary parts with variance
// 1/(2 PL_m) each, streamed per (seed, round, device).
inline ChannelTrace generate_trace(const std::vector<DeviceProfile>& profiles,
                                   int num_rounds, std::uint64_t seed) {
  if (profiles.empty()) {
    throw std::invalid_argument("generate_trace: empty profile list");
  }
  if (num_rounds < 1) {
    throw std::invalid_argument("generate_trace: need at least one round");
  }
  for (const auto& p : profiles) p.validate();

  const int num_devices = static_cast<int>(profiles.size());
  ChannelTrace trace;
  trace.num_rounds = num_rounds;
  trace.num_devices = num_devices;
  trace.fading_seed = seed;
  trace.h.resize(static_cast<std::size_t>(num_rounds) * num_devices);
  trace.h_min_sq.resize(num_rounds);

  std::vector<double> scale(num_devices), k_sq(num_devices);
  for (int m = 0; m < num_devices; ++m) {
    scale[m] = std::sqrt(0.5 / profiles[m].path_loss_linear);
    k_sq[m] = profiles[m].k_sq();
  }

  for (int t = 0; t < num_rounds; ++t) {
    double min_norm = std::numeric_limits<double>::infinity();
    for (int m = 0; m < num_devices; ++m) {
      SplitMix64 stream = make_stream(seed, kTagFading, t, m);
      const double re = scale[m] * stream.normal();
      const double im = scale[m] * stream.normal();
      trace.h[static_cast<std::size_t>(t) * num_devices + m] = {re, im};
      min_norm = std::min(min_norm, (re * re + im * im) / k_sq[m]);
    }
    trace.h_min_sq[t] = min_norm;
  }
  return trace;
}

// Exact mean of min_m |h_m|^2 / k_m^2: the |h_m|^2 are independent
// exponentials with rate PL_m, so the normalized minimum is exponential with
// rate sum_m PL_m k_m^2. This is the MMSE prediction of a future i.i.d. draw.
inline double expected_h_min_sq(const std::vector<DeviceProfile>& profiles) {
  if (profiles.empty()) {
    throw std::invalid_argument("expected_h_min_sq: empty profile list");
  }
  double rate = 0.0;
  for (const auto& p : profiles) rate += p.path_loss_linear * p.k_sq();
  return 1.0 / rate;
}

// Uniform[r_min, r_max] placements with COST-Hata losses; the placement seed
// is independent of the fading seed so sweeps can hold placement fixed.
inline std::vector<DeviceProfile> make_placed_profiles(
    int num_devices, double r_min, double r_max, int batch_size,
    int dataset_size, double loss_weight, std::uint64_t placement_seed) {
  if (num_devices < 1) {
    throw std::invalid_argument("make_placed_profiles: need >= 1 device");
  }
  if (!(r_min > 0.0) || !(r_max >= r_min)) {
    throw std::invalid_argument("make_placed_profiles: bad radius range");
  }
  std::vector<DeviceProfile> profiles(num_devices);
  for (int m = 0; m < num_devices; ++m) {
    SplitMix64 stream = make_stream(placement_seed, kTagPlacement, 0, m);
    DeviceProfile& p = profiles[m];
    p.index = m;
    p.distance_m = stream.uniform(r_min, r_max);
    p.path_loss_linear = cost_hata_path_loss(p.distance_m);
    p.batch_size = batch_size;
    p.dataset_size = dataset_size;
    p.loss_weight = loss_weight;
    p.validate();
  }
  return profiles;
}

}  // namespace adascale

#endif  // ADASCALE_CHANNEL_HPP

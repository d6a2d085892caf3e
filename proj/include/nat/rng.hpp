/* Copyright 2026 The natcpu Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "nat/tensor.hpp"

namespace nat {

/// SplitMix64 stream. Uniforms take the top 53 bits of each draw; normals use the
/// Box-Muller cosine branch and discard the sine branch so every normal consumes
/// exactly two draws. The stream depends only on the seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Normal with standard deviation `stddev`, resampled until within two deviations.
  double truncated_normal(double stddev) {
    for (;;) {
      double z = normal();
      if (std::abs(z) <= 2.0) return z * stddev;
    }
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

template <typename Scalar>
Tensor<Scalar> random_normal(Shape shape, Rng& rng, double stddev = 1.0) {
  Tensor<Scalar> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<Scalar>(rng.normal() * stddev);
  return t;
}

template <typename Scalar>
Tensor<Scalar> random_uniform(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<Scalar> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<Scalar>(rng.uniform(lo, hi));
  return t;
}

template <typename Scalar>
Tensor<Scalar> random_truncated_normal(Shape shape, Rng& rng, double stddev) {
  Tensor<Scalar> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<Scalar>(rng.truncated_normal(stddev));
  return t;
}

}  // namespace nat

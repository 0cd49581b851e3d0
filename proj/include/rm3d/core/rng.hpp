// Copyright 2026 The rm3d Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>

namespace rm3d {

/// Seedable PRNG used for every stochastic choice in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The integer and real conversions below are spelled out instead of
/// using <random> distributions (which are implementation-defined), so scenes,
/// transmitter placements, masks and splits reproduce bit-for-bit on any
/// conforming platform:
///   - uniform():   (next_u64() >> 11) * 2^-53, a double in [0, 1)
///   - below(n):    rejection sampling on the top of the 64-bit range, unbiased
///
/// normal() uses std::normal_distribution and is only reproducible for a given
/// standard library; it is reserved for diffusion noise.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Uniform integer in [lo, hi], inclusive.
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  double normal() { return normal_(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace rm3d

// Copyright 2026 The dpfl Authors
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

#ifndef DPFL_RNG_HPP_
#define DPFL_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace dpfl {

/// Derives an independent stream seed from a master seed (splitmix64 mix).
/// Streams with distinct salts are decorrelated; the mapping is fixed so a
/// run is fully determined by the master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seeded random stream with one owner per consumer. Identical seed and call
/// sequence reproduce identical draws. Gaussian variates use Box-Muller on
/// explicit 53-bit uniforms instead of std::normal_distribution, whose
/// algorithm is unspecified and varies across standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_int(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_int: bound must be positive");
    return gen_() % bound;
  }

  /// N(0, stddev^2) draw; one variate per call, two uniforms consumed.
  double gaussian(double stddev) {
    double u1;
    do {
      u1 = uniform();
    } while (u1 == 0.0);
    const double u2 = uniform();
    constexpr double kTwoPi = 6.283185307179586;
    return stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  /// In-place Fisher-Yates shuffle. Hand-rolled because std::shuffle leaves
  /// the draw sequence unspecified.
  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

// Fixed salts for the streams a simulation owns. Client k uses kSaltClientBase + k.
namespace seed_salt {
inline constexpr std::uint64_t kModelInit = 0;
inline constexpr std::uint64_t kSynthTrain = 1;
inline constexpr std::uint64_t kSynthEval = 2;
inline constexpr std::uint64_t kPartition = 3;
inline constexpr std::uint64_t kValTestSplit = 4;
inline constexpr std::uint64_t kClientBase = 1000;
}  // namespace seed_salt

}  // namespace dpfl

#endif  // DPFL_RNG_HPP_

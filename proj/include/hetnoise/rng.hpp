/*
 * Copyright 2026 The HetNoise Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace hetnoise {

// SplitMix64 output finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ull;

// Derives an independent 64-bit key from a parent key and a label.
constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t label) {
  return mix64(mix64(parent + kGoldenGamma) ^ mix64(label * kGoldenGamma + 0x632be59bd9b4e019ull));
}

/// Counter-based random source.
///
/// Every value is a pure function of (seed, stream, row, column, lane), so
/// draws do not depend on the order in which they are requested. A stream is
/// typically one input sample; rows are Monte Carlo sample indices and
/// columns are class indices.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(derive_key(seed, stream)) {}

  constexpr std::uint64_t key() const { return key_; }

  constexpr std::uint64_t bits(std::uint64_t row, std::uint64_t col, std::uint64_t lane = 0) const {
    const std::uint64_t r = mix64(key_ ^ mix64(row + kGoldenGamma));
    return mix64(r + (col * 2 + lane + 1) * kGoldenGamma);
  }

  // Uniform on the open interval (0, 1).
  double uniform(std::uint64_t row, std::uint64_t col, std::uint64_t lane = 0) const {
    return (static_cast<double>(bits(row, col, lane) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on two independent lanes.
  double normal(std::uint64_t row, std::uint64_t col) const {
    const double u1 = uniform(row, col, 0);
    const double u2 = uniform(row, col, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n) by multiply-shift; n > 0.
  std::uint64_t below(std::uint64_t n, std::uint64_t row, std::uint64_t col = 0) const {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits(row, col)) * n) >> 64);
  }

 private:
  std::uint64_t key_;
};

}  // namespace hetnoise

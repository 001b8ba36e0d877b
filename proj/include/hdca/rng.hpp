/**
 * Copyright 2026 The Hybrid-DCA Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Small deterministic RNG helpers shared by partitioning and sampling.

#include <cstddef>
#include <cstdint>
#include <random>

namespace hdca {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the sampling stream of core r of worker k in round t.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t k, std::uint64_t r,
                                 std::uint64_t t) noexcept {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (k + 0x1000193ULL));
  h = splitmix64(h ^ (r + 0x2545f491ULL));
  return splitmix64(h ^ (t + 0x5851f42dULL));
}

/// Unbiased draw from [0, bound) by rejection; portable across standard
/// libraries, unlike std::uniform_int_distribution.
inline std::size_t uniform_below(std::mt19937_64& rng, std::size_t bound) {
  const std::uint64_t b = bound;
  const std::uint64_t limit = (~std::uint64_t{0} / b) * b;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % b);
}

}  // namespace hdca

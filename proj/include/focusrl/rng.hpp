/* Copyright 2026 The focusrl Authors. All Rights Reserved.

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

#include <cstdint>
#include <initializer_list>
#include <random>

namespace focusrl {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds a list of stream coordinates (master seed, purpose, index, ...) into
// one seed. Distinct coordinate tuples give independent streams.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

inline Rng make_rng(std::initializer_list<std::uint64_t> parts) {
  return Rng(derive_seed(parts));
}

// Stream purposes, used as the second coordinate of derive_seed.
enum class Stream : std::uint64_t {
  kScene = 1,
  kTask = 2,
  kInit = 3,
  kSft = 4,
  kDatagen = 5,
  kStage1 = 6,
  kStage2 = 7,
  kEval = 8,
  kBaseline = 9,
};

inline std::uint64_t stream(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace focusrl

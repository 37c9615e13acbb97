// Copyright 2026 The peguard Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Feature hashing used by every hashed feature group and by skipgrams.
//
//   hash(token) = fmix32(FNV-1a-32(token, basis = 2166136261 ^ seed))
//
// fmix32 is the MurmurHash3 finalizer. Signed groups take the bucket as
// hash % buckets and the sign from bit 31 (set = -1). Model files depend on
// these constants; changing them invalidates trained models.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "peguard/bytes.hpp"

namespace peguard {

inline constexpr std::uint32_t kFnvOffsetBasis = 2166136261u;
inline constexpr std::uint32_t kFnvPrime = 16777619u;
inline constexpr std::uint32_t kFeatureHashSeed = 0x2F6B3D91u;

constexpr std::uint32_t fmix32(std::uint32_t h) {
  h ^= h >> 16;
  h *= 0x85EBCA6Bu;
  h ^= h >> 13;
  h *= 0xC2B2AE35u;
  h ^= h >> 16;
  return h;
}

constexpr std::uint32_t fnv1a32_step(std::uint32_t state, std::uint8_t byte) {
  return (state ^ byte) * kFnvPrime;
}

inline std::uint32_t feature_hash(ByteView token, std::uint32_t seed = kFeatureHashSeed) {
  std::uint32_t state = kFnvOffsetBasis ^ seed;
  for (auto b : token) state = fnv1a32_step(state, b);
  return fmix32(state);
}

inline std::uint32_t feature_hash(std::string_view token, std::uint32_t seed = kFeatureHashSeed) {
  return feature_hash(as_bytes(token), seed);
}

struct HashedSlot {
  std::size_t bucket = 0;
  double sign = 1.0;
};

inline HashedSlot signed_slot(std::string_view token, std::size_t buckets) {
  const auto h = feature_hash(token);
  return {h % buckets, (h >> 31) ? -1.0 : 1.0};
}

}  // namespace peguard

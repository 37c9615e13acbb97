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

// Byte skipgrams: k-skip n-grams over a byte stream, hashed into a fixed
// number of buckets with plain (unsigned) counts.
//
// A tuple is (b[i1], ..., b[in]) with i1 < ... < in and every gap
// i(j+1) - i(j) - 1 in [0, k], i.e. *up to* k skipped positions between
// consecutive tokens. Bucket = feature_hash(tuple bytes) & (buckets - 1).
// Counts are absolute; appending bytes can only add tuples.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "peguard/bytes.hpp"

namespace peguard {

struct SkipgramConfig {
  std::size_t n = 3;
  std::size_t k = 3;
  std::size_t buckets = std::size_t{1} << 16;
  /// Maximum number of tuples enumerated before InputTooLarge.
  std::uint64_t work_bound = std::uint64_t{1} << 31;

  void validate() const;
};

struct SkipgramVector {
  std::vector<std::uint32_t> counts;
};

using Skipgram = std::vector<std::uint8_t>;

/// Exact multiset of tuples. Intended for small inputs and tests.
std::map<Skipgram, std::uint64_t> enumerate_skipgrams(ByteView bytes, std::size_t n, std::size_t k);

/// Number of tuples enumerate_skipgrams would produce, without enumerating.
std::uint64_t count_skipgram_tuples(std::size_t length, std::size_t n, std::size_t k);

std::uint32_t skipgram_bucket(ByteView tuple, std::size_t buckets);

/// Throws InputTooLarge when the tuple count exceeds config.work_bound.
SkipgramVector skipgram_vector(ByteView bytes, const SkipgramConfig& config = {});

/// Enumerates tuples starting at every \p stride-th position only.
SkipgramVector skipgram_vector_sampled(ByteView bytes, const SkipgramConfig& config,
                                       std::size_t stride);

/// skipgram_vector, falling back to stride sampling sized to fit the work
/// bound. \p sampled_stride receives the stride used (1 = exact).
SkipgramVector skipgram_vector_bounded(ByteView bytes, const SkipgramConfig& config = {},
                                       std::size_t* sampled_stride = nullptr);

std::vector<double> to_dense(const SkipgramVector& v);

}  // namespace peguard

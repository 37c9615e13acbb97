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

#include "peguard/skipgram.hpp"

#include <bit>

#include "peguard/error.hpp"
#include "peguard/hashing.hpp"

namespace peguard {
namespace {

// Walks every tuple starting at positions start, start+stride, ...; the
// visitor receives the FNV state after each complete tuple.
template <typename Visit>
void walk(ByteView bytes, std::size_t n, std::size_t k, std::size_t stride, Visit&& visit) {
  const std::size_t len = bytes.size();
  if (n == 0 || len < n) return;
  const std::uint32_t basis = kFnvOffsetBasis ^ kFeatureHashSeed;

  if (n == 3) {
    for (std::size_t i = 0; i < len; i += stride) {
      const std::uint32_t s1 = fnv1a32_step(basis, bytes[i]);
      const std::size_t j_end = std::min(len, i + k + 2);
      for (std::size_t j = i + 1; j < j_end; ++j) {
        const std::uint32_t s2 = fnv1a32_step(s1, bytes[j]);
        const std::size_t l_end = std::min(len, j + k + 2);
        for (std::size_t l = j + 1; l < l_end; ++l) visit(fnv1a32_step(s2, bytes[l]));
      }
    }
    return;
  }

  std::vector<std::size_t> idx(n);
  std::vector<std::uint32_t> state(n + 1);
  for (std::size_t i = 0; i < len; i += stride) {
    // Depth-first over gap choices.
    idx[0] = i;
    state[1] = fnv1a32_step(basis, bytes[i]);
    std::size_t depth = 1;
    if (n == 1) {
      visit(state[1]);
      continue;
    }
    idx[1] = i;  // advanced before use
    while (depth > 0) {
      const std::size_t next = ++idx[depth];
      if (next >= len || next > idx[depth - 1] + k + 1) {
        --depth;
        continue;
      }
      state[depth + 1] = fnv1a32_step(state[depth], bytes[next]);
      if (depth + 1 == n) {
        visit(state[n]);
      } else {
        ++depth;
        idx[depth] = next;
      }
    }
  }
}

}  // namespace

void SkipgramConfig::validate() const {
  if (n < 1) throw Error("skipgram: n must be >= 1");
  if (buckets == 0 || !std::has_single_bit(buckets)) {
    throw Error("skipgram: buckets must be a power of two");
  }
}

std::map<Skipgram, std::uint64_t> enumerate_skipgrams(ByteView bytes, std::size_t n,
                                                      std::size_t k) {
  std::map<Skipgram, std::uint64_t> out;
  if (n == 0 || bytes.size() < n) return out;
  std::vector<std::size_t> idx(n);
  Skipgram tuple(n);
  // Same depth-first order as walk(), but materializing tuples.
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    idx[0] = i;
    tuple[0] = bytes[i];
    if (n == 1) {
      ++out[tuple];
      continue;
    }
    std::size_t depth = 1;
    idx[1] = i;
    while (depth > 0) {
      const std::size_t next = ++idx[depth];
      if (next >= bytes.size() || next > idx[depth - 1] + k + 1) {
        --depth;
        continue;
      }
      tuple[depth] = bytes[next];
      if (depth + 1 == n) {
        ++out[tuple];
      } else {
        ++depth;
        idx[depth] = next;
      }
    }
  }
  return out;
}

std::uint64_t count_skipgram_tuples(std::size_t length, std::size_t n, std::size_t k) {
  if (n == 0 || length < n) return 0;
  // ways[p] = number of (n - m)-suffixes that can start at position p,
  // built backwards one token at a time.
  std::vector<std::uint64_t> ways(length, 1), next(length, 0);
  for (std::size_t m = 1; m < n; ++m) {
    // prefix sums for window queries
    std::vector<std::uint64_t> suffix(length + 1, 0);
    for (std::size_t p = length; p-- > 0;) suffix[p] = suffix[p + 1] + ways[p];
    for (std::size_t p = 0; p < length; ++p) {
      const std::size_t lo = p + 1;
      const std::size_t hi = std::min(length, p + k + 2);
      next[p] = lo < hi ? suffix[lo] - suffix[hi] : 0;
    }
    ways.swap(next);
  }
  std::uint64_t total = 0;
  for (auto w : ways) total += w;
  return total;
}

std::uint32_t skipgram_bucket(ByteView tuple, std::size_t buckets) {
  return feature_hash(tuple) & static_cast<std::uint32_t>(buckets - 1);
}

SkipgramVector skipgram_vector_sampled(ByteView bytes, const SkipgramConfig& config,
                                       std::size_t stride) {
  config.validate();
  SkipgramVector out{std::vector<std::uint32_t>(config.buckets, 0)};
  const auto mask = static_cast<std::uint32_t>(config.buckets - 1);
  auto* counts = out.counts.data();
  walk(bytes, config.n, config.k, std::max<std::size_t>(stride, 1),
       [&](std::uint32_t state) { ++counts[fmix32(state) & mask]; });
  return out;
}

SkipgramVector skipgram_vector(ByteView bytes, const SkipgramConfig& config) {
  config.validate();
  if (count_skipgram_tuples(bytes.size(), config.n, config.k) > config.work_bound) {
    throw InputTooLarge("skipgram enumeration exceeds work bound");
  }
  return skipgram_vector_sampled(bytes, config, 1);
}

SkipgramVector skipgram_vector_bounded(ByteView bytes, const SkipgramConfig& config,
                                       std::size_t* sampled_stride) {
  const auto total = count_skipgram_tuples(bytes.size(), config.n, config.k);
  std::size_t stride = 1;
  if (total > config.work_bound) {
    stride = static_cast<std::size_t>((total + config.work_bound - 1) / config.work_bound);
  }
  if (sampled_stride) *sampled_stride = stride;
  return skipgram_vector_sampled(bytes, config, stride);
}

std::vector<double> to_dense(const SkipgramVector& v) {
  return std::vector<double>(v.counts.begin(), v.counts.end());
}

}  // namespace peguard

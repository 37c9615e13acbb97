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

#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "peguard/error.hpp"
#include "peguard/skipgram.hpp"
#include "peguard/synth.hpp"

namespace peguard {
namespace {

std::vector<std::uint32_t> bucketize(const std::map<Skipgram, std::uint64_t>& tuples, std::size_t buckets) {
  std::vector<std::uint32_t> out(buckets, 0);
  for (const auto& [t, c] : tuples) out[oracle::feature_hash(ByteView(t)) & (buckets - 1)] += c;
  return out;
}

TEST(Skipgram, HandExample) {
  // "abcd", n=2, k=1: ab ac bc bd cd
  const auto t = enumerate_skipgrams(to_bytes("abcd"), 2, 1);
  std::map<Skipgram, std::uint64_t> want;
  for (const char* s : {"ab", "ac", "bc", "bd", "cd"}) ++want[Skipgram(s, s + 2)];
  EXPECT_EQ(t, want);
  EXPECT_TRUE(enumerate_skipgrams(to_bytes("ab"), 3, 3).empty());
}

TEST(Skipgram, EnumerationMatchesOracle) {
  synth::Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    Bytes data = synth::random_bytes(rng, rng.between(0, 128));
    for (auto& b : data) b = static_cast<std::uint8_t>(b % rng.between(1, 8));  // force repeats
    const std::size_t n = rng.between(1, 4);
    const std::size_t k = rng.between(0, 4);
    const auto got = enumerate_skipgrams(data, n, k);
    ASSERT_EQ(got, oracle::skipgrams(data, n, k)) << "case " << i;
    std::uint64_t total = 0;
    for (const auto& [t, c] : got) total += c;
    ASSERT_EQ(total, count_skipgram_tuples(data.size(), n, k));
  }
}

TEST(Skipgram, HashedVectorMatchesOracle) {
  synth::Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Bytes data = synth::random_bytes(rng, rng.between(0, 128));
    SkipgramConfig config;
    config.n = rng.between(1, 4);
    config.k = rng.between(0, 3);
    config.buckets = std::size_t{1} << rng.between(4, 12);
    EXPECT_EQ(skipgram_vector(data, config).counts,
              bucketize(oracle::skipgrams(data, config.n, config.k), config.buckets));
  }
}

TEST(Skipgram, TupleCountClosedForms) {
  // k=0 is contiguous n-grams
  EXPECT_EQ(count_skipgram_tuples(100, 3, 0), 98u);
  // n=2: every pair with gap <= k
  EXPECT_EQ(count_skipgram_tuples(10, 2, 3), 9u + 8u + 7u + 6u);
  EXPECT_EQ(count_skipgram_tuples(2, 3, 3), 0u);
  EXPECT_EQ(count_skipgram_tuples(0, 1, 0), 0u);
  // far from the end each start has (k+1)^(n-1) tuples
  const auto big = count_skipgram_tuples(1000000, 3, 3);
  EXPECT_LE(big, 1000000u * 16u);
  EXPECT_GE(big, (1000000u - 8u) * 16u);
}

TEST(Skipgram, AppendOnlyAddsCounts) {
  synth::Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Bytes base = synth::random_bytes(rng, rng.between(0, 300));
    Bytes longer = base;
    const Bytes extra = synth::random_bytes(rng, rng.between(1, 100));
    longer.insert(longer.end(), extra.begin(), extra.end());
    SkipgramConfig config;
    config.buckets = 1024;
    const auto a = skipgram_vector(base, config).counts;
    const auto b = skipgram_vector(longer, config).counts;
    for (std::size_t j = 0; j < a.size(); ++j) ASSERT_LE(a[j], b[j]);
  }
}

TEST(Skipgram, TotalMassEqualsTupleCount) {
  synth::Rng rng(4);
  const Bytes data = synth::random_bytes(rng, 5000);
  const auto v = skipgram_vector(data);
  EXPECT_EQ(v.counts.size(), 65536u);
  EXPECT_EQ(std::accumulate(v.counts.begin(), v.counts.end(), std::uint64_t{0}),
            count_skipgram_tuples(5000, 3, 3));
}

TEST(Skipgram, WorkBound) {
  SkipgramConfig config;
  config.work_bound = 1000;
  const Bytes data(2000, 1);
  EXPECT_THROW(skipgram_vector(data, config), InputTooLarge);
  std::size_t stride = 0;
  const auto v = skipgram_vector_bounded(data, config, &stride);
  EXPECT_GT(stride, 1u);
  const auto mass = std::accumulate(v.counts.begin(), v.counts.end(), std::uint64_t{0});
  EXPECT_LE(mass, config.work_bound * 2);
  EXPECT_GT(mass, 0u);

  std::size_t exact = 0;
  skipgram_vector_bounded(Bytes(10, 1), config, &exact);
  EXPECT_EQ(exact, 1u);
}

TEST(Skipgram, ConfigValidation) {
  SkipgramConfig bad;
  bad.buckets = 1000;
  EXPECT_THROW(skipgram_vector(Bytes(10, 1), bad), Error);
  SkipgramConfig zero;
  zero.n = 0;
  EXPECT_THROW(zero.validate(), Error);
}

}  // namespace
}  // namespace peguard

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

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "peguard/features.hpp"
#include "peguard/hashing.hpp"
#include "peguard/synth.hpp"

namespace peguard {
namespace {

void expect_close(std::span<const double> got, std::span<const double> want, double tol = 1e-12) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "index " << i;
}

std::span<const double> group(const FeatureVector& fv, const VariantConfig& c, FeatureGroup g) {
  for (const auto& span : feature_layout(c)) {
    if (span.group == g) return std::span<const double>(fv.values).subspan(span.offset, span.length);
  }
  ADD_FAILURE() << "group missing";
  return {};
}

TEST(FeatureLayout, Dimensions) {
  EXPECT_EQ(variant_default().dimension(), 2169u);
  EXPECT_EQ(variant_v1().dimension(), 2169u);
  EXPECT_EQ(variant_v2().dimension(), 1531u);
  EXPECT_EQ(variant_v3().dimension(), 1531u);
  EXPECT_EQ(variant_v3().corpus_tag, "2018");
  EXPECT_FALSE(variant_by_name("v9").has_value());
  for (const auto& name : ember_variant_names()) {
    const auto c = *variant_by_name(name);
    std::size_t sum = 1;
    for (const auto& span : feature_layout(c)) sum += span.length;
    EXPECT_EQ(sum, c.dimension());
    EXPECT_EQ(extract_features(synth::make_fixture(1), c).values.size(), c.dimension());
  }
}

TEST(FeatureHashing, MatchesIndependentHash) {
  synth::Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Bytes token = synth::random_bytes(rng, rng.between(0, 40));
    EXPECT_EQ(feature_hash(ByteView(token)), oracle::feature_hash(ByteView(token)));
  }
  for (std::string s : {"", "kernel32.dll", "kernel32.dll:ExitProcess", ".text", "ws2_32.dll:ordinal23"}) {
    for (std::size_t buckets : {50u, 128u, 256u, 1024u}) {
      const auto a = signed_slot(s, buckets);
      const auto b = oracle::signed_bucket(s, buckets);
      EXPECT_EQ(a.bucket, b.bucket);
      EXPECT_EQ(a.sign, b.sign);
    }
  }
}

TEST(FeatureEntropy, MatchesLongDoubleOracle) {
  synth::Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    Bytes data = synth::random_bytes(rng, rng.between(1, 5000));
    const auto alphabet = rng.between(1, 256);
    for (auto& b : data) b = static_cast<std::uint8_t>(b % alphabet);
    std::array<std::uint64_t, 256> counts{};
    for (auto b : data) ++counts[b];
    EXPECT_NEAR(shannon_entropy(data), static_cast<double>(oracle::entropy_bits(counts)), 1e-9);
  }
  EXPECT_EQ(shannon_entropy(Bytes{}), 0.0);
  EXPECT_EQ(shannon_entropy(Bytes(100, 7)), 0.0);
  Bytes all(256);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_NEAR(shannon_entropy(all), 8.0, 1e-12);
}

TEST(FeatureHistograms, MatchOraclesAcrossWindowBoundaries) {
  synth::Rng rng(21);
  for (std::size_t n : {1u, 255u, 256u, 2047u, 2048u, 2049u, 2303u, 2304u, 3071u, 3072u, 3073u,
                        3327u, 3328u, 4096u, 4351u, 4352u, 10000u, 65537u}) {
    Bytes data = synth::random_bytes(rng, n);
    // vary local entropy so several rows fill
    for (std::size_t i = 0; i < n; ++i) {
      if ((i / 700) % 3 == 0) data[i] = static_cast<std::uint8_t>(data[i] & 0x11);
    }
    const auto h = byte_histogram(data);
    const auto e = byte_entropy_histogram(data);
    expect_close(h, oracle::byte_histogram(data));
    expect_close(e, oracle::byte_entropy_histogram(data));
    EXPECT_NEAR(std::accumulate(h.begin(), h.end(), 0.0), 1.0, 1e-9) << n;
    EXPECT_NEAR(std::accumulate(e.begin(), e.end(), 0.0), 1.0, 1e-9) << n;
  }
  const auto empty = byte_entropy_histogram(Bytes{});
  EXPECT_EQ(std::accumulate(empty.begin(), empty.end(), 0.0), 0.0);
}

TEST(FeatureHistograms, ConstantInputLandsInRowZero) {
  const auto e = byte_entropy_histogram(Bytes(5000, 0x41));
  EXPECT_NEAR(e[0 * 16 + 4], 1.0, 1e-12);
}

TEST(FeatureStrings, MatchOracle) {
  synth::Rng rng(31);
  const std::string words[] = {"C:\\Windows", "http://x.example", "https://a", "HKEY_LOCAL", "MZMZMZ",
                               "hello world", "abc", "C:\\C:\\", "httpshttps://"};
  for (int round = 0; round < 100; ++round) {
    Bytes data;
    const auto parts = rng.between(0, 30);
    for (std::uint64_t p = 0; p < parts; ++p) {
      if (rng.chance(0.5)) {
        const auto& w = rng.pick(words);
        data.insert(data.end(), w.begin(), w.end());
      } else {
        const auto noise = synth::random_bytes(rng, rng.between(0, 12));
        data.insert(data.end(), noise.begin(), noise.end());
      }
    }
    for (bool hist : {false, true}) {
      expect_close(string_features(data, hist), oracle::string_features(data, hist), 1e-9);
    }
  }
}

TEST(FeatureStrings, MarkerCountsAreNonOverlapping) {
  const auto g = string_features(as_bytes(std::string_view("MZMZMZ\0http://https://", 22)), false);
  EXPECT_EQ(g[0], 2.0);
  EXPECT_EQ(g[4 + 4], 3.0);  // MZ
  EXPECT_EQ(g[4 + 1], 1.0);  // http://
  EXPECT_EQ(g[4 + 2], 1.0);  // https://
}

TEST(FeatureDataDirectories, MatchRawHeaderWalk) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    synth::FixtureOptions o;
    o.pe32_plus = seed % 2;
    o.exports = seed % 3 == 0;
    o.debug = seed % 4 == 0;
    const Bytes raw = synth::make_fixture(seed, o);
    expect_close(data_directory_features(parse_pe(raw)), oracle::data_directories(raw));
  }
}

TEST(FeatureImports, HashedPlacement) {
  synth::FixtureSpec spec;
  spec.sections = {{".text", Bytes(0x200, 0xC3)}};
  spec.imports = {{"KERNEL32.DLL", {"ExitProcess"}}};
  const auto f = import_features(parse_pe(synth::build_pe(spec)));
  const auto lib = oracle::signed_bucket("kernel32.dll", kImportLibraryBuckets);
  const auto fn = oracle::signed_bucket("kernel32.dll:ExitProcess", kImportFunctionBuckets);
  EXPECT_EQ(f[lib.bucket], lib.sign);
  EXPECT_EQ(f[kImportLibraryBuckets + fn.bucket], fn.sign);
  double mass = 0;
  for (double v : f) mass += std::abs(v);
  EXPECT_EQ(mass, 2.0);
}

TEST(FeatureSections, NameAndEntropySlots) {
  synth::FixtureSpec spec;
  Bytes data(0x200);
  std::iota(data.begin(), data.end(), 0);
  spec.sections = {{".text", data, kScnCntCode | kScnMemExecute | kScnMemRead | kScnMemWrite}};
  const auto f = section_features(parse_pe(synth::build_pe(spec)));
  EXPECT_EQ(f[0], 1.0);
  EXPECT_NEAR(f[1], 8.0, 1e-12);
  EXPECT_EQ(f[3], 1.0);
  EXPECT_EQ(f[4], 1.0);
  const auto slot = oracle::signed_bucket(".text", kSectionNameBuckets);
  EXPECT_EQ(f[5 + slot.bucket], slot.sign);
  EXPECT_NEAR(f[55 + slot.bucket], slot.sign * 8.0, 1e-12);
}

TEST(FeatureExtract, DeterministicAndFinite) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Bytes raw = synth::make_fixture(seed);
    for (const auto& name : ember_variant_names()) {
      const auto c = *variant_by_name(name);
      const auto a = extract_features(raw, c);
      EXPECT_EQ(a.values, extract_features(raw, c).values);
      for (double v : a.values) EXPECT_TRUE(std::isfinite(v));
      EXPECT_EQ(a.values.back(), 0.0);
    }
  }
}

TEST(FeatureExtract, TruncatedVariantsIgnoreOverlayAndSlack) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Bytes raw = synth::make_fixture(seed);
    Bytes padded = raw;
    const Bytes junk = to_bytes(std::string(3000, 'A') + "http://evil.example");
    padded.insert(padded.end(), junk.begin(), junk.end());
    for (const char* name : {"v1", "v2", "v3"}) {
      const auto c = *variant_by_name(name);
      EXPECT_EQ(extract_features(raw, c).values, extract_features(padded, c).values) << name;
    }
    EXPECT_NE(extract_features(raw, variant_default()).values,
              extract_features(padded, variant_default()).values);
  }
}

TEST(FeatureExtract, StrippingOnlyAffectsHistograms) {
  const Bytes raw = synth::make_fixture(4);
  const auto pe = parse_pe(raw);
  const Bytes truncated = truncate_to_virtual_size(pe);
  const auto v1 = extract_features(raw, variant_v1());
  const auto c = variant_v1();
  const Bytes stripped = strip_string_bytes(truncated);
  expect_close(group(v1, c, FeatureGroup::byte_histogram), oracle::byte_histogram(stripped));
  expect_close(group(v1, c, FeatureGroup::strings), oracle::string_features(truncated, true), 1e-9);
}

TEST(FeatureExtract, StripStringBytes) {
  EXPECT_EQ(strip_string_bytes(to_bytes(std::string("ab\x01hello\x02xyzw", 13))),
            to_bytes(std::string("ab\x01\x02xyzw", 8)));
}

TEST(FeatureExtract, UnparseableInputDegrades) {
  const Bytes junk = to_bytes("this is not a portable executable at all");
  for (const auto& name : ember_variant_names()) {
    const auto c = *variant_by_name(name);
    const auto fv = extract_features(junk, c);
    EXPECT_TRUE(fv.parse_failed);
    EXPECT_EQ(fv.values.size(), c.dimension());
    EXPECT_EQ(fv.values.back(), 1.0);
    for (auto g : {FeatureGroup::general, FeatureGroup::section, FeatureGroup::imports}) {
      for (double v : group(fv, c, g)) EXPECT_EQ(v, 0.0);
    }
    EXPECT_GT(group(fv, c, FeatureGroup::strings)[0], 0.0);
  }
}

TEST(FeatureExtract, FuzzedInputsStayFinite) {
  synth::Rng rng(77);
  for (int i = 0; i < 300; ++i) {
    Bytes f = synth::make_fixture(rng.between(0, 30));
    for (int k = 0; k < 6; ++k) f[rng.between(0, std::min<std::size_t>(f.size(), 0x400) - 1)] = rng.next();
    for (const auto& name : ember_variant_names()) {
      const auto fv = extract_features(f, *variant_by_name(name));
      for (double v : fv.values) ASSERT_TRUE(std::isfinite(v));
    }
  }
}

}  // namespace
}  // namespace peguard

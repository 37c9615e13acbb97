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

#include "oracles.hpp"
#include "peguard/error.hpp"
#include "peguard/pe.hpp"
#include "peguard/synth.hpp"

namespace peguard {
namespace {

Bytes one_section_pe(std::size_t data_size, std::optional<std::uint32_t> vsize = std::nullopt) {
  synth::FixtureSpec spec;
  synth::SectionSpec text{".text", Bytes(data_size, 0x90), kScnCntCode | kScnMemExecute | kScnMemRead, vsize};
  spec.sections = {text};
  return synth::build_pe(spec);
}

TEST(PeParse, MinimalSingleSection) {
  const Bytes raw = one_section_pe(0x200);
  const PeFile pe = parse_pe(raw);
  ASSERT_EQ(pe.sections.size(), 1u);
  EXPECT_EQ(pe.sections[0].name_string(), ".text");
  EXPECT_EQ(pe.dos.e_lfanew, synth::kLfanew);
  EXPECT_EQ(pe.overlay_offset, raw.size());
  EXPECT_TRUE(overlay(pe).empty());
  EXPECT_EQ(pe.optional.file_alignment, synth::kFileAlignment);
  EXPECT_EQ(pe.optional.section_alignment, synth::kSectionAlignment);
}

TEST(PeParse, RejectsNonPe) {
  EXPECT_THROW(parse_pe(Bytes(4096, 'Z')), MalformedPe);
  EXPECT_THROW(parse_pe(Bytes{}), MalformedPe);
  EXPECT_THROW(parse_pe(to_bytes("MZ")), MalformedPe);

  Bytes raw = one_section_pe(0x200);
  Bytes bad_sig = raw;
  bad_sig[synth::kLfanew] = 'X';
  EXPECT_THROW(parse_pe(bad_sig), MalformedPe);

  Bytes far_lfanew = raw;
  store_le<std::uint32_t>(far_lfanew, 0x3C, static_cast<std::uint32_t>(raw.size() + 10));
  EXPECT_THROW(parse_pe(far_lfanew), MalformedPe);

  Bytes bad_magic = raw;
  store_le<std::uint16_t>(bad_magic, synth::kLfanew + 24, 0x1234);
  EXPECT_THROW(parse_pe(bad_magic), MalformedPe);
}

TEST(PeParse, TooManySectionsIsMalformed) {
  Bytes raw = one_section_pe(0x200);
  store_le<std::uint16_t>(raw, synth::kLfanew + 6, 0xFFFF);
  EXPECT_THROW(parse_pe(raw), MalformedPe);
}

TEST(PeParse, OverlapIsMalformed) {
  synth::FixtureSpec spec;
  spec.sections = {{".a", Bytes(0x200, 1)}, {".b", Bytes(0x200, 2)}};
  Bytes raw = synth::build_pe(spec);
  PeFile pe = parse_pe(raw);
  const std::size_t second = pe.section_table_offset() + kSectionHeaderSize;
  store_le<std::uint32_t>(raw, second + 20, pe.sections[0].pointer_to_raw_data);
  EXPECT_THROW(parse_pe(raw), MalformedPe);
}

TEST(PeParse, TruncatedSectionIsClampedWithWarning) {
  Bytes raw = one_section_pe(0x400);
  raw.resize(raw.size() - 0x100);
  const PeFile pe = parse_pe(raw);
  EXPECT_EQ(pe.raw_range(0).end(), raw.size());
  EXPECT_FALSE(pe.warnings.empty());
}

TEST(PeOverlay, AppendedBytesBecomeOverlay) {
  const Bytes base = one_section_pe(0x200);
  Bytes raw = base;
  raw.insert(raw.end(), 100, 0xAB);
  const PeFile pe = parse_pe(raw);
  EXPECT_EQ(pe.overlay_offset, base.size());
  EXPECT_EQ(overlay(pe).length, 100u);

  Bytes more = base;
  more.insert(more.end(), 2048, 0);
  EXPECT_EQ(overlay(parse_pe(more)).length, 2048u);
}

TEST(PeSlack, RegionLengths) {
  // raw size is data rounded up to 0x200
  auto slack_of = [](std::size_t data, std::uint32_t vsize) {
    const PeFile pe = parse_pe(one_section_pe(data, vsize));
    const auto regions = slack_regions(pe);
    return regions.empty() ? std::size_t{0} : regions[0].length;
  };
  EXPECT_EQ(slack_of(0x200, 10), 502u);
  EXPECT_EQ(slack_of(0x200, 512), 0u);
  EXPECT_EQ(slack_of(0x200, 600), 0u);

  const PeFile pe = parse_pe(one_section_pe(0x200, 10));
  const auto r = slack_regions(pe)[0];
  const auto sec = pe.raw_range(0);
  EXPECT_EQ(r.offset, sec.offset + 10);
  EXPECT_EQ(r.offset + r.length, sec.end());
}

TEST(PeTruncate, DropsOverlayAndSlack) {
  const Bytes no_slack = one_section_pe(0x400);
  EXPECT_EQ(truncate_to_virtual_size(parse_pe(no_slack)), no_slack);

  Bytes with_overlay = no_slack;
  with_overlay.insert(with_overlay.end(), kMiB, 0x41);
  EXPECT_EQ(truncate_to_virtual_size(parse_pe(with_overlay)), no_slack);

  const Bytes slack = one_section_pe(0x200, 10);
  const Bytes t = truncate_to_virtual_size(parse_pe(slack));
  EXPECT_EQ(t.size(), slack.size() - 502);
  const PeFile tp = parse_pe(t);
  EXPECT_EQ(truncate_to_virtual_size(tp), t);  // idempotent
}

TEST(PeTruncate, OverlayIndependentOnRandomFixtures) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Bytes f = synth::make_fixture(seed);
    Bytes g = f;
    g.insert(g.end(), 5000, static_cast<std::uint8_t>(seed));
    EXPECT_EQ(truncate_to_virtual_size(parse_pe(f)), truncate_to_virtual_size(parse_pe(g))) << seed;
  }
}

TEST(PeStrings, Examples) {
  const Bytes a = {0, 0, 'h', 'e', 'l', 'l', 'o', 0};
  const auto s = extract_printable_strings(a, 5);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], (PrintableString{2, "hello"}));
  EXPECT_TRUE(extract_printable_strings(to_bytes(std::string("hi\0", 3)), 5).empty());
  const auto two = extract_printable_strings(to_bytes("abcde\x01" "fghij"), 5);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0], (PrintableString{0, "abcde"}));
  EXPECT_EQ(two[1], (PrintableString{6, "fghij"}));
}

TEST(PeStrings, MatchesScannerOracle) {
  synth::Rng rng(3);
  for (int round = 0; round < 50; ++round) {
    Bytes data = synth::random_bytes(rng, 4096);
    for (auto& b : data) {
      if (rng.chance(0.6)) b = static_cast<std::uint8_t>(rng.between(0x20, 0x7E));
    }
    std::vector<std::string> got;
    for (const auto& s : extract_printable_strings(data, 5)) got.push_back(s.text);
    EXPECT_EQ(got, oracle::printable_runs(data, 5));
  }
}

TEST(PeSerialize, RoundTripIsByteIdentical) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    synth::FixtureOptions o;
    o.pe32_plus = seed % 2 == 1;
    o.num_sections = 1 + static_cast<int>(seed % 5);
    o.slack = seed % 3 != 0;
    o.exports = seed % 4 == 0;
    o.debug = seed % 5 == 0;
    o.overlay_size = seed % 7 == 0 ? 1000 : 0;
    const Bytes f = synth::make_fixture(seed, o);
    EXPECT_EQ(serialize_pe(parse_pe(f)), f) << "seed " << seed;
  }
}

TEST(PeSerialize, OverlapIsLayoutConflict) {
  synth::FixtureSpec spec;
  spec.sections = {{".a", Bytes(0x200, 1)}, {".b", Bytes(0x200, 2)}};
  PeFile pe = parse_pe(synth::build_pe(spec));
  pe.sections[1].pointer_to_raw_data = pe.sections[0].pointer_to_raw_data;
  EXPECT_THROW(serialize_pe(pe), LayoutConflict);
}

TEST(PeSerialize, HeaderEditsAreWrittenBack) {
  PeFile pe = parse_pe(synth::make_fixture(1));
  pe.coff.time_date_stamp = 0x12345678;
  pe.sections[0].set_name(".renamed");
  const PeFile back = parse_pe(serialize_pe(pe));
  EXPECT_EQ(back.coff.time_date_stamp, 0x12345678u);
  EXPECT_EQ(back.sections[0].name_string(), ".renamed");
}

TEST(PeImports, ResolvesLibrariesAndFunctions) {
  synth::FixtureSpec spec;
  spec.sections = {{".text", Bytes(0x200, 0xCC), kScnCntCode | kScnMemExecute | kScnMemRead}};
  spec.imports = {{"KERNEL32.dll", {"ExitProcess", "GetProcAddress"}}, {"user32.dll", {"MessageBoxA"}}};
  spec.exports = {"alpha", "beta"};
  const PeFile pe = parse_pe(synth::build_pe(spec));
  const auto libs = parse_imports(pe);
  ASSERT_EQ(libs.size(), 2u);
  EXPECT_EQ(libs[0].name, "KERNEL32.dll");
  ASSERT_EQ(libs[0].functions.size(), 2u);
  EXPECT_EQ(libs[0].functions[1].name, "GetProcAddress");
  EXPECT_EQ(libs[1].functions[0].name, "MessageBoxA");
  EXPECT_EQ(parse_exports(pe), (std::vector<std::string>{"alpha", "beta"}));
}

TEST(PeImports, RvaMapping) {
  const PeFile pe = parse_pe(one_section_pe(0x200));
  const auto& s = pe.sections[0];
  EXPECT_EQ(rva_to_offset(pe, s.virtual_address + 4), s.pointer_to_raw_data + 4);
  EXPECT_FALSE(rva_to_offset(pe, 0x7FFFFFF0).has_value());
}

TEST(PeFuzz, MutatedFixturesParseOrThrowMalformed) {
  synth::Rng rng(99);
  std::size_t parsed = 0;
  for (int i = 0; i < 2000; ++i) {
    Bytes f = synth::make_fixture(rng.between(0, 40));
    const int flips = static_cast<int>(rng.between(1, 8));
    for (int k = 0; k < flips; ++k) {
      // bias mutations toward the headers where the parser makes decisions
      const std::size_t limit = rng.chance(0.7) ? std::min<std::size_t>(f.size(), 0x400) : f.size();
      f[rng.between(0, limit - 1)] = static_cast<std::uint8_t>(rng.next());
    }
    try {
      const PeFile pe = parse_pe(f);
      (void)parse_imports(pe);
      (void)parse_exports(pe);
      (void)slack_regions(pe);
      ++parsed;
    } catch (const MalformedPe&) {
    }
  }
  EXPECT_GT(parsed, 0u);
}

}  // namespace
}  // namespace peguard

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

#include "peguard/error.hpp"
#include "peguard/redteam.hpp"
#include "peguard/synth.hpp"

namespace peguard {
namespace {

std::size_t align(std::size_t v, std::size_t a) { return (v + a - 1) / a * a; }

// The loader-visible content of each original section must survive.
void expect_mapped_content_preserved(const PeFile& before, const PeFile& after) {
  ASSERT_GE(after.sections.size(), before.sections.size());
  for (std::size_t i = 0; i < before.sections.size(); ++i) {
    const auto& s = before.sections[i];
    const auto keep = std::min<std::size_t>(s.mapped_size(), before.raw_range(i).length);
    const auto a = before.section_bytes(i).first(keep);
    const auto b = after.section_bytes(i).first(keep);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end())) << "section " << i;
    EXPECT_EQ(after.sections[i].virtual_address, s.virtual_address);
    EXPECT_EQ(after.sections[i].virtual_size, s.virtual_size);
  }
  EXPECT_EQ(after.optional.address_of_entry_point, before.optional.address_of_entry_point);
  const auto ia = parse_imports(before), ib = parse_imports(after);
  ASSERT_EQ(ia.size(), ib.size());
  for (std::size_t i = 0; i < ia.size(); ++i) {
    EXPECT_EQ(ia[i].name, ib[i].name);
    EXPECT_EQ(ia[i].functions.size(), ib[i].functions.size());
  }
  EXPECT_EQ(parse_exports(before), parse_exports(after));
}

synth::FixtureOptions options_for(std::uint64_t seed) {
  synth::FixtureOptions o;
  o.pe32_plus = seed % 2;
  o.num_sections = 1 + static_cast<int>(seed % 4);
  o.exports = seed % 3 == 0;
  o.overlay_size = seed % 5 == 0 ? 700 : 0;
  return o;
}

TEST(RedteamNames, RoundTrip) {
  EXPECT_EQ(all_modification_kinds().size(), 8u);
  for (auto k : all_modification_kinds()) EXPECT_EQ(modification_from_string(to_string(k)), k);
  EXPECT_FALSE(modification_from_string("delete_everything").has_value());
}

TEST(RedteamApply, AllModificationsPreserveFunctionality) {
  synth::Rng rng(1);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const PeFile pe = parse_pe(synth::make_fixture(seed, options_for(seed)));
    const Bytes payload = synth::random_bytes(rng, rng.between(1, 5000));
    const std::vector<Modification> mods = {
        Modification::append_overlay(payload),
        Modification::fill_slack(payload),
        Modification::add_section(payload),
        Modification::extend_dos_header(payload),
        Modification::inject_benign_strings({"Microsoft Corporation", "kernel32.dll"}, InjectTarget::overlay),
        Modification::inject_benign_strings({"Microsoft Corporation"}, InjectTarget::new_section),
        Modification::inject_benign_strings({"Microsoft Corporation"}, InjectTarget::dos_header),
        Modification::set_timestamp(123),
        Modification::rename_sections({".a", ".b"}),
        Modification::break_checksum(0xDEADBEEF),
    };
    for (const auto& mod : mods) {
      try {
        const PeFile out = apply(mod, pe);
        EXPECT_EQ(parse_pe(out.raw).sections.size(), out.sections.size());
        if (mod.kind != ModificationKind::rename_sections) expect_mapped_content_preserved(pe, out);
      } catch (const NotApplicable&) {
        EXPECT_EQ(mod.kind, ModificationKind::fill_slack) << mod.describe();
      }
    }
  }
}

TEST(RedteamApply, AppendOverlayIsConcatenation) {
  const Bytes raw = synth::make_fixture(2);
  const Bytes payload = to_bytes("extra bytes");
  const PeFile out = apply(Modification::append_overlay(payload), parse_pe(raw));
  Bytes want = raw;
  want.insert(want.end(), payload.begin(), payload.end());
  EXPECT_EQ(out.raw, want);
}

TEST(RedteamApply, ExtendDosHeaderShiftsEverything) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PeFile pe = parse_pe(synth::make_fixture(seed, options_for(seed)));
    const std::size_t len = 1 + seed * 97;
    const Bytes payload(len, 0x77);
    const PeFile out = apply(Modification::extend_dos_header(payload), pe);
    const std::size_t shift = align(len, pe.optional.file_alignment);
    EXPECT_EQ(out.dos.e_lfanew, pe.dos.e_lfanew + len);
    EXPECT_EQ(out.raw.size(), pe.raw.size() + shift);
    EXPECT_EQ(out.optional.size_of_headers, pe.optional.size_of_headers + shift);
    for (std::size_t i = 0; i < pe.sections.size(); ++i) {
      if (pe.sections[i].pointer_to_raw_data == 0) continue;
      EXPECT_EQ(out.sections[i].pointer_to_raw_data, pe.sections[i].pointer_to_raw_data + shift);
      const auto a = pe.section_bytes(i), b = out.section_bytes(i);
      EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
    // the old DOS stub is kept and the payload follows it
    EXPECT_TRUE(std::equal(pe.raw.begin() + 2, pe.raw.begin() + 0x3C, out.raw.begin() + 2));
    EXPECT_TRUE(std::all_of(out.raw.begin() + pe.dos.e_lfanew, out.raw.begin() + pe.dos.e_lfanew + len,
                            [](std::uint8_t b) { return b == 0x77; }));
    const auto ov_a = overlay(pe), ov_b = overlay(out);
    EXPECT_EQ(ov_a.length, ov_b.length);
    EXPECT_EQ(ov_b.offset, ov_a.offset + shift);
  }
}

TEST(RedteamApply, FillSlackWritesOnlySlackThenGrows) {
  synth::FixtureSpec spec;
  spec.sections = {{".text", Bytes(0x200, 0x90), kScnCntCode | kScnMemExecute, 0x100},
                   {".data", Bytes(0x200, 0x11), kScnCntInitializedData | kScnMemRead, 0x180}};
  const PeFile pe = parse_pe(synth::build_pe(spec));
  const auto regions = slack_regions(pe);
  ASSERT_EQ(regions.size(), 2u);
  EXPECT_EQ(regions[0].length + regions[1].length, 0x180u);

  const PeFile small = apply(Modification::fill_slack(Bytes(0x100, 0xAA)), pe);
  EXPECT_EQ(small.raw.size(), pe.raw.size());
  for (std::size_t i = 0; i < pe.raw.size(); ++i) {
    const bool in_first = i >= regions[0].offset && i < regions[0].offset + regions[0].length;
    if (!in_first) ASSERT_EQ(small.raw[i], pe.raw[i]) << i;
    else ASSERT_EQ(small.raw[i], 0xAA);
  }

  const PeFile big = apply(Modification::fill_slack(Bytes(0x300, 0xBB)), pe);
  EXPECT_EQ(big.raw.size(), pe.raw.size() + 0x200);
  EXPECT_EQ(big.sections[1].size_of_raw_data, pe.sections[1].size_of_raw_data + 0x200);
  EXPECT_EQ(big.sections[1].virtual_size, pe.sections[1].virtual_size);
  expect_mapped_content_preserved(pe, big);

  synth::FixtureOptions tight;
  tight.slack = false;
  const PeFile full = parse_pe(synth::make_fixture(1, tight));
  if (slack_regions(full).empty()) {
    EXPECT_THROW(apply(Modification::fill_slack(Bytes(10, 1)), full), NotApplicable);
  }
}

TEST(RedteamApply, AddSectionAppendsContent) {
  const PeFile pe = parse_pe(synth::make_fixture(3, options_for(5)));
  const Bytes payload = to_bytes("section payload");
  const PeFile out = apply(Modification::add_section(payload, ".new"), pe);
  ASSERT_EQ(out.sections.size(), pe.sections.size() + 1);
  EXPECT_EQ(out.sections.back().name_string(), ".new");
  const auto b = out.section_bytes(out.sections.size() - 1);
  EXPECT_TRUE(std::equal(payload.begin(), payload.end(), b.begin()));
  EXPECT_EQ(overlay(out).length, overlay(pe).length);
  EXPECT_GT(out.optional.size_of_image, pe.optional.size_of_image);
  expect_mapped_content_preserved(pe, out);
}

TEST(RedteamApply, SizeLimitAndEmptyPayloads) {
  const PeFile pe = parse_pe(synth::make_fixture(4));
  EXPECT_THROW(apply(Modification::append_overlay(Bytes(kMaxSubmissionSize, 0)), pe), SizeExceeded);
  EXPECT_THROW(apply(Modification::append_overlay(Bytes(100, 0)), pe, pe.raw.size() + 99), SizeExceeded);
  EXPECT_NO_THROW(apply(Modification::append_overlay(Bytes(100, 0)), pe, pe.raw.size() + 100));
  EXPECT_THROW(apply(Modification::add_section(Bytes{}), pe), NotApplicable);
  EXPECT_THROW(apply(Modification::extend_dos_header(Bytes{}), pe), NotApplicable);
  EXPECT_THROW(apply(Modification::inject_benign_strings({}), pe), NotApplicable);
}

TEST(RedteamMimicry, PayloadFromDonorStrings) {
  const Bytes donor = to_bytes(std::string("\x01" "abc\x02" "abcd\x03" "Microsoft\x04", 20));
  EXPECT_EQ(mimicry_payload(donor, 100), to_bytes(std::string("abcd\0Microsoft\0", 15)));
  EXPECT_EQ(mimicry_payload(donor, 3), to_bytes("abc"));
  EXPECT_THROW(mimicry_payload(to_bytes("\x01\x02"), 10), NoStrings);
  EXPECT_THROW(mimicry_payload(donor, 0), Error);
  const Bytes big = synth::benign_donor(1);
  EXPECT_EQ(mimicry_payload(big, 4096).size(), 4096u);
}

TEST(RedteamAttack, BudgetAndLog) {
  const Bytes malware = synth::make_fixture(5);
  AttackBudget budget;
  budget.max_queries = 25;
  budget.pool = {ModificationKind::append_overlay, ModificationKind::fill_slack, ModificationKind::set_timestamp};
  budget.seed = 3;
  std::size_t calls = 0;
  const auto always = [&](ByteView) { ++calls; return 1; };
  const auto out = blackbox_attack(always, malware, budget);
  EXPECT_FALSE(out.evaded);
  EXPECT_EQ(out.queries_used, 25u);
  EXPECT_EQ(calls, 25u);
  ASSERT_EQ(out.log.size(), 25u);
  EXPECT_EQ(out.log[0].modification, "original");
  for (const auto& e : out.log) EXPECT_LE(e.file_size, budget.max_file_size);
  EXPECT_NO_THROW(parse_pe(out.final_sample));

  const auto again = blackbox_attack(always, malware, budget);
  ASSERT_EQ(again.log.size(), out.log.size());
  for (std::size_t i = 0; i < out.log.size(); ++i) EXPECT_EQ(again.log[i].modification, out.log[i].modification);
}

TEST(RedteamAttack, BenignOriginalCostsOneQuery) {
  AttackBudget budget;
  budget.pool = {ModificationKind::append_overlay};
  const auto out = blackbox_attack([](ByteView) { return 0; }, synth::make_fixture(6), budget);
  EXPECT_TRUE(out.evaded);
  EXPECT_EQ(out.queries_used, 1u);
  EXPECT_EQ(blackbox_attack([](ByteView) { return 1; }, synth::make_fixture(6), AttackBudget{0, kMaxSubmissionSize,
                                                                                            budget.pool, 0})
                .queries_used,
            0u);
}

TEST(RedteamAttack, FindsEvasionAgainstWeakOracle) {
  // benign once the file carries a lot of appended data
  const Bytes malware = synth::make_fixture(7);
  const auto oracle = [&](ByteView b) {
    const PeFile pe = parse_pe(b);
    return overlay(pe).length > 100000 ? 0 : 1;
  };
  AttackBudget budget;
  budget.max_queries = 200;
  budget.pool = {ModificationKind::append_overlay};
  budget.seed = 1;
  AttackOptions options;
  options.retain_probability = 1.0;
  options.donor = synth::benign_donor(2);
  const auto out = blackbox_attack(oracle, malware, budget, options);
  EXPECT_TRUE(out.evaded);
  EXPECT_LT(out.queries_used, 200u);
  EXPECT_EQ(oracle(out.final_sample), 0);
  EXPECT_TRUE(std::equal(malware.begin(), malware.end(), out.final_sample.begin()));
}

TEST(RedteamAttack, UnparseableSampleSpendsBudget) {
  AttackBudget budget;
  budget.max_queries = 4;
  budget.pool = {ModificationKind::append_overlay};
  const auto out = blackbox_attack([](ByteView) { return 1; }, to_bytes("not a pe"), budget);
  EXPECT_EQ(out.queries_used, 4u);
  EXPECT_FALSE(out.evaded);
}

TEST(RedteamAttack, SurrogateTransferAccounting) {
  std::vector<std::pair<Bytes, int>> local;
  for (std::uint64_t i = 0; i < 60; ++i) {
    const auto s = synth::generate_desk_sample(i, i % 2 ? synth::Profile::malware : synth::Profile::benign, 2017);
    local.emplace_back(s.bytes, s.label);
  }
  TrainConfig c;
  c.num_trees = 10;
  c.min_samples_leaf = 3;
  const Surrogate surrogate = build_surrogate(local, c, "v2");
  EXPECT_EQ(surrogate.model.feature_dimension, 1531u);
  AttackBudget budget;
  budget.max_queries = 10;
  budget.pool = {ModificationKind::add_section, ModificationKind::append_overlay};
  AttackOptions options;
  options.surrogate = &surrogate;
  options.surrogate_candidates = 3;
  const auto out = blackbox_attack([](ByteView) { return 1; }, local[1].first, budget, options);
  EXPECT_EQ(out.surrogate_transferred, 0u);
  EXPECT_LE(out.surrogate_benign, out.queries_used);
  EXPECT_EQ(out.transfer_rate(), 0.0);
}

}  // namespace
}  // namespace peguard

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

#include <filesystem>
#include <fstream>

#include "peguard/error.hpp"
#include "peguard/rules.hpp"
#include "peguard/synth.hpp"

namespace peguard {
namespace {

std::vector<std::string> scan_naive(const std::vector<Rule>& rules, ByteView data) {
  std::vector<std::string> out;
  for (const auto& r : rules) {
    if (match_rule(r, data)) out.push_back(r.name);
  }
  return out;
}

// Random rule over a small alphabet so matches are common.
std::string random_rule(synth::Rng& rng, int index, bool allow_not) {
  const int npat = static_cast<int>(rng.between(1, 4));
  std::string s = "rule r" + std::to_string(index) + " {\n  strings:\n";
  for (int p = 0; p < npat; ++p) {
    s += "    $p" + std::to_string(p) + " = ";
    const auto len = rng.between(1, 4);
    if (rng.chance(0.5)) {
      s += "\"";
      for (std::uint64_t i = 0; i < len; ++i) s += rng.chance(0.5) ? 'a' : 'B';
      s += rng.chance(0.3) ? "\" nocase\n" : "\"\n";
    } else {
      s += "{";
      const auto fixed = rng.between(0, len - 1);  // wildcard-only patterns are rejected
      for (std::uint64_t i = 0; i < len; ++i) {
        s += i != fixed && rng.chance(0.2) ? " ??" : (rng.chance(0.5) ? " 61" : " 00");
      }
      s += " }\n";
    }
  }
  s += "  condition:\n    ";
  auto ref = [&] { return "$p" + std::to_string(rng.between(0, npat - 1)); };
  switch (rng.between(0, 4)) {
    case 0: s += ref(); break;
    case 1: s += ref() + " and " + ref(); break;
    case 2: s += "(" + ref() + " or " + ref() + ") and " + ref(); break;
    case 3: s += std::to_string(rng.between(1, npat)) + " of them"; break;
    default: s += (allow_not ? "not " : "") + ref() + " or all of ($p*)"; break;
  }
  return s + "\n}\n";
}

Bytes random_data(synth::Rng& rng, std::size_t n) {
  static const std::uint8_t alphabet[] = {'a', 'A', 'b', 'B', 0, 'x'};
  Bytes out(n);
  for (auto& b : out) b = rng.pick(alphabet);
  return out;
}

TEST(RulesParse, Basics) {
  const auto rules = parse_rules(R"(
// comment
rule demo : tag1 tag2 {
  meta:
    author = "x"
    score = 5
  strings:
    $a = "Hello" nocase
    $b = { 4D ?? 90 }
    $c = "q\x41\n\"" ascii
  condition:
    $a and ($b or 2 of them)
}
/* block
   comment */
rule second { strings: $x = "x" condition: any of ($x) }
)");
  ASSERT_EQ(rules.size(), 2u);
  EXPECT_EQ(rules[0].name, "demo");
  ASSERT_EQ(rules[0].patterns.size(), 3u);
  EXPECT_TRUE(rules[0].patterns[0].nocase);
  EXPECT_EQ(rules[0].patterns[1].bytes, (std::vector<std::int16_t>{0x4D, -1, 0x90}));
  EXPECT_EQ(rules[0].patterns[2].bytes, (std::vector<std::int16_t>{'q', 'A', '\n', '"'}));
  EXPECT_TRUE(match_rule(rules[0], to_bytes("xxhELLoxxMZ\x90")));
  EXPECT_FALSE(match_rule(rules[0], to_bytes("hello")));
  EXPECT_TRUE(match_rule(rules[1], to_bytes("x")));
}

TEST(RulesParse, ErrorsCarryLineNumbers) {
  try {
    parse_rules("rule ok { strings: $a = \"a\" condition: $a }\n\nrule bad {\n  strings:\n    $a = \"a\"\n"
                "  condition:\n    $a and and\n}\n");
    FAIL() << "no throw";
  } catch (const RuleSyntaxError& e) {
    EXPECT_EQ(e.line(), 7);
  }
  EXPECT_THROW(parse_rules("rule x { strings: $a = \"a\" condition: $zz }"), RuleSyntaxError);
  EXPECT_THROW(parse_rules("rule x { strings: $a = \"a\" }"), RuleSyntaxError);
  EXPECT_THROW(parse_rules("rule x { condition: true }"), RuleSyntaxError);
  EXPECT_THROW(parse_rules("rule x { strings: $a = { 4? } condition: $a }"), RuleSyntaxError);
  EXPECT_THROW(parse_rules("rule x { strings: $a = /re/ condition: $a }"), RuleSyntaxError);
  EXPECT_THROW(parse_rules("rule x { strings: $a = \"a\" condition: $a }\nrule x { strings: $a = \"a\" condition: $a }"),
               RuleSyntaxError);
}

TEST(RulesParse, LenientSkipsUnsupported) {
  const auto parsed = parse_rules_lenient(R"(
import "pe"
rule uses_module { condition: pe.number_of_sections > 2 }
rule re { strings: $a = /ab+c/ condition: $a }
rule counts { strings: $a = "a" condition: #a > 2 }
rule good { strings: $a = "abc" condition: $a }
rule wide { strings: $a = "abc" wide condition: $a }
)");
  ASSERT_EQ(parsed.rules.size(), 1u);
  EXPECT_EQ(parsed.rules[0].name, "good");
  EXPECT_GE(parsed.skipped.size(), 3u);
  for (const auto& s : parsed.skipped) EXPECT_FALSE(s.reason.empty());
}

TEST(RulesScan, CompiledMatchesNaive) {
  synth::Rng rng(17);
  for (int round = 0; round < 60; ++round) {
    std::string text;
    const int nrules = static_cast<int>(rng.between(1, 12));
    for (int i = 0; i < nrules; ++i) text += random_rule(rng, i, true);
    const auto rules = parse_rules(text);
    const RuleSet set(rules);
    for (int j = 0; j < 30; ++j) {
      const Bytes data = random_data(rng, rng.between(0, 40));
      ASSERT_EQ(set.scan(data), scan_naive(rules, data)) << text;
    }
  }
}

TEST(RulesScan, TextRoundTrip) {
  synth::Rng rng(18);
  std::string text;
  for (int i = 0; i < 30; ++i) text += random_rule(rng, i, true);
  const auto rules = parse_rules(text);
  std::string again;
  for (const auto& r : rules) again += rule_to_text(r);
  EXPECT_EQ(parse_rules(again), rules);

  const RuleSet set(rules, {{"r0", 3, 0}});
  const RuleSet back = ruleset_from_text(ruleset_to_text(set));
  EXPECT_EQ(back.rules(), set.rules());
  EXPECT_EQ(back.stats(), set.stats());
}

TEST(RulesScan, NegationFreeRulesAreMonotone) {
  synth::Rng rng(19);
  for (int round = 0; round < 40; ++round) {
    std::string text;
    for (int i = 0; i < 8; ++i) text += random_rule(rng, i, false);
    const RuleSet set(parse_rules(text));
    for (int j = 0; j < 20; ++j) {
      const Bytes base = random_data(rng, rng.between(0, 30));
      Bytes grown = base;
      const Bytes extra = random_data(rng, rng.between(1, 30));
      grown.insert(rng.chance(0.5) ? grown.end() : grown.begin(), extra.begin(), extra.end());
      const auto before = set.scan(base);
      const auto after = set.scan(grown);
      for (const auto& name : before) {
        ASSERT_NE(std::find(after.begin(), after.end(), name), after.end());
      }
    }
  }
}

TEST(RulesFilter, KeepsExactlyCleanRulesWithMalwareHits) {
  const auto rules = parse_rules(R"(
rule only_malware { strings: $a = "EVIL" condition: $a }
rule both { strings: $a = "common" condition: $a }
rule nothing { strings: $a = "zzzz" condition: $a }
rule benign_only { strings: $a = "nice" condition: $a }
)");
  const Bytes m1 = to_bytes("EVIL common"), m2 = to_bytes("EVIL"), b1 = to_bytes("common nice");
  const std::vector<LabeledBytes> corpus{{m1, 1}, {m2, 1}, {b1, 0}};
  const RuleSet kept = filter_rules(rules, corpus);
  ASSERT_EQ(kept.rules().size(), 1u);
  EXPECT_EQ(kept.rules()[0].name, "only_malware");
  ASSERT_EQ(kept.stats().size(), 1u);
  EXPECT_EQ(kept.stats()[0].malware_matches, 2u);
  EXPECT_EQ(kept.stats()[0].benign_matches, 0u);
  for (const auto& s : corpus) {
    if (s.label == 0) EXPECT_FALSE(kept.matches_any(s.bytes));
  }
}

TEST(RulesFilter, RandomCorpusInvariant) {
  synth::Rng rng(20);
  std::string text;
  for (int i = 0; i < 40; ++i) text += random_rule(rng, i, true);
  const auto rules = parse_rules(text);
  std::vector<Bytes> store;
  for (int i = 0; i < 30; ++i) store.push_back(random_data(rng, rng.between(0, 12)));
  std::vector<LabeledBytes> corpus;
  for (std::size_t i = 0; i < store.size(); ++i) corpus.push_back({store[i], static_cast<int>(i % 2)});
  const RuleSet kept = filter_rules(rules, corpus);
  std::vector<std::string> want;
  for (const auto& r : rules) {
    bool mal = false, ben = false;
    for (const auto& s : corpus) {
      if (match_rule(r, s.bytes)) (s.label ? mal : ben) = true;
    }
    if (mal && !ben) want.push_back(r.name);
  }
  std::vector<std::string> got;
  for (const auto& r : kept.rules()) got.push_back(r.name);
  EXPECT_EQ(got, want);
}

TEST(RulesDir, LoadsSortedFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "peguard_rules_dir";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "b.yar") << "rule second { strings: $a = \"b\" condition: $a }\n";
  std::ofstream(dir / "a.yara") << "rule first { strings: $a = \"a\" condition: $a }\n";
  std::ofstream(dir / "c.rules") << "rule third { strings: $a = /x/ condition: $a }\n";
  std::ofstream(dir / "notes.txt") << "not rules\n";
  const auto parsed = load_rules_dir(dir, true);
  ASSERT_EQ(parsed.rules.size(), 2u);
  EXPECT_EQ(parsed.rules[0].name, "first");
  EXPECT_EQ(parsed.skipped.size(), 1u);
  EXPECT_THROW(load_rules_dir(dir, false), RuleSyntaxError);
  std::filesystem::remove_all(dir);
}

TEST(RulesDesk, BuiltInRuleTextParses) {
  const auto rules = parse_rules(synth::desk_rule_text());
  EXPECT_FALSE(rules.empty());
}

}  // namespace
}  // namespace peguard

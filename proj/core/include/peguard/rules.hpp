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

// Minimal Yara-like rules over raw file bytes.
//
//   rule Name {
//     strings:
//       $a = "text" nocase
//       $b = { 4D ?? 90 }
//     condition:
//       $a and ($b or 2 of them)
//   }
//
// Patterns are literal strings (optionally case-insensitive) or hex strings
// with whole-byte wildcards. Conditions combine pattern ids with and/or/not,
// parentheses and "<any|all|N> of them" / "<any|all|N> of ($a, $b*)".
// The grammar is in docs/rules.md.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peguard/bytes.hpp"

namespace peguard {

struct Pattern {
  enum class Kind { text, hex };
  std::string id;  // without the leading '$'
  Kind kind = Kind::text;
  /// Byte values; -1 is a single-byte wildcard (hex patterns only).
  std::vector<std::int16_t> bytes;
  bool nocase = false;

  friend bool operator==(const Pattern&, const Pattern&) = default;
};

struct ConditionNode {
  enum class Op { pattern, all_and, any_or, negate, quantifier, constant };
  Op op = Op::constant;
  int pattern = -1;             // Op::pattern
  std::vector<int> children;    // and/or/not
  std::vector<int> set;         // quantifier: pattern indices
  std::size_t required = 0;     // quantifier threshold
  bool all = false;             // quantifier: "all of"
  bool value = false;           // Op::constant
  friend bool operator==(const ConditionNode&, const ConditionNode&) = default;
};

struct Condition {
  std::vector<ConditionNode> nodes;
  int root = -1;
  /// Evaluates against per-pattern hit flags.
  bool evaluate(const std::vector<bool>& hits) const;
  friend bool operator==(const Condition&, const Condition&) = default;
};

struct Rule {
  std::string name;
  std::vector<Pattern> patterns;
  Condition condition;
  friend bool operator==(const Rule&, const Rule&) = default;
};

struct SkippedRule {
  std::string name;
  std::string reason;
};

struct ParsedRules {
  std::vector<Rule> rules;
  std::vector<SkippedRule> skipped;
};

/// Strict parse; throws RuleSyntaxError.
std::vector<Rule> parse_rules(std::string_view text);
/// Skips rules using unsupported Yara features (regexes, modules, counts,
/// offsets, ...) and reports them instead of throwing.
ParsedRules parse_rules_lenient(std::string_view text);
/// Parses every *.yar, *.yara and *.rules file under \p dir (sorted by name).
ParsedRules load_rules_dir(const std::filesystem::path& dir, bool lenient);

std::string rule_to_text(const Rule& rule);
std::string condition_to_text(const Rule& rule);

/// Naive reference matcher for a single rule.
bool match_rule(const Rule& rule, ByteView data);

struct RuleStats {
  std::string name;
  std::size_t malware_matches = 0;
  std::size_t benign_matches = 0;
  friend bool operator==(const RuleStats&, const RuleStats&) = default;
};

/// Immutable compiled rule set. scan is safe to call concurrently.
class RuleSet {
 public:
  RuleSet();
  explicit RuleSet(std::vector<Rule> rules, std::vector<RuleStats> stats = {});
  ~RuleSet();
  RuleSet(RuleSet&&) noexcept;
  RuleSet& operator=(RuleSet&&) noexcept;
  RuleSet(const RuleSet&);
  RuleSet& operator=(const RuleSet&);

  /// Names of matched rules, in rule order.
  std::vector<std::string> scan(ByteView data) const;
  bool matches_any(ByteView data) const { return !scan(data).empty(); }

  const std::vector<Rule>& rules() const { return rules_; }
  const std::vector<RuleStats>& stats() const { return stats_; }
  bool empty() const { return rules_.empty(); }

 private:
  struct Compiled;
  std::vector<Rule> rules_;
  std::vector<RuleStats> stats_;
  std::unique_ptr<Compiled> compiled_;
};

struct LabeledBytes {
  ByteView bytes;
  int label = 0;  // 1 = malware
};

/// Keeps exactly the rules with >= 1 malware match and no benign match.
RuleSet filter_rules(const std::vector<Rule>& rules, std::span<const LabeledBytes> corpus);

/// Rule text followed by "// stats <name> <malware> <benign>" lines.
std::string ruleset_to_text(const RuleSet& set);
RuleSet ruleset_from_text(std::string_view text);
void save_ruleset(const RuleSet& set, const std::filesystem::path& path);
RuleSet load_ruleset(const std::filesystem::path& path);

}  // namespace peguard

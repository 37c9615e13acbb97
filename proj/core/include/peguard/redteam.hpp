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

// Attack surface for evaluating the defense: file modifications that only
// touch execution-irrelevant locations, and a query-driven hill-climbing
// attack with binary feedback.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "peguard/bytes.hpp"
#include "peguard/gbdt.hpp"
#include "peguard/pe.hpp"

namespace peguard {

enum class ModificationKind {
  append_overlay,
  fill_slack,
  add_section,
  extend_dos_header,
  inject_benign_strings,
  set_timestamp,
  rename_sections,
  break_checksum,
};

std::string_view to_string(ModificationKind kind);
std::optional<ModificationKind> modification_from_string(std::string_view name);
const std::vector<ModificationKind>& all_modification_kinds();

/// Where inject_benign_strings places its payload.
enum class InjectTarget { overlay, slack, new_section, dos_header };

inline constexpr std::size_t kMaxSubmissionSize = 2 * kMiB;

struct Modification {
  ModificationKind kind = ModificationKind::append_overlay;
  /// append_overlay, fill_slack, add_section, extend_dos_header.
  Bytes payload;
  /// inject_benign_strings: written NUL-separated.
  std::vector<std::string> strings;
  InjectTarget target = InjectTarget::overlay;
  /// add_section.
  std::string section_name = ".extra";
  /// set_timestamp, break_checksum.
  std::uint32_t value = 0;
  /// rename_sections: applied to sections in table order.
  std::vector<std::string> names;

  static Modification append_overlay(Bytes payload);
  static Modification fill_slack(Bytes payload);
  static Modification add_section(Bytes payload, std::string name = ".extra");
  static Modification extend_dos_header(Bytes payload);
  static Modification inject_benign_strings(std::vector<std::string> strings,
                                            InjectTarget target = InjectTarget::overlay);
  static Modification set_timestamp(std::uint32_t value);
  static Modification rename_sections(std::vector<std::string> names);
  static Modification break_checksum(std::uint32_t value);

  std::string describe() const;
};

/// Applies \p mod and re-parses the result. Throws NotApplicable when the file
/// has no place for the change (e.g. fill_slack without slack) and
/// SizeExceeded when the result would be larger than \p max_file_size.
///
/// fill_slack writes the payload into existing slack in file order; if it
/// does not fit, the file-last section's slack is enlarged (its raw size
/// grows, its virtual size does not) to take the remainder.
/// extend_dos_header inserts the payload just before the NT headers and
/// shifts all raw data by the payload size rounded up to the file alignment.
PeFile apply(const Modification& mod, const PeFile& pe, std::size_t max_file_size = kMaxSubmissionSize);

/// NUL-terminated printable strings (>= 4 chars) of \p donor, concatenated
/// and cut at \p budget bytes. Throws NoStrings; budget 0 is an Error.
Bytes mimicry_payload(ByteView donor, std::size_t budget);

using Oracle = std::function<int(ByteView)>;

struct AttackBudget {
  std::size_t max_queries = 1000;
  std::size_t max_file_size = kMaxSubmissionSize;
  std::vector<ModificationKind> pool;
  std::uint64_t seed = 0;
};

struct AttackLogEntry {
  std::size_t query = 0;
  std::string modification;
  int verdict = 1;
  std::size_t file_size = 0;
  bool retained = false;
};

struct Surrogate {
  TreeEnsemble model;
  std::string kind = "default";  // feature extractor, as in the pipeline
  double threshold = 0.5;
};

struct AttackOptions {
  /// Probability of keeping a rejected candidate as the next starting point.
  double retain_probability = 0.3;
  std::size_t min_payload = 256;
  std::size_t max_payload = 64 * kKiB;
  /// Benign file whose strings fill payloads; random printable text if empty.
  Bytes donor;
  /// Offline pre-screen: up to this many candidates are scored locally and
  /// the first one the surrogate calls benign (else the lowest scoring) is
  /// sent to the oracle.
  const Surrogate* surrogate = nullptr;
  std::size_t surrogate_candidates = 8;
};

struct AttackOutcome {
  bool evaded = false;
  std::size_t queries_used = 0;
  Bytes final_sample;
  std::vector<AttackLogEntry> log;
  /// Queried candidates the surrogate called benign, and how many of those
  /// the oracle also called benign.
  std::size_t surrogate_benign = 0;
  std::size_t surrogate_transferred = 0;
  double transfer_rate() const;
};

/// The first query checks the unmodified sample and counts toward the budget.
AttackOutcome blackbox_attack(const Oracle& oracle, ByteView malware, const AttackBudget& budget,
                              const AttackOptions& options = {});

/// Local model for candidate pre-screening.
Surrogate build_surrogate(const std::vector<std::pair<Bytes, int>>& local_data, const TrainConfig& config,
                          std::string kind = "default");

}  // namespace peguard

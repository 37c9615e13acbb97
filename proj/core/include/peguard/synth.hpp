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

// Deterministic PE builders: minimal fixtures for format tests and the
// synthetic desk corpus used to train and evaluate the pipeline.
//
// Fixture layout: 0x40-byte DOS header followed by a DOS stub, the PE
// signature at e_lfanew = 0x80, a 16-entry data directory table, and
// sections aligned to 0x200 in the file and 0x1000 in memory starting at
// RVA 0x1000. Import and export tables, when requested, live in trailing
// .idata/.edata sections.

#pragma once

#include <cstdint>
#include <iterator>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "peguard/bytes.hpp"
#include "peguard/pe.hpp"

namespace peguard::synth {

inline constexpr std::uint32_t kFileAlignment = 0x200;
inline constexpr std::uint32_t kSectionAlignment = 0x1000;
inline constexpr std::uint32_t kLfanew = 0x80;

struct SectionSpec {
  std::string name;
  Bytes data;
  std::uint32_t characteristics = kScnCntInitializedData | kScnMemRead;
  /// Defaults to data.size(); raw size is always data.size() rounded up to
  /// the file alignment, so any difference is zero-filled slack.
  std::optional<std::uint32_t> virtual_size;
};

struct ImportSpec {
  std::string library;
  std::vector<std::string> functions;
};

struct FixtureSpec {
  bool pe32_plus = false;
  std::uint32_t timestamp = 0x5F3A1C00;
  std::uint16_t subsystem = 2;
  std::vector<SectionSpec> sections;
  std::vector<ImportSpec> imports;
  std::vector<std::string> exports;
  std::string dll_name = "fixture.dll";
  std::optional<DataDirectory> debug;
  Bytes overlay;
};

Bytes build_pe(const FixtureSpec& spec);

struct FixtureOptions {
  bool pe32_plus = false;
  int num_sections = 2;
  /// When false every section's data is a multiple of the file alignment.
  bool slack = true;
  bool imports = true;
  bool exports = false;
  bool debug = false;
  std::size_t overlay_size = 0;
};

FixtureSpec random_fixture_spec(std::uint64_t seed, const FixtureOptions& options = {});
Bytes make_fixture(std::uint64_t seed, const FixtureOptions& options = {});

/// Small deterministic RNG helpers shared by the generators.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  /// Uniform in [lo, hi].
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
    return lo + next() % (hi - lo + 1);
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return uniform() < p; }
  template <typename C>
  const auto& pick(const C& c) {
    return c[between(0, std::size(c) - 1)];
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

Bytes random_bytes(Rng& rng, std::size_t n);

// ---------------------------------------------------------------------------
// Desk corpus

enum class Profile { benign, malware };

struct DeskSample {
  Bytes bytes;
  int label = 0;  // 1 = malware
  int year = 2017;
  std::string family;
};

DeskSample generate_desk_sample(std::uint64_t seed, Profile profile, int year);

/// Benign file rich in printable strings, used as a mimicry donor.
Bytes benign_donor(std::uint64_t seed);

/// Signature rules for the desk corpus: one rule per malware family plus
/// rules that also hit benign files and must be filtered out.
std::string desk_rule_text();

}  // namespace peguard::synth

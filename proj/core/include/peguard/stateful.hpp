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

// Query-history monitor: remembers inputs finally classified as malware and
// flags later queries whose byte/entropy histogram fingerprint lies within an
// L1 threshold of any remembered one.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "peguard/bytes.hpp"

namespace peguard {

inline constexpr std::size_t kFingerprintDim = 512;
inline constexpr std::size_t kDefaultHistoryCapacity = 10000;
/// Measured on the desk corpus: the 0.1th percentile of pairwise distances
/// between distinct benign files (see docs/pipeline-config.md).
inline constexpr double kDefaultStatefulThreshold = 0.29;

struct Fingerprint {
  std::array<double, kFingerprintDim> values{};
  std::string digest;  // SHA-256 of the input
  std::int64_t timestamp = 0;
};

/// Byte histogram followed by byte-entropy histogram of the whole,
/// untruncated input. Throws EmptyInput.
Fingerprint fingerprint(ByteView bytes, std::int64_t timestamp = 0);

double l1_distance(const Fingerprint& a, const Fingerprint& b);

struct Nearest {
  double distance = std::numeric_limits<double>::infinity();
  std::optional<std::string> digest;
};

struct StatefulConfig {
  std::size_t capacity = kDefaultHistoryCapacity;
  double threshold = kDefaultStatefulThreshold;
  /// Store queries flagged by the distance check.
  bool store_flagged = true;
  /// Store inputs flagged by the gap detectors.
  bool store_gap_hits = true;
  /// Append-only fingerprint log, reloaded on construction when present.
  std::optional<std::filesystem::path> persist_path;
};

struct StatefulDecision {
  bool malware = false;
  bool flagged = false;  // the distance check fired
  bool stored = false;
  double distance = std::numeric_limits<double>::infinity();
};

/// Bounded FIFO of fingerprints. Lookups share a lock; check_and_update holds
/// the exclusive lock across lookup and insertion.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(StatefulConfig config = {});

  Nearest nearest(const Fingerprint& fp) const;
  StatefulDecision check_and_update(const Fingerprint& fp, bool ensemble_malware);
  /// Unconditional insertion (used for gap-detector hits).
  void insert(const Fingerprint& fp);

  std::size_t size() const;
  std::vector<Fingerprint> snapshot() const;
  const StatefulConfig& config() const { return config_; }
  std::size_t capacity() const { return config_.capacity; }
  double threshold() const { return config_.threshold; }
  void clear();

 private:
  Nearest nearest_locked(const Fingerprint& fp) const;
  void insert_locked(const Fingerprint& fp);
  void load_log(const std::filesystem::path& path);

  StatefulConfig config_;
  mutable std::shared_mutex mutex_;
  std::deque<Fingerprint> entries_;
  std::ofstream log_;
};

/// Percentile (in percent, e.g. 0.1) of pairwise L1 distances among
/// fingerprints with distinct digests. Throws EmptySet with fewer than two.
double calibrate_threshold(std::span<const Fingerprint> benign, double percentile = 0.1);

std::string fingerprint_to_record(const Fingerprint& fp);
/// Throws Error on a malformed record.
Fingerprint fingerprint_from_record(std::string_view line);

}  // namespace peguard

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

// Semantic-gap detectors: heuristics that flag content placed in regions the
// loader never maps (slack, overlay) or repeated section bodies.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "peguard/pe.hpp"

namespace peguard {

enum class GapDetector { slack, overlay, duplicate };

std::string_view to_string(GapDetector detector);

struct GapVerdict {
  bool flagged = false;
  GapDetector detector = GapDetector::slack;
  /// Evidence when flagged; empty otherwise.
  std::string detail;
};

inline constexpr double kDefaultSlackThreshold = 0.05;
inline constexpr double kDefaultOverlayThreshold = 0.25;

struct GapConfig {
  double slack_threshold = kDefaultSlackThreshold;
  double overlay_threshold = kDefaultOverlayThreshold;
  bool short_circuit = false;
};

/// Flags when some slack region has a non-zero byte fraction strictly above
/// \p nonzero_fraction_threshold.
GapVerdict scan_slack(const PeFile& pe, double nonzero_fraction_threshold = kDefaultSlackThreshold);

/// Flags when overlay / file size >= \p ratio_threshold and the overlay is
/// non-empty.
GapVerdict scan_overlay(const PeFile& pe, double ratio_threshold = kDefaultOverlayThreshold);

/// Flags when two or more non-empty sections have identical raw content
/// (SHA-256). Sections without raw data or with all-zero data are ignored.
GapVerdict scan_duplicates(const PeFile& pe);

/// Runs slack, overlay and duplicate scanners in that order.
std::vector<GapVerdict> run_gap_detectors(const PeFile& pe, const GapConfig& config = {});

}  // namespace peguard

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

#include "peguard/gap.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace peguard {

std::string_view to_string(GapDetector detector) {
  switch (detector) {
    case GapDetector::slack:
      return "slack";
    case GapDetector::overlay:
      return "overlay";
    case GapDetector::duplicate:
      return "duplicate";
  }
  return "unknown";
}

GapVerdict scan_slack(const PeFile& pe, double nonzero_fraction_threshold) {
  GapVerdict verdict{false, GapDetector::slack, {}};
  for (const auto& region : slack_regions(pe)) {
    if (region.length == 0) continue;
    auto bytes = ByteView(pe.raw).subspan(region.offset, region.length);
    const auto nonzero = static_cast<std::size_t>(
        std::count_if(bytes.begin(), bytes.end(), [](std::uint8_t b) { return b != 0; }));
    const double fraction = static_cast<double>(nonzero) / static_cast<double>(region.length);
    if (fraction > nonzero_fraction_threshold) {
      std::ostringstream os;
      os << "section " << region.section_index << " slack at 0x" << std::hex << region.offset
         << std::dec << " (" << region.length << " bytes) has " << nonzero << " non-zero bytes";
      verdict.flagged = true;
      verdict.detail = os.str();
      return verdict;
    }
  }
  return verdict;
}

GapVerdict scan_overlay(const PeFile& pe, double ratio_threshold) {
  GapVerdict verdict{false, GapDetector::overlay, {}};
  const auto range = overlay(pe);
  if (range.empty() || pe.file_size() == 0) return verdict;
  const double ratio = static_cast<double>(range.length) / static_cast<double>(pe.file_size());
  if (ratio >= ratio_threshold) {
    std::ostringstream os;
    os << "overlay of " << range.length << " bytes is " << ratio << " of file size";
    verdict.flagged = true;
    verdict.detail = os.str();
  }
  return verdict;
}

GapVerdict scan_duplicates(const PeFile& pe) {
  GapVerdict verdict{false, GapDetector::duplicate, {}};
  std::map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    auto bytes = pe.section_bytes(i);
    if (bytes.empty() ||
        std::all_of(bytes.begin(), bytes.end(), [](std::uint8_t b) { return b == 0; })) {
      continue;
    }
    auto [it, inserted] = seen.emplace(sha256_hex(bytes), i);
    if (!inserted) {
      verdict.flagged = true;
      verdict.detail = "sections " + std::to_string(it->second) + " and " + std::to_string(i) +
                       " have identical content";
      return verdict;
    }
  }
  return verdict;
}

std::vector<GapVerdict> run_gap_detectors(const PeFile& pe, const GapConfig& config) {
  std::vector<GapVerdict> out;
  out.push_back(scan_slack(pe, config.slack_threshold));
  if (config.short_circuit && out.back().flagged) return out;
  out.push_back(scan_overlay(pe, config.overlay_threshold));
  if (config.short_circuit && out.back().flagged) return out;
  out.push_back(scan_duplicates(pe));
  return out;
}

}  // namespace peguard

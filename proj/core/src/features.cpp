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

#include "peguard/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "peguard/error.hpp"
#include "peguard/hashing.hpp"

namespace peguard {
namespace {

constexpr FeatureGroup kCanonicalOrder[] = {
    FeatureGroup::general,  FeatureGroup::strings, FeatureGroup::byte_histogram,
    FeatureGroup::byte_entropy_histogram, FeatureGroup::section, FeatureGroup::imports,
    FeatureGroup::exports,  FeatureGroup::data_directory,
};

constexpr std::string_view kStringMarkers[] = {"C:\\", "http://", "https://", "HKEY_", "MZ"};

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

void normalize(std::span<double> values) {
  const double total = std::accumulate(values.begin(), values.end(), 0.0);
  if (total <= 0) return;
  for (auto& v : values) v /= total;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

template <typename Out>
void append(std::vector<double>& out, const Out& values) {
  out.insert(out.end(), values.begin(), values.end());
}

}  // namespace

std::string_view to_string(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::general: return "general";
    case FeatureGroup::strings: return "strings";
    case FeatureGroup::byte_histogram: return "byte_histogram";
    case FeatureGroup::byte_entropy_histogram: return "byte_entropy_histogram";
    case FeatureGroup::section: return "section";
    case FeatureGroup::imports: return "imports";
    case FeatureGroup::exports: return "exports";
    case FeatureGroup::data_directory: return "data_directory";
  }
  return "unknown";
}

bool VariantConfig::has(FeatureGroup group) const {
  return std::find(groups.begin(), groups.end(), group) != groups.end();
}

std::size_t VariantConfig::group_dimension(FeatureGroup group) const {
  switch (group) {
    case FeatureGroup::general: return kGeneralDim;
    case FeatureGroup::strings:
      return kStringBaseDim + (include_printable_string_histogram ? kPrintableHistogramDim : 0);
    case FeatureGroup::byte_histogram: return kByteHistogramDim;
    case FeatureGroup::byte_entropy_histogram: return kByteEntropyDim;
    case FeatureGroup::section: return kSectionDim;
    case FeatureGroup::imports: return kImportsDim;
    case FeatureGroup::exports: return kExportsDim;
    case FeatureGroup::data_directory: return kDataDirectoryDim;
  }
  return 0;
}

std::size_t VariantConfig::dimension() const {
  std::size_t total = 1;
  for (auto g : kCanonicalOrder) {
    if (has(g)) total += group_dimension(g);
  }
  return total;
}

VariantConfig variant_default() {
  return {"default",
          {std::begin(kCanonicalOrder), std::end(kCanonicalOrder)},
          false, false, true, "2017"};
}

VariantConfig variant_v1() {
  auto c = variant_default();
  c.name = "v1";
  c.truncate_to_virtual_size = true;
  c.strip_strings_from_byte_stream = true;
  return c;
}

VariantConfig variant_v2() {
  return {"v2",
          {FeatureGroup::general, FeatureGroup::strings, FeatureGroup::section,
           FeatureGroup::imports, FeatureGroup::exports},
          true, false, false, "2017"};
}

VariantConfig variant_v3() {
  auto c = variant_v2();
  c.name = "v3";
  c.corpus_tag = "2018";
  return c;
}

std::optional<VariantConfig> variant_by_name(std::string_view name) {
  if (name == "default") return variant_default();
  if (name == "v1") return variant_v1();
  if (name == "v2") return variant_v2();
  if (name == "v3") return variant_v3();
  return std::nullopt;
}

const std::vector<std::string>& ember_variant_names() {
  static const std::vector<std::string> kNames = {"default", "v1", "v2", "v3"};
  return kNames;
}

std::vector<GroupSpan> feature_layout(const VariantConfig& config) {
  std::vector<GroupSpan> out;
  std::size_t offset = 0;
  for (auto g : kCanonicalOrder) {
    if (!config.has(g)) continue;
    out.push_back({g, offset, config.group_dimension(g)});
    offset += config.group_dimension(g);
  }
  return out;
}

std::array<double, kByteHistogramDim> byte_histogram(ByteView bytes) {
  std::array<std::size_t, 256> counts{};
  for (auto b : bytes) ++counts[b];
  std::array<double, kByteHistogramDim> out{};
  if (bytes.empty()) return out;
  const double n = static_cast<double>(bytes.size());
  for (std::size_t i = 0; i < 256; ++i) out[i] = static_cast<double>(counts[i]) / n;
  return out;
}

std::array<double, kByteEntropyDim> byte_entropy_histogram(ByteView bytes) {
  std::array<double, kByteEntropyDim> grid{};
  if (bytes.empty()) return grid;

  auto add_window = [&](ByteView window) {
    std::array<std::size_t, 16> coarse{};
    for (auto b : window) ++coarse[b >> 4];
    const double n = static_cast<double>(window.size());
    double entropy = 0.0;
    for (auto c : coarse) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / n;
      entropy -= p * std::log2(p);
    }
    const auto row = std::min<std::size_t>(static_cast<std::size_t>(entropy * 4.0), 15);
    for (std::size_t j = 0; j < 16; ++j) grid[row * 16 + j] += static_cast<double>(coarse[j]);
  };

  if (bytes.size() < kEntropyWindow) {
    add_window(bytes);
  } else {
    std::size_t start = 0;
    for (; start + kEntropyWindow <= bytes.size(); start += kEntropyStep) {
      add_window(bytes.subspan(start, kEntropyWindow));
    }
    const std::size_t last_end = start - kEntropyStep + kEntropyWindow;
    if (last_end < bytes.size() && bytes.size() - start >= kEntropyMinPartialWindow) {
      add_window(bytes.subspan(start));
    }
  }
  normalize(grid);
  return grid;
}

double shannon_entropy(ByteView bytes) {
  if (bytes.empty()) return 0.0;
  std::array<std::size_t, 256> counts{};
  for (auto b : bytes) ++counts[b];
  const double n = static_cast<double>(bytes.size());
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

std::vector<double> string_features(ByteView bytes, bool include_histogram) {
  const auto strings = extract_printable_strings(bytes, kDefaultMinStringLength);
  std::vector<double> out(kStringBaseDim + (include_histogram ? kPrintableHistogramDim : 0), 0.0);
  if (strings.empty()) return out;

  std::array<double, kPrintableHistogramDim> chars{};
  std::size_t total = 0;
  std::array<std::size_t, std::size(kStringMarkers)> markers{};
  for (const auto& s : strings) {
    total += s.text.size();
    for (unsigned char c : s.text) chars[c - 0x20] += 1.0;
    for (std::size_t m = 0; m < markers.size(); ++m) {
      markers[m] += count_occurrences(s.text, kStringMarkers[m]);
    }
  }
  double entropy = 0.0;
  for (auto c : chars) {
    if (c == 0) continue;
    const double p = c / static_cast<double>(total);
    entropy -= p * std::log2(p);
  }
  out[0] = static_cast<double>(strings.size());
  out[1] = static_cast<double>(total) / static_cast<double>(strings.size());
  out[2] = static_cast<double>(total);
  out[3] = entropy;
  for (std::size_t m = 0; m < markers.size(); ++m) out[4 + m] = static_cast<double>(markers[m]);
  if (include_histogram) {
    for (std::size_t i = 0; i < kPrintableHistogramDim; ++i) {
      out[kStringBaseDim + i] = chars[i] / static_cast<double>(total);
    }
  }
  return out;
}

std::vector<double> general_features(const PeFile& pe) {
  const auto imports = parse_imports(pe);
  std::size_t functions = 0;
  for (const auto& lib : imports) functions += lib.functions.size();
  std::size_t present = 0;
  for (std::size_t i = 0; i < std::min(pe.optional.data_directories.size(), kDataDirectorySlots);
       ++i) {
    if (pe.optional.data_directories[i].present()) ++present;
  }
  return {
      static_cast<double>(pe.file_size()),
      static_cast<double>(pe.virtual_size()),
      static_cast<double>(pe.sections.size()),
      static_cast<double>(functions),
      static_cast<double>(parse_exports(pe).size()),
      overlay(pe).empty() ? 0.0 : 1.0,
      pe.optional.directory(DataDirectoryIndex::debug).present() ? 1.0 : 0.0,
      static_cast<double>(present),
  };
}

std::vector<double> section_features(const PeFile& pe) {
  std::vector<double> out(kSectionDim, 0.0);
  if (pe.sections.empty()) return out;
  double sum = 0.0, max = 0.0;
  std::size_t exec = 0, wx = 0;
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const auto& s = pe.sections[i];
    const double h = shannon_entropy(pe.section_bytes(i));
    sum += h;
    max = std::max(max, h);
    const bool x = s.characteristics & kScnMemExecute;
    const bool w = s.characteristics & kScnMemWrite;
    exec += x;
    wx += (x && w);
    const auto slot = signed_slot(s.name_string(), kSectionNameBuckets);
    out[5 + slot.bucket] += slot.sign;
    out[5 + kSectionNameBuckets + slot.bucket] += slot.sign * h;
  }
  out[0] = static_cast<double>(pe.sections.size());
  out[1] = sum / static_cast<double>(pe.sections.size());
  out[2] = max;
  out[3] = static_cast<double>(exec);
  out[4] = static_cast<double>(wx);
  return out;
}

std::vector<double> import_features(const PeFile& pe) {
  std::vector<double> out(kImportsDim, 0.0);
  for (const auto& lib : parse_imports(pe)) {
    const auto name = lowercase(lib.name);
    const auto slot = signed_slot(name, kImportLibraryBuckets);
    out[slot.bucket] += slot.sign;
    for (const auto& fn : lib.functions) {
      const auto pair = fn.ordinal ? name + ":ordinal" + std::to_string(*fn.ordinal)
                                   : name + ":" + fn.name;
      const auto f = signed_slot(pair, kImportFunctionBuckets);
      out[kImportLibraryBuckets + f.bucket] += f.sign;
    }
  }
  return out;
}

std::vector<double> export_features(const PeFile& pe) {
  std::vector<double> out(kExportsDim, 0.0);
  for (const auto& name : parse_exports(pe)) {
    const auto slot = signed_slot(name, kExportsDim);
    out[slot.bucket] += slot.sign;
  }
  return out;
}

std::vector<double> data_directory_features(const PeFile& pe) {
  std::vector<double> out(kDataDirectoryDim, 0.0);
  const auto& dirs = pe.optional.data_directories;
  for (std::size_t i = 0; i < std::min(dirs.size(), kDataDirectorySlots); ++i) {
    out[2 * i] = dirs[i].virtual_address;
    out[2 * i + 1] = dirs[i].size;
  }
  return out;
}

Bytes strip_string_bytes(ByteView bytes) {
  Bytes out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    if (!is_printable(bytes[i])) {
      out.push_back(bytes[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < bytes.size() && is_printable(bytes[j])) ++j;
    if (j - i < kDefaultMinStringLength) out.insert(out.end(), bytes.begin() + i, bytes.begin() + j);
    i = j;
  }
  return out;
}

FeatureVector extract_features(ByteView bytes, const VariantConfig& config) {
  FeatureVector fv;
  fv.variant = config.name;
  fv.values.reserve(config.dimension());

  std::optional<PeFile> pe;
  Bytes truncated;
  ByteView stream = bytes;
  try {
    pe = parse_pe(bytes);
    if (config.truncate_to_virtual_size) {
      truncated = truncate_to_virtual_size(*pe);
      pe = parse_pe(ByteView(truncated));
      stream = truncated;
    }
  } catch (const Error&) {
    pe.reset();
    fv.parse_failed = true;
  }

  Bytes stripped;
  ByteView histogram_stream = stream;
  if (config.strip_strings_from_byte_stream &&
      (config.has(FeatureGroup::byte_histogram) || config.has(FeatureGroup::byte_entropy_histogram))) {
    stripped = strip_string_bytes(stream);
    histogram_stream = stripped;
  }

  auto structured = [&](FeatureGroup g, auto&& fn) {
    if (pe) {
      append(fv.values, fn(*pe));
    } else {
      fv.values.insert(fv.values.end(), config.group_dimension(g), 0.0);
    }
  };

  for (const auto& span : feature_layout(config)) {
    switch (span.group) {
      case FeatureGroup::general:
        structured(span.group, general_features);
        break;
      case FeatureGroup::strings:
        append(fv.values, string_features(stream, config.include_printable_string_histogram));
        break;
      case FeatureGroup::byte_histogram:
        append(fv.values, byte_histogram(histogram_stream));
        break;
      case FeatureGroup::byte_entropy_histogram:
        append(fv.values, byte_entropy_histogram(histogram_stream));
        break;
      case FeatureGroup::section:
        structured(span.group, section_features);
        break;
      case FeatureGroup::imports:
        structured(span.group, import_features);
        break;
      case FeatureGroup::exports:
        structured(span.group, export_features);
        break;
      case FeatureGroup::data_directory:
        structured(span.group, data_directory_features);
        break;
    }
  }
  fv.values.push_back(fv.parse_failed ? 1.0 : 0.0);
  return fv;
}

}  // namespace peguard

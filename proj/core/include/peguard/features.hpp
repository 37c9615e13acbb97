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

// Static feature groups and the four hardened variant configurations.
//
// Vector layout (groups appear in this order when configured):
//
//   group                   dim   notes
//   general                   8   file size, virtual size, #sections,
//                                 #imported functions, #exports, has overlay,
//                                 has debug directory, #data directories
//   strings              9 (+96)  count, mean length, printable chars,
//                                 char entropy, "C:\" "http://" "https://"
//                                 "HKEY_" "MZ" counts; optional 96-bin
//                                 printable-character histogram
//   byte_histogram          256
//   byte_entropy_histogram  256   16 entropy rows x 16 coarse byte columns
//   section                 105   count, mean/max entropy, #exec, #write+exec,
//                                 50 hashed names, 50 hashed name->entropy
//   imports                1280   256 hashed libraries, 1024 hashed lib:func
//   exports                 128   hashed export names
//   data_directory           30   15 slots x (rva, size)
//   parse_failed              1   always present, last
//
// There is no header group: header fields (timestamp, checksum, ...) are
// trivially attacker-controlled and are not extracted.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "peguard/bytes.hpp"
#include "peguard/pe.hpp"

namespace peguard {

enum class FeatureGroup {
  general,
  strings,
  byte_histogram,
  byte_entropy_histogram,
  section,
  imports,
  exports,
  data_directory,
};

std::string_view to_string(FeatureGroup group);

inline constexpr std::size_t kGeneralDim = 8;
inline constexpr std::size_t kStringBaseDim = 9;
inline constexpr std::size_t kPrintableHistogramDim = 96;
inline constexpr std::size_t kByteHistogramDim = 256;
inline constexpr std::size_t kByteEntropyDim = 256;
inline constexpr std::size_t kSectionNameBuckets = 50;
inline constexpr std::size_t kSectionDim = 5 + 2 * kSectionNameBuckets;
inline constexpr std::size_t kImportLibraryBuckets = 256;
inline constexpr std::size_t kImportFunctionBuckets = 1024;
inline constexpr std::size_t kImportsDim = kImportLibraryBuckets + kImportFunctionBuckets;
inline constexpr std::size_t kExportsDim = 128;
inline constexpr std::size_t kDataDirectorySlots = 15;
inline constexpr std::size_t kDataDirectoryDim = 2 * kDataDirectorySlots;

inline constexpr std::size_t kEntropyWindow = 2048;
inline constexpr std::size_t kEntropyStep = 1024;
inline constexpr std::size_t kEntropyMinPartialWindow = 256;

struct VariantConfig {
  std::string name;
  std::vector<FeatureGroup> groups;
  bool truncate_to_virtual_size = false;
  bool strip_strings_from_byte_stream = false;
  bool include_printable_string_histogram = true;
  std::string corpus_tag = "2017";

  bool has(FeatureGroup group) const;
  std::size_t group_dimension(FeatureGroup group) const;
  /// Sum of configured group dimensions plus the parse-failed indicator.
  std::size_t dimension() const;
};

/// All groups on the full file.
VariantConfig variant_default();
/// All groups; truncated input; strings stripped from the histogram stream.
VariantConfig variant_v1();
/// Section, import, export, general and string groups without the printable
/// histogram; truncated input.
VariantConfig variant_v2();
/// V2 trained on the 2018 corpus.
VariantConfig variant_v3();
std::optional<VariantConfig> variant_by_name(std::string_view name);
const std::vector<std::string>& ember_variant_names();

/// Offset and length of each configured group inside a feature vector.
struct GroupSpan {
  FeatureGroup group;
  std::size_t offset = 0;
  std::size_t length = 0;
};
std::vector<GroupSpan> feature_layout(const VariantConfig& config);

struct FeatureVector {
  std::vector<double> values;
  std::string variant;
  bool parse_failed = false;
};

std::array<double, kByteHistogramDim> byte_histogram(ByteView bytes);
std::array<double, kByteEntropyDim> byte_entropy_histogram(ByteView bytes);
/// Shannon entropy in bits per byte.
double shannon_entropy(ByteView bytes);
std::vector<double> string_features(ByteView bytes, bool include_histogram);
std::vector<double> general_features(const PeFile& pe);
std::vector<double> section_features(const PeFile& pe);
std::vector<double> import_features(const PeFile& pe);
std::vector<double> export_features(const PeFile& pe);
std::vector<double> data_directory_features(const PeFile& pe);
/// Removes every byte of every printable run of at least five bytes.
Bytes strip_string_bytes(ByteView bytes);

/// Extracts the configured vector. Truncation (when configured) applies to
/// the whole stream; string stripping only to the stream feeding the two
/// byte histograms. Unparseable input degrades: structured groups are zero
/// and the parse-failed indicator is 1.
FeatureVector extract_features(ByteView bytes, const VariantConfig& config);

}  // namespace peguard

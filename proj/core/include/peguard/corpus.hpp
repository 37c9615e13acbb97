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

// Corpus manifests and feature dumps.
//
// A manifest is a text file with one "<path>\t<label>[\t<tag>]" record per
// line; label is 0/1 or benign/malware, '#' starts a comment, relative paths
// resolve against the manifest's directory.
//
// A feature dump is line-delimited JSON, one record per file:
//   {"sha256": "...", "label": 1, "variant": "v1", "dim": 2169, "values": [...]}
// Skipgram dumps store counts sparsely: "indices": [...], "counts": [...].

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "peguard/bytes.hpp"
#include "peguard/gbdt.hpp"

namespace peguard {

struct ManifestEntry {
  std::filesystem::path path;
  int label = 0;
  std::string tag;
};

/// Throws Error on a malformed record.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& manifest);

struct DumpRecord {
  std::string sha256;
  int label = 0;
  std::string variant;
  std::vector<double> values;
};

/// Serializes one record (no trailing newline). Skipgram records are sparse.
std::string dump_record_to_json(const DumpRecord& record);
DumpRecord dump_record_from_json(const std::string& line);

/// Reads a dump into a training matrix; all records must share a variant and
/// dimension. Throws Error / DimensionMismatch.
Dataset read_dump(const std::filesystem::path& dump, std::string* variant = nullptr);

}  // namespace peguard

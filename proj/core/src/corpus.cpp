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

#include "peguard/corpus.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "peguard/error.hpp"

namespace peguard {

using json = nlohmann::json;

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot read manifest " + manifest.string());
  const auto base = manifest.parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() < 2 || cols.size() > 3) {
      throw Error(manifest.string() + ":" + std::to_string(line_no) + ": expected <path>\\t<label>[\\t<tag>]");
    }
    ManifestEntry e;
    e.path = cols[0];
    if (e.path.is_relative()) e.path = base / e.path;
    if (cols[1] == "1" || cols[1] == "malware") {
      e.label = 1;
    } else if (cols[1] == "0" || cols[1] == "benign") {
      e.label = 0;
    } else {
      throw Error(manifest.string() + ":" + std::to_string(line_no) + ": bad label '" + cols[1] + "'");
    }
    if (cols.size() == 3) e.tag = cols[2];
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& manifest) {
  std::string text;
  const auto base = manifest.parent_path();
  for (const auto& e : entries) {
    auto p = e.path;
    if (!base.empty() && p.is_absolute()) {
      const auto rel = p.lexically_relative(std::filesystem::absolute(base));
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    text += p.generic_string() + "\t" + std::to_string(e.label);
    if (!e.tag.empty()) text += "\t" + e.tag;
    text += "\n";
  }
  write_file(manifest, as_bytes(text));
}

std::string dump_record_to_json(const DumpRecord& r) {
  json j;
  j["sha256"] = r.sha256;
  j["label"] = r.label;
  j["variant"] = r.variant;
  j["dim"] = r.values.size();
  if (r.variant == "skipgram") {
    std::vector<std::size_t> idx;
    std::vector<double> counts;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      if (r.values[i] != 0.0) {
        idx.push_back(i);
        counts.push_back(r.values[i]);
      }
    }
    j["indices"] = idx;
    j["counts"] = counts;
  } else {
    j["values"] = r.values;
  }
  return j.dump();
}

DumpRecord dump_record_from_json(const std::string& line) {
  DumpRecord r;
  try {
    const json j = json::parse(line);
    r.sha256 = j.value("sha256", "");
    r.label = j.at("label").get<int>();
    r.variant = j.at("variant").get<std::string>();
    const auto dim = j.at("dim").get<std::size_t>();
    if (j.contains("values")) {
      r.values = j.at("values").get<std::vector<double>>();
      if (r.values.size() != dim) throw DimensionMismatch("record length differs from its dim field");
    } else {
      const auto idx = j.at("indices").get<std::vector<std::size_t>>();
      const auto counts = j.at("counts").get<std::vector<double>>();
      if (idx.size() != counts.size()) throw Error("indices and counts differ in length");
      r.values.assign(dim, 0.0);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= dim) throw DimensionMismatch("sparse index out of range");
        r.values[idx[i]] = counts[i];
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("bad dump record: ") + e.what());
  }
  if (r.label != 0 && r.label != 1) throw Error("dump label must be 0 or 1");
  return r;
}

Dataset read_dump(const std::filesystem::path& dump, std::string* variant) {
  std::ifstream in(dump);
  if (!in) throw Error("cannot read dump " + dump.string());
  std::string line;
  std::optional<Dataset> data;
  std::string seen_variant;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const DumpRecord r = dump_record_from_json(line);
    if (!data) {
      data.emplace(r.values.size());
      seen_variant = r.variant;
    } else if (r.variant != seen_variant) {
      throw Error("dump mixes variants '" + seen_variant + "' and '" + r.variant + "'");
    }
    data->add_row(std::span<const double>(r.values), r.label);
  }
  if (!data) throw Error("dump " + dump.string() + " is empty");
  if (variant) *variant = seen_variant;
  return std::move(*data);
}

}  // namespace peguard

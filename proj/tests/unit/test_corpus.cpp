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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "peguard/corpus.hpp"
#include "peguard/desk.hpp"
#include "peguard/error.hpp"
#include "peguard/features.hpp"
#include "peguard/pe.hpp"
#include "peguard/synth.hpp"

namespace peguard {
namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

TEST(CorpusManifest, RoundTripAndRelativePaths) {
  TempDir dir("peguard_manifest_test");
  const std::vector<ManifestEntry> entries{{"a.exe", 0, "2017"}, {"/abs/b.exe", 1, ""}};
  write_manifest(entries, dir.path() / "m.tsv");
  const auto back = read_manifest(dir.path() / "m.tsv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].path, dir.path() / "a.exe");
  EXPECT_EQ(back[0].tag, "2017");
  EXPECT_EQ(back[1].path, std::filesystem::path("/abs/b.exe"));
  EXPECT_EQ(back[1].label, 1);
}

TEST(CorpusManifest, LabelsCommentsAndErrors) {
  TempDir dir("peguard_manifest_test2");
  std::ofstream(dir.path() / "ok.tsv") << "# comment\n\nx.exe\tmalware\ny.exe\tbenign\t2018\n";
  const auto m = read_manifest(dir.path() / "ok.tsv");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].label, 1);
  EXPECT_EQ(m[1].label, 0);
  std::ofstream(dir.path() / "bad.tsv") << "x.exe\tperhaps\n";
  EXPECT_THROW(read_manifest(dir.path() / "bad.tsv"), Error);
  std::ofstream(dir.path() / "short.tsv") << "x.exe\n";
  EXPECT_THROW(read_manifest(dir.path() / "short.tsv"), Error);
  EXPECT_THROW(read_manifest(dir.path() / "missing.tsv"), Error);
}

TEST(CorpusDump, DenseAndSparseRecordsRoundTrip) {
  DumpRecord dense{"abc", 1, "v2", {0.0, 1.5, -2.25, 1e-300}};
  const auto d = dump_record_from_json(dump_record_to_json(dense));
  EXPECT_EQ(d.values, dense.values);
  EXPECT_EQ(d.variant, "v2");
  EXPECT_EQ(d.label, 1);

  DumpRecord sparse{"def", 0, "skipgram", std::vector<double>(65536, 0.0)};
  sparse.values[3] = 7;
  sparse.values[60000] = 1;
  const std::string line = dump_record_to_json(sparse);
  EXPECT_NE(line.find("\"indices\""), std::string::npos);
  EXPECT_LT(line.size(), 200u);
  EXPECT_EQ(dump_record_from_json(line).values, sparse.values);

  EXPECT_THROW(dump_record_from_json("{"), Error);
  EXPECT_THROW(dump_record_from_json(R"({"sha256":"x","label":3,"variant":"v1","dim":1,"values":[1]})"), Error);
  EXPECT_THROW(dump_record_from_json(R"({"sha256":"x","label":1,"variant":"v1","dim":2,"values":[1]})"),
               DimensionMismatch);
}

TEST(CorpusDump, ReadDumpBuildsDataset) {
  TempDir dir("peguard_dump_test");
  {
    std::ofstream out(dir.path() / "d.jsonl");
    for (int i = 0; i < 5; ++i) {
      out << dump_record_to_json({"h" + std::to_string(i), i % 2, "v2", std::vector<double>(3, i)}) << "\n";
    }
  }
  std::string variant;
  const Dataset ds = read_dump(dir.path() / "d.jsonl", &variant);
  EXPECT_EQ(variant, "v2");
  EXPECT_EQ(ds.rows(), 5u);
  EXPECT_EQ(ds.cols(), 3u);
  EXPECT_EQ(ds.at(4, 2), 4.0f);
  {
    std::ofstream out(dir.path() / "mixed.jsonl");
    out << dump_record_to_json({"a", 0, "v2", {1, 2}}) << "\n" << dump_record_to_json({"b", 0, "v1", {1, 2}}) << "\n";
  }
  EXPECT_THROW(read_dump(dir.path() / "mixed.jsonl"), Error);
  {
    std::ofstream out(dir.path() / "dims.jsonl");
    out << dump_record_to_json({"a", 0, "v2", {1, 2}}) << "\n" << dump_record_to_json({"b", 0, "v2", {1}}) << "\n";
  }
  EXPECT_THROW(read_dump(dir.path() / "dims.jsonl"), DimensionMismatch);
  std::ofstream(dir.path() / "empty.jsonl") << "";
  EXPECT_THROW(read_dump(dir.path() / "empty.jsonl"), Error);
}

TEST(Synth, FixturesAndDeskSamplesAreValidPe) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    EXPECT_NO_THROW(parse_pe(synth::make_fixture(seed)));
    const auto b = synth::generate_desk_sample(seed, synth::Profile::benign, 2017);
    const auto m = synth::generate_desk_sample(seed, synth::Profile::malware, 2018);
    EXPECT_EQ(b.label, 0);
    EXPECT_EQ(m.label, 1);
    EXPECT_EQ(m.year, 2018);
    EXPECT_NO_THROW(parse_pe(b.bytes));
    EXPECT_NO_THROW(parse_pe(m.bytes));
    EXPECT_LE(m.bytes.size(), 2 * kMiB);
  }
  EXPECT_EQ(synth::make_fixture(9), synth::make_fixture(9));
  EXPECT_NE(synth::make_fixture(9), synth::make_fixture(10));
}

TEST(Desk, SplitIsBalancedAndDisjoint) {
  DeskConfig c;
  c.benign = 100;
  c.malware = 80;
  c.calibration_benign = 40;
  const auto split = make_desk_split(c);
  EXPECT_EQ(split.train.size() + split.validation.size() + split.test.size(), 180u);
  EXPECT_EQ(split.calibration.size(), 40u);
  std::set<std::string> seen;
  auto add = [&](const std::vector<synth::DeskSample>& part, std::size_t want_benign, std::size_t want_malware) {
    std::size_t benign = 0, malware = 0;
    for (const auto& s : part) {
      EXPECT_TRUE(seen.insert(sha256_hex(s.bytes)).second) << "duplicate sample across splits";
      (s.label ? malware : benign) += 1;
    }
    EXPECT_EQ(benign, want_benign);
    EXPECT_EQ(malware, want_malware);
  };
  add(split.train, 40, 32);
  add(split.validation, 30, 24);
  add(split.test, 30, 24);
  add(split.calibration, 40, 0);

  DeskConfig bad = c;
  bad.train_fraction = 0.7;
  EXPECT_THROW(make_desk_split(bad), ConfigError);
}

}  // namespace
}  // namespace peguard

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

// Drives the peguard binary end to end.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "peguard/corpus.hpp"
#include "peguard/synth.hpp"

namespace {

namespace fs = std::filesystem;

const fs::path kCli = PEGUARD_CLI_PATH;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = kCli.string() + " --log-level warn " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// A small desk build shared by the tests in this file. Each test runs in its
// own process, so the build is cached on disk and keyed by the binary's
// modification time.
const fs::path& desk_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "peguard_cli_test";
    const fs::path stamp = d / "stamp";
    const auto mtime = std::to_string(fs::last_write_time(kCli).time_since_epoch().count());
    std::string have;
    if (std::ifstream in(stamp); in) std::getline(in, have);
    if (have != mtime || !fs::exists(d / "pipeline.json")) {
      fs::remove_all(d);
      const auto r = run("desk-build -o " + d.string() +
                         " --benign 120 --malware 120 --calibration-benign 100 --model-max-fpr 0.01");
      EXPECT_EQ(r.code, 0) << r.out;
      std::ofstream(stamp) << mtime << "\n";
    }
    return d;
  }();
  return dir;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("nonsense").code, 2);
  EXPECT_EQ(run("classify").code, 2);
  EXPECT_EQ(run("classify -c /nonexistent.json /etc/hostname").code, 1);
  EXPECT_EQ(run("attack -s /etc/hostname").code, 2);
}

TEST(Cli, DeskBuildWritesArtifacts) {
  const auto& d = desk_dir();
  EXPECT_TRUE(fs::exists(d / "pipeline.json"));
  EXPECT_TRUE(fs::exists(d / "rules.txt"));
  for (const char* m : {"default", "v1", "v2", "v3", "skipgram"}) {
    EXPECT_TRUE(fs::exists(d / "models" / (std::string(m) + ".model"))) << m;
  }
  for (const char* s : {"train.tsv", "validation.tsv", "test.tsv"}) EXPECT_TRUE(fs::exists(d / "corpus" / s));
}

TEST(Cli, ClassifyAndEvaluate) {
  const auto& d = desk_dir();
  const auto test = peguard::read_manifest(d / "corpus" / "test.tsv");
  ASSERT_FALSE(test.empty());
  std::string files;
  for (std::size_t i = 0; i < 6 && i < test.size(); ++i) files += " " + test[i].path.string();
  const auto r = run("classify -c " + (d / "pipeline.json").string() + " --no-stateful -v" + files);
  ASSERT_EQ(r.code, 0);
  const auto out = lines(r.out);
  ASSERT_EQ(out.size(), std::min<std::size_t>(6, test.size()));
  for (const auto& l : out) EXPECT_NE(l.find("default="), std::string::npos) << l;

  const auto e = run("evaluate -c " + (d / "pipeline.json").string() + " -m " + (d / "corpus" / "test.tsv").string() +
                     " --json");
  ASSERT_EQ(e.code, 0);
  EXPECT_NE(e.out.find("\"tpr\""), std::string::npos);
  EXPECT_NE(e.out.find("\"latency_p99_ms\""), std::string::npos);
}

TEST(Cli, ExtractTrainAndRules) {
  const auto& d = desk_dir();
  const fs::path work = fs::temp_directory_path() / "peguard_cli_extract";
  fs::remove_all(work);
  ASSERT_EQ(run("extract -m " + (d / "corpus" / "train.tsv").string() + " --variant v2 --variant skipgram -o " +
                work.string())
                .code,
            0);
  ASSERT_TRUE(fs::exists(work / "v2.jsonl"));
  ASSERT_TRUE(fs::exists(work / "skipgram.jsonl"));
  ASSERT_EQ(run("extract -m " + (d / "corpus" / "train.tsv").string() + " --variant nope -o " + work.string()).code, 2);

  const auto t = run("train -d " + (work / "v2.jsonl").string() + " -o " + (work / "v2.model").string() +
                     " --trees 10 --monotone increasing");
  ASSERT_EQ(t.code, 0) << t.out;
  EXPECT_NE(t.out.find("digest"), std::string::npos);
  EXPECT_TRUE(fs::exists(work / "v2.model"));

  std::ofstream(work / "r.yar") << peguard::synth::desk_rule_text();
  const auto f = run("rules filter -r " + (work / "r.yar").string() + " -m " + (d / "corpus" / "train.tsv").string() +
                     " -o " + (work / "kept.txt").string());
  ASSERT_EQ(f.code, 0);
  const auto s = run("rules scan -r " + (work / "kept.txt").string() + " /etc/hostname");
  ASSERT_EQ(s.code, 0);
  EXPECT_NE(s.out.find("\t-"), std::string::npos);
  fs::remove_all(work);
}

TEST(Cli, AttackAgainstLocalPipeline) {
  const auto& d = desk_dir();
  const auto test = peguard::read_manifest(d / "corpus" / "test.tsv");
  fs::path sample;
  for (const auto& e : test) {
    if (e.label == 1) {
      sample = e.path;
      break;
    }
  }
  ASSERT_FALSE(sample.empty());
  const fs::path log = fs::temp_directory_path() / "peguard_cli_attack.tsv";
  const auto r = run("attack -s " + sample.string() + " -c " + (d / "pipeline.json").string() +
                     " --queries 5 --pool set_timestamp,break_checksum --log " + log.string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream in(log);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l);) n += !l.empty();
  EXPECT_GE(n, 2u);  // header plus at least one query
  EXPECT_LE(n, 6u);
  EXPECT_EQ(run("attack -s " + sample.string() + " -c " + (d / "pipeline.json").string() + " --pool bogus").code, 1);
  fs::remove(log);
}

TEST(Cli, ServeAnswersAndStopsOnSignal) {
  const auto& d = desk_dir();
  const std::string cmd = kCli.string() + " --log-level warn serve -c " + (d / "pipeline.json").string() +
                          " --port 0 --admin-port -1 --workers 1 2>/dev/null & echo $!";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  std::array<char, 256> buf{};
  ASSERT_NE(std::fgets(buf.data(), buf.size(), pipe), nullptr);
  const int pid = std::stoi(buf.data());
  std::string listening;
  if (std::fgets(buf.data(), buf.size(), pipe)) listening = buf.data();
  ASSERT_NE(listening.find("listening on"), std::string::npos) << listening;
  const auto colon = listening.find(':');
  const int port = std::stoi(listening.substr(colon + 1));

  const auto test = peguard::read_manifest(d / "corpus" / "test.tsv");
  const auto r = run("attack -s " + test[0].path.string() + " --url http://127.0.0.1:" + std::to_string(port) +
                     " --queries 2 --pool set_timestamp");
  EXPECT_EQ(r.code, 0) << r.out;

  kill(pid, SIGTERM);
  pclose(pipe);
}

}  // namespace

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

// Subcommand implementations. Each run_* returns the process exit code and
// throws on runtime failure; main() maps exceptions to exit code 1.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "peguard/desk.hpp"
#include "peguard/gbdt.hpp"
#include "service.hpp"

namespace peguard::cli {

struct ExtractArgs {
  std::filesystem::path manifest;
  std::vector<std::string> variants;
  std::filesystem::path output_dir;
};
int run_extract(const ExtractArgs& args);

struct TrainArgs {
  std::filesystem::path dump;
  std::filesystem::path output;
  TrainConfig training;
  /// "none", "increasing" (all +1) or one of "+-0" per feature.
  std::string monotone = "none";
  std::optional<std::string> corpus_tag;
  std::optional<std::filesystem::path> validation_dump;
  double max_fpr = 0.005;
};
int run_train(const TrainArgs& args);

struct RulesFilterArgs {
  std::filesystem::path rules;
  std::filesystem::path manifest;
  std::filesystem::path output;
  bool lenient = false;
};
int run_rules_filter(const RulesFilterArgs& args);

struct RulesScanArgs {
  std::filesystem::path rules;
  std::vector<std::filesystem::path> files;
};
int run_rules_scan(const RulesScanArgs& args);

/// Pipeline-config overrides shared by serve, classify, evaluate and attack.
struct PipelineOverrides {
  std::filesystem::path config;
  std::optional<double> slack_threshold;
  std::optional<double> overlay_threshold;
  std::optional<std::size_t> state_capacity;
  std::optional<double> state_threshold;
  std::optional<std::filesystem::path> state_persist;
  bool no_detectors = false;
  bool no_stateful = false;
  bool no_signatures = false;
  /// When non-empty, only these models stay enabled.
  std::vector<std::string> models;
};

struct ServeArgs {
  PipelineOverrides pipeline;
  service::ServiceConfig service;
};
int run_serve(const ServeArgs& args);

struct ClassifyArgs {
  PipelineOverrides pipeline;
  std::vector<std::filesystem::path> files;
  bool verbose = false;
};
int run_classify(const ClassifyArgs& args);

struct EvaluateArgs {
  PipelineOverrides pipeline;
  std::filesystem::path manifest;
  bool json = false;
};
int run_evaluate(const EvaluateArgs& args);

struct AttackArgs {
  std::filesystem::path sample;
  /// Either a local pipeline or a remote /predict endpoint.
  std::optional<PipelineOverrides> pipeline;
  std::optional<std::string> url;
  std::optional<std::string> token;
  std::vector<std::string> pool;
  std::size_t queries = 1000;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> donor;
  std::optional<std::filesystem::path> output;
  std::optional<std::filesystem::path> log;
};
int run_attack(const AttackArgs& args);

struct GenCorpusArgs {
  std::filesystem::path output;
  DeskConfig desk;
};
int run_gen_corpus(const GenCorpusArgs& args);

struct DeskBuildArgs {
  std::filesystem::path output;
  DeskConfig desk;
  bool write_split = true;
};
int run_desk_build(const DeskBuildArgs& args);

}  // namespace peguard::cli

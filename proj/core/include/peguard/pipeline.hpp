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

// The full decision procedure: parse, semantic-gap detectors, an OR over
// per-model votes plus signatures, then the query-history check.

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peguard/bytes.hpp"
#include "peguard/gap.hpp"
#include "peguard/gbdt.hpp"
#include "peguard/rules.hpp"
#include "peguard/stateful.hpp"

namespace peguard {

enum class MalformedPolicy { malware, benign };

/// One classifier of the ensemble. kind is "default", "v1", "v2", "v3" or
/// "skipgram" and selects the feature extractor.
struct ModelSpec {
  std::string name;
  std::string kind;
  std::filesystem::path path;
  double threshold = 0.5;
  bool enabled = true;
};

struct PipelineConfig {
  bool detectors_enabled = true;
  GapConfig gap;
  std::vector<ModelSpec> models;
  bool signatures_enabled = true;
  std::optional<std::filesystem::path> ruleset_path;
  bool stateful_enabled = true;
  StatefulConfig stateful;
  MalformedPolicy malformed_policy = MalformedPolicy::malware;
  /// Remaining models are skipped once this much time has elapsed.
  double soft_budget_ms = 3000.0;

  /// Throws ConfigError.
  void validate() const;
};

/// Reads the JSON config; relative paths resolve against the file's
/// directory. Throws ConfigError.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void save_pipeline_config(const PipelineConfig& config, const std::filesystem::path& path);
std::string pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});

struct ModelScore {
  std::string name;
  double score = 0.0;
  double threshold = 0.0;
  bool vote = false;
  bool skipped = false;
};

struct Verdict {
  bool malware = false;
  /// Components that voted malware: "parse", a gap detector name, a model
  /// name, "signature", "stateful" or "error".
  std::vector<std::string> sources;
  std::vector<ModelScore> scores;
  std::vector<std::string> matched_rules;
  std::vector<GapVerdict> gaps;
  double stateful_distance = 0.0;
  bool budget_exceeded = false;
  std::vector<std::string> diagnostics;
  std::map<std::string, double> timings_ms;
  double total_ms = 0.0;
};

struct LoadedModel {
  ModelSpec spec;
  TreeEnsemble model;
};

struct ClassifyOptions {
  bool use_stateful = true;
  /// When the request arrived. The soft budget is measured from here, so
  /// time spent queued counts against it. Defaults to the call time.
  std::optional<std::chrono::steady_clock::time_point> received;
};

/// Models and rules are immutable after construction; classify may be called
/// concurrently.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::vector<LoadedModel> models, RuleSet rules);
  /// Loads every artifact named by the config. Throws ConfigError.
  static Pipeline load(const PipelineConfig& config);
  static Pipeline load(const std::filesystem::path& config_path);

  /// Never throws; internal failures become a malware verdict with source
  /// "error".
  Verdict classify(ByteView bytes, const ClassifyOptions& options = {}) const;

  const PipelineConfig& config() const { return config_; }
  const std::vector<LoadedModel>& models() const { return models_; }
  const RuleSet& rules() const { return rules_; }
  HistoryBuffer& history() const { return *history_; }

 private:
  Verdict classify_impl(ByteView bytes, const ClassifyOptions& options) const;

  PipelineConfig config_;
  std::vector<LoadedModel> models_;
  RuleSet rules_;
  std::unique_ptr<HistoryBuffer> history_;
};

/// Feature vector a model of \p kind consumes. Throws ConfigError for an
/// unknown kind.
std::vector<double> model_input(ByteView bytes, const std::string& kind);
std::size_t model_input_dimension(const std::string& kind);

struct EvaluationMetrics {
  std::size_t benign = 0;
  std::size_t malware = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  double tpr = 0.0;
  double fpr = 0.0;
  /// Per-source counts over malware verdicts.
  std::map<std::string, std::size_t> attribution;
  double latency_p50_ms = 0.0;
  double latency_p99_ms = 0.0;
  double latency_max_ms = 0.0;
};

/// Classifies every sample with the stateful check disabled. Throws EmptySet.
EvaluationMetrics evaluate(const Pipeline& pipeline, std::span<const LabeledBytes> corpus);

/// evaded / validated. Throws EmptySet.
double evasion_rate(std::span<const bool> evaded);

/// Smallest threshold in (0, 1) such that at most floor(max_fpr * n) benign
/// scores reach it. Throws EmptySet.
double threshold_for_fpr(std::span<const double> benign_scores, double max_fpr);

/// Nearest-rank percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

}  // namespace peguard

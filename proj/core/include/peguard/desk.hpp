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

// Desk-scale experiment: a synthetic labeled corpus split into train,
// validation and test, and the full set of trained, calibrated pipeline
// artifacts built from it.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "peguard/gbdt.hpp"
#include "peguard/pipeline.hpp"
#include "peguard/rules.hpp"
#include "peguard/synth.hpp"

namespace peguard {

struct DeskConfig {
  std::size_t benign = 2000;
  std::size_t malware = 2000;
  std::uint64_t seed = 1;
  double train_fraction = 0.4;
  double validation_fraction = 0.3;
  /// Extra benign-only samples used for threshold calibration. They never
  /// enter training or test; per-model budgets below one validation sample
  /// cannot be resolved without them.
  std::size_t calibration_benign = 3000;
  TrainConfig ember_training = default_ember_training();
  TrainConfig skipgram_training = default_skipgram_training();
  /// Per-model false-positive budget on the calibration benign scores.
  double model_max_fpr = 0.0006;
  /// Percentile (in percent) of benign pairwise fingerprint distances.
  double stateful_percentile = 0.1;

  static TrainConfig default_ember_training();
  static TrainConfig default_skipgram_training();
};

struct DeskSplit {
  std::vector<synth::DeskSample> train;
  std::vector<synth::DeskSample> validation;
  std::vector<synth::DeskSample> test;
  /// Benign only; see DeskConfig::calibration_benign.
  std::vector<synth::DeskSample> calibration;
};

/// Half of each class is tagged 2017, half 2018; each class is split
/// separately so every split keeps the class balance.
DeskSplit make_desk_split(const DeskConfig& config);

std::vector<LabeledBytes> labeled_view(const std::vector<synth::DeskSample>& samples);

struct DeskArtifacts {
  PipelineConfig config;
  std::vector<LoadedModel> models;
  RuleSet rules;
  std::map<std::string, double> validation_auc;
  double stateful_threshold = 0.0;
};

/// Trains default/v1/v2/skipgram on the 2017 training samples and v3 on the
/// 2018 ones, filters the desk rules on the training split, and calibrates
/// per-model thresholds on validation benign plus the calibration pool.
DeskArtifacts train_desk_pipeline(const DeskSplit& split, const DeskConfig& config);

/// Writes models/<name>.model, rules.txt and pipeline.json under \p dir.
void save_desk_artifacts(DeskArtifacts& artifacts, const std::filesystem::path& dir);

/// Writes every sample to <dir>/<split>/<sha256>.exe plus <split>.tsv
/// manifests.
void save_desk_split(const DeskSplit& split, const std::filesystem::path& dir);

}  // namespace peguard

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

#include "peguard/desk.hpp"

#include <algorithm>
#include <random>

#include "peguard/corpus.hpp"
#include "peguard/error.hpp"
#include "peguard/stateful.hpp"

namespace peguard {

TrainConfig DeskConfig::default_ember_training() {
  TrainConfig c;
  c.num_trees = 150;
  c.max_depth = 5;
  c.learning_rate = 0.1;
  c.min_samples_leaf = 5;
  c.row_subsample = 0.8;
  c.col_subsample = 0.5;
  c.seed = 11;
  return c;
}

TrainConfig DeskConfig::default_skipgram_training() {
  TrainConfig c;
  c.num_trees = 100;
  c.max_depth = 4;
  c.learning_rate = 0.1;
  c.min_samples_leaf = 5;
  c.row_subsample = 0.8;
  c.col_subsample = 0.1;
  c.seed = 13;
  return c;
}

DeskSplit make_desk_split(const DeskConfig& config) {
  if (config.train_fraction <= 0 || config.validation_fraction < 0 ||
      config.train_fraction + config.validation_fraction >= 1.0) {
    throw ConfigError("split fractions must leave room for a test split");
  }
  DeskSplit split;
  std::mt19937_64 rng(config.seed ^ 0x5EEDULL);
  auto build = [&](synth::Profile profile, std::size_t count, std::uint64_t salt) {
    std::vector<synth::DeskSample> samples;
    samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const int year = i % 2 == 0 ? 2017 : 2018;
      samples.push_back(synth::generate_desk_sample(config.seed * 1000003 + salt + i, profile, year));
    }
    std::shuffle(samples.begin(), samples.end(), rng);
    const auto ntrain = static_cast<std::size_t>(static_cast<double>(count) * config.train_fraction);
    const auto nval = static_cast<std::size_t>(static_cast<double>(count) * config.validation_fraction);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto& dst = i < ntrain ? split.train : (i < ntrain + nval ? split.validation : split.test);
      dst.push_back(std::move(samples[i]));
    }
  };
  build(synth::Profile::benign, config.benign, 0);
  build(synth::Profile::malware, config.malware, 500000);
  for (std::size_t i = 0; i < config.calibration_benign; ++i) {
    split.calibration.push_back(
        synth::generate_desk_sample(config.seed * 1000003 + 900000 + i, synth::Profile::benign, i % 2 == 0 ? 2017 : 2018));
  }
  return split;
}

std::vector<LabeledBytes> labeled_view(const std::vector<synth::DeskSample>& samples) {
  std::vector<LabeledBytes> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.bytes, s.label});
  return out;
}

DeskArtifacts train_desk_pipeline(const DeskSplit& split, const DeskConfig& config) {
  DeskArtifacts art;
  struct Plan {
    std::string kind;
    int year;
  };
  const std::vector<Plan> plans = {{"default", 2017}, {"v1", 2017}, {"v2", 2017}, {"v3", 2018}, {"skipgram", 2017}};

  for (const Plan& plan : plans) {
    const std::size_t dim = model_input_dimension(plan.kind);
    Dataset data(dim);
    for (const auto& s : split.train) {
      if (s.year == plan.year) data.add_row(std::span<const double>(model_input(s.bytes, plan.kind)), s.label);
    }
    const bool skipgram = plan.kind == "skipgram";
    std::vector<std::int8_t> monotone;
    if (skipgram) monotone.assign(dim, 1);
    TreeEnsemble model = train(data, skipgram ? config.skipgram_training : config.ember_training, monotone);
    model.variant = plan.kind;
    model.corpus_tag = std::to_string(plan.year);

    std::vector<double> scores, benign_scores;
    std::vector<int> labels;
    for (const auto& s : split.validation) {
      const double p = model.predict(model_input(s.bytes, plan.kind));
      scores.push_back(p);
      labels.push_back(s.label);
      if (s.label == 0) benign_scores.push_back(p);
    }
    art.validation_auc[plan.kind] = roc_auc(scores, labels);
    for (const auto& s : split.calibration) benign_scores.push_back(model.predict(model_input(s.bytes, plan.kind)));

    ModelSpec spec;
    spec.name = plan.kind;
    spec.kind = plan.kind;
    spec.path = "models/" + plan.kind + ".model";
    spec.threshold = threshold_for_fpr(benign_scores, config.model_max_fpr);
    art.config.models.push_back(spec);
    art.models.push_back({spec, std::move(model)});
  }

  const auto rules = parse_rules(synth::desk_rule_text());
  const auto train_view = labeled_view(split.train);
  art.rules = filter_rules(rules, train_view);
  art.config.ruleset_path = "rules.txt";

  std::vector<Fingerprint> benign_fps;
  for (const auto* part : {&split.train, &split.validation}) {
    for (const auto& s : *part) {
      if (s.label == 0) benign_fps.push_back(fingerprint(s.bytes));
    }
  }
  art.stateful_threshold = calibrate_threshold(benign_fps, config.stateful_percentile);
  art.config.stateful.threshold = art.stateful_threshold;
  return art;
}

void save_desk_artifacts(DeskArtifacts& art, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "models");
  for (auto& m : art.models) {
    save_model(m.model, dir / m.spec.path);
  }
  for (auto& spec : art.config.models) spec.path = spec.path.generic_string();
  save_ruleset(art.rules, dir / "rules.txt");
  save_pipeline_config(art.config, dir / "pipeline.json");
}

void save_desk_split(const DeskSplit& split, const std::filesystem::path& dir) {
  auto write = [&](const std::vector<synth::DeskSample>& samples, const std::string& name) {
    std::filesystem::create_directories(dir / name);
    std::vector<ManifestEntry> entries;
    for (const auto& s : samples) {
      const auto rel = std::filesystem::path(name) / (sha256_hex(s.bytes) + ".exe");
      write_file(dir / rel, s.bytes);
      entries.push_back({rel, s.label, std::to_string(s.year) + ":" + s.family});
    }
    write_manifest(entries, dir / (name + ".tsv"));
  };
  write(split.train, "train");
  write(split.validation, "validation");
  write(split.test, "test");
}

}  // namespace peguard

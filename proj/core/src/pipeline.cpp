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

#include "peguard/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "peguard/error.hpp"
#include "peguard/features.hpp"
#include "peguard/pe.hpp"
#include "peguard/skipgram.hpp"

namespace peguard {

using json = nlohmann::json;

namespace {

const std::set<std::string>& known_kinds() {
  static const std::set<std::string> kinds{"default", "v1", "v2", "v3", "skipgram"};
  return kinds;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void PipelineConfig::validate() const {
  std::set<std::string> names;
  for (const ModelSpec& m : models) {
    if (m.name.empty()) throw ConfigError("model without a name");
    if (!names.insert(m.name).second) throw ConfigError("duplicate model name '" + m.name + "'");
    if (!known_kinds().count(m.kind)) throw ConfigError("model '" + m.name + "' has unknown kind '" + m.kind + "'");
    if (!(m.threshold > 0.0 && m.threshold < 1.0)) {
      throw ConfigError("model '" + m.name + "' threshold must be in (0, 1)");
    }
  }
  if (!(gap.slack_threshold >= 0.0 && gap.slack_threshold < 1.0)) throw ConfigError("slack threshold must be in [0, 1)");
  if (!(gap.overlay_threshold > 0.0 && gap.overlay_threshold <= 1.0)) {
    throw ConfigError("overlay threshold must be in (0, 1]");
  }
  if (stateful.capacity == 0) throw ConfigError("stateful capacity must be positive");
  if (!(stateful.threshold >= 0.0)) throw ConfigError("stateful threshold must be >= 0");
  if (!(soft_budget_ms > 0.0)) throw ConfigError("soft budget must be positive");
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
  json j;
  j["detectors"] = {{"enabled", c.detectors_enabled},
                    {"slack_threshold", c.gap.slack_threshold},
                    {"overlay_threshold", c.gap.overlay_threshold}};
  j["models"] = json::array();
  for (const ModelSpec& m : c.models) {
    j["models"].push_back({{"name", m.name},
                           {"kind", m.kind},
                           {"path", m.path.generic_string()},
                           {"threshold", m.threshold},
                           {"enabled", m.enabled}});
  }
  j["signatures"] = {{"enabled", c.signatures_enabled},
                     {"path", c.ruleset_path ? json(c.ruleset_path->generic_string()) : json(nullptr)}};
  j["stateful"] = {{"enabled", c.stateful_enabled},
                   {"capacity", c.stateful.capacity},
                   {"threshold", c.stateful.threshold},
                   {"store_flagged", c.stateful.store_flagged},
                   {"store_gap_hits", c.stateful.store_gap_hits},
                   {"persist", c.stateful.persist_path ? json(c.stateful.persist_path->generic_string())
                                                       : json(nullptr)}};
  j["malformed_policy"] = c.malformed_policy == MalformedPolicy::malware ? "malware" : "benign";
  j["soft_budget_ms"] = c.soft_budget_ms;
  return j.dump(2) + "\n";
}

PipelineConfig pipeline_config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
      static const std::set<std::string> allowed{"detectors", "models", "signatures", "stateful",
                                                 "malformed_policy", "soft_budget_ms"};
      if (!allowed.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    if (j.contains("detectors")) {
      const json& d = j.at("detectors");
      c.detectors_enabled = d.value("enabled", c.detectors_enabled);
      c.gap.slack_threshold = d.value("slack_threshold", c.gap.slack_threshold);
      c.gap.overlay_threshold = d.value("overlay_threshold", c.gap.overlay_threshold);
    }
    if (j.contains("models")) {
      for (const json& m : j.at("models")) {
        ModelSpec s;
        s.name = m.at("name").get<std::string>();
        s.kind = m.value("kind", s.name);
        s.path = resolve(m.at("path").get<std::string>());
        s.threshold = m.value("threshold", s.threshold);
        s.enabled = m.value("enabled", s.enabled);
        c.models.push_back(std::move(s));
      }
    }
    if (j.contains("signatures")) {
      const json& s = j.at("signatures");
      c.signatures_enabled = s.value("enabled", c.signatures_enabled);
      if (s.contains("path") && !s.at("path").is_null()) c.ruleset_path = resolve(s.at("path").get<std::string>());
    }
    if (j.contains("stateful")) {
      const json& s = j.at("stateful");
      c.stateful_enabled = s.value("enabled", c.stateful_enabled);
      c.stateful.capacity = s.value("capacity", c.stateful.capacity);
      c.stateful.threshold = s.value("threshold", c.stateful.threshold);
      c.stateful.store_flagged = s.value("store_flagged", c.stateful.store_flagged);
      c.stateful.store_gap_hits = s.value("store_gap_hits", c.stateful.store_gap_hits);
      if (s.contains("persist") && !s.at("persist").is_null()) {
        c.stateful.persist_path = resolve(s.at("persist").get<std::string>());
      }
    }
    if (j.contains("malformed_policy")) {
      const auto p = j.at("malformed_policy").get<std::string>();
      if (p == "malware") c.malformed_policy = MalformedPolicy::malware;
      else if (p == "benign") c.malformed_policy = MalformedPolicy::benign;
      else throw ConfigError("malformed_policy must be 'malware' or 'benign'");
    }
    c.soft_budget_ms = j.value("soft_budget_ms", c.soft_budget_ms);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read pipeline config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return pipeline_config_from_json(text, path.parent_path());
}

void save_pipeline_config(const PipelineConfig& config, const std::filesystem::path& path) {
  write_file(path, as_bytes(pipeline_config_to_json(config)));
}

std::vector<double> model_input(ByteView bytes, const std::string& kind) {
  if (kind == "skipgram") return to_dense(skipgram_vector_bounded(bytes));
  const auto variant = variant_by_name(kind);
  if (!variant) throw ConfigError("unknown model kind '" + kind + "'");
  return extract_features(bytes, *variant).values;
}

namespace {

std::string extractor_key(const std::string& kind) {
  const auto variant = variant_by_name(kind);
  if (!variant) return kind;
  std::string key;
  for (FeatureGroup g : variant->groups) key += std::string(to_string(g)) + ",";
  key += variant->truncate_to_virtual_size ? "t" : "-";
  key += variant->strip_strings_from_byte_stream ? "s" : "-";
  key += variant->include_printable_string_histogram ? "h" : "-";
  return key;
}

}  // namespace

std::size_t model_input_dimension(const std::string& kind) {
  if (kind == "skipgram") return SkipgramConfig{}.buckets;
  const auto variant = variant_by_name(kind);
  if (!variant) throw ConfigError("unknown model kind '" + kind + "'");
  return variant->dimension();
}

Pipeline::Pipeline(PipelineConfig config, std::vector<LoadedModel> models, RuleSet rules)
    : config_(std::move(config)), models_(std::move(models)), rules_(std::move(rules)) {
  for (const LoadedModel& m : models_) {
    if (m.model.feature_dimension != model_input_dimension(m.spec.kind)) {
      throw ConfigError("model '" + m.spec.name + "' has dimension " + std::to_string(m.model.feature_dimension) +
                        ", kind '" + m.spec.kind + "' needs " + std::to_string(model_input_dimension(m.spec.kind)));
    }
  }
  history_ = std::make_unique<HistoryBuffer>(config_.stateful);
}

Pipeline Pipeline::load(const PipelineConfig& config) {
  config.validate();
  std::vector<LoadedModel> models;
  for (const ModelSpec& spec : config.models) {
    try {
      models.push_back({spec, load_model(spec.path)});
    } catch (const Error& e) {
      throw ConfigError("model '" + spec.name + "': " + e.what());
    }
  }
  RuleSet rules;
  if (config.ruleset_path) {
    try {
      rules = load_ruleset(*config.ruleset_path);
    } catch (const Error& e) {
      throw ConfigError("rule set: " + std::string(e.what()));
    }
  }
  return Pipeline(config, std::move(models), std::move(rules));
}

Pipeline Pipeline::load(const std::filesystem::path& config_path) { return load(load_pipeline_config(config_path)); }

Verdict Pipeline::classify(ByteView bytes, const ClassifyOptions& options) const {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = classify_impl(bytes, options);
  } catch (const std::exception& e) {
    v = Verdict{};
    v.malware = true;
    v.sources = {"error"};
    v.diagnostics.push_back(e.what());
  }
  v.total_ms = ms_since(t0);
  return v;
}

Verdict Pipeline::classify_impl(ByteView bytes, const ClassifyOptions& options) const {
  const auto t0 = options.received.value_or(std::chrono::steady_clock::now());
  Verdict v;
  auto stage = [&](const std::string& name, auto&& fn) {
    const auto s = std::chrono::steady_clock::now();
    fn();
    v.timings_ms[name] += ms_since(s);
  };

  // Short-circuited verdicts (parse failure, gap hits) still feed the history.
  auto finish_early = [&](bool store) {
    if (options.use_stateful && config_.stateful_enabled && store && !bytes.empty()) {
      stage("stateful", [&] { history_->insert(fingerprint(bytes)); });
    }
    return v;
  };

  std::optional<PeFile> pe;
  stage("parse", [&] {
    try {
      pe = parse_pe(bytes);
    } catch (const MalformedPe& e) {
      v.diagnostics.push_back(std::string("parse: ") + e.what());
    }
  });
  if (!pe) {
    if (config_.malformed_policy == MalformedPolicy::malware) {
      v.malware = true;
      v.sources.push_back("parse");
      return finish_early(config_.stateful.store_gap_hits);
    }
  }

  if (pe && config_.detectors_enabled) {
    stage("detectors", [&] { v.gaps = run_gap_detectors(*pe, config_.gap); });
    for (const GapVerdict& g : v.gaps) {
      if (g.flagged) v.sources.emplace_back(to_string(g.detector));
    }
    if (!v.sources.empty()) {
      v.malware = true;
      return finish_early(config_.stateful.store_gap_hits);
    }
  }

  // Models whose extractors are configured identically (v2 and v3) share
  // one extraction.
  std::map<std::string, std::vector<double>> inputs;
  bool vote = false;
  for (const LoadedModel& m : models_) {
    if (!m.spec.enabled) continue;
    ModelScore s{m.spec.name, 0.0, m.spec.threshold, false, false};
    if (ms_since(t0) > config_.soft_budget_ms) {
      s.skipped = true;
      v.budget_exceeded = true;
      v.diagnostics.push_back("soft budget exceeded; skipped model '" + m.spec.name + "'");
      v.scores.push_back(s);
      continue;
    }
    stage("model:" + m.spec.name, [&] {
      const std::string key = extractor_key(m.spec.kind);
      auto it = inputs.find(key);
      if (it == inputs.end()) it = inputs.emplace(key, model_input(bytes, m.spec.kind)).first;
      s.score = m.model.predict(it->second);
    });
    s.vote = s.score >= s.threshold;
    if (s.vote) {
      vote = true;
      v.sources.push_back(m.spec.name);
    }
    v.scores.push_back(s);
  }
  if (config_.signatures_enabled && !rules_.empty()) {
    if (ms_since(t0) > config_.soft_budget_ms) {
      v.budget_exceeded = true;
      v.diagnostics.push_back("soft budget exceeded; skipped signatures");
    } else {
      stage("signatures", [&] { v.matched_rules = rules_.scan(bytes); });
      if (!v.matched_rules.empty()) {
        vote = true;
        v.sources.push_back("signature");
      }
    }
  }
  v.malware = vote;

  if (options.use_stateful && config_.stateful_enabled && !bytes.empty()) {
    stage("stateful", [&] {
      const StatefulDecision d = history_->check_and_update(fingerprint(bytes), vote);
      v.stateful_distance = d.distance;
      if (d.flagged) {
        v.malware = true;
        v.sources.push_back("stateful");
      }
    });
  }
  return v;
}

EvaluationMetrics evaluate(const Pipeline& pipeline, std::span<const LabeledBytes> corpus) {
  if (corpus.empty()) throw EmptySet("evaluation corpus is empty");
  EvaluationMetrics m;
  std::vector<double> latencies;
  latencies.reserve(corpus.size());
  ClassifyOptions opts;
  opts.use_stateful = false;
  for (const LabeledBytes& s : corpus) {
    const Verdict v = pipeline.classify(s.bytes, opts);
    latencies.push_back(v.total_ms);
    if (s.label == 1) {
      ++m.malware;
      m.true_positives += v.malware ? 1 : 0;
    } else {
      ++m.benign;
      m.false_positives += v.malware ? 1 : 0;
    }
    if (v.malware) {
      for (const std::string& src : v.sources) ++m.attribution[src];
    }
  }
  m.tpr = m.malware ? static_cast<double>(m.true_positives) / static_cast<double>(m.malware) : 0.0;
  m.fpr = m.benign ? static_cast<double>(m.false_positives) / static_cast<double>(m.benign) : 0.0;
  m.latency_p50_ms = percentile(latencies, 50);
  m.latency_p99_ms = percentile(latencies, 99);
  m.latency_max_ms = *std::max_element(latencies.begin(), latencies.end());
  return m;
}

double evasion_rate(std::span<const bool> evaded) {
  if (evaded.empty()) throw EmptySet("no validated samples");
  const auto n = std::count(evaded.begin(), evaded.end(), true);
  return static_cast<double>(n) / static_cast<double>(evaded.size());
}

double threshold_for_fpr(std::span<const double> benign_scores, double max_fpr) {
  if (benign_scores.empty()) throw EmptySet("no benign scores");
  std::vector<double> s(benign_scores.begin(), benign_scores.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  const auto allowed = static_cast<std::size_t>(std::floor(max_fpr * static_cast<double>(s.size()) + 1e-9));
  double t = allowed >= s.size() ? 0.0 : std::nextafter(s[allowed], 2.0);
  constexpr double kLow = 1e-9;
  const double kHigh = std::nextafter(1.0, 0.0);
  return std::clamp(t, kLow, kHigh);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(values.size()));
  const std::size_t idx = rank <= 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return values[std::min(idx, values.size() - 1)];
}

}  // namespace peguard

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

#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <memory>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "peguard/corpus.hpp"
#include "peguard/error.hpp"
#include "peguard/features.hpp"
#include "peguard/pipeline.hpp"
#include "peguard/redteam.hpp"
#include "peguard/rules.hpp"
#include "peguard/synth.hpp"

namespace peguard::cli {

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct LoadedCorpus {
  std::vector<Bytes> bytes;
  std::vector<LabeledBytes> view;
};

LoadedCorpus load_corpus(const std::filesystem::path& manifest) {
  LoadedCorpus c;
  const auto entries = read_manifest(manifest);
  c.bytes.reserve(entries.size());
  for (const auto& e : entries) c.bytes.push_back(read_file(e.path));
  for (std::size_t i = 0; i < entries.size(); ++i) c.view.push_back({c.bytes[i], entries[i].label});
  return c;
}

PipelineConfig pipeline_config(const PipelineOverrides& o) {
  PipelineConfig c = load_pipeline_config(o.config);
  if (o.slack_threshold) c.gap.slack_threshold = *o.slack_threshold;
  if (o.overlay_threshold) c.gap.overlay_threshold = *o.overlay_threshold;
  if (o.state_capacity) c.stateful.capacity = *o.state_capacity;
  if (o.state_threshold) c.stateful.threshold = *o.state_threshold;
  if (o.state_persist) c.stateful.persist_path = *o.state_persist;
  if (o.no_detectors) c.detectors_enabled = false;
  if (o.no_stateful) c.stateful_enabled = false;
  if (o.no_signatures) c.signatures_enabled = false;
  if (!o.models.empty()) {
    for (const auto& name : o.models) {
      const bool known = std::any_of(c.models.begin(), c.models.end(), [&](const ModelSpec& m) { return m.name == name; });
      if (!known) throw ConfigError("no model named '" + name + "' in " + o.config.string());
    }
    for (auto& m : c.models) {
      m.enabled = std::find(o.models.begin(), o.models.end(), m.name) != o.models.end();
    }
  }
  c.validate();
  return c;
}

std::shared_ptr<const Pipeline> load_pipeline(const PipelineOverrides& o) {
  return std::make_shared<const Pipeline>(Pipeline::load(pipeline_config(o)));
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

void print_metrics(const EvaluationMetrics& m) {
  std::printf("%-12s %zu benign, %zu malware\n", "samples", m.benign, m.malware);
  std::printf("%-12s %.4f (%zu/%zu)\n", "tpr", m.tpr, m.true_positives, m.malware);
  std::printf("%-12s %.4f (%zu/%zu)\n", "fpr", m.fpr, m.false_positives, m.benign);
  std::printf("%-12s p50 %.1f  p99 %.1f  max %.1f\n", "latency ms", m.latency_p50_ms, m.latency_p99_ms,
              m.latency_max_ms);
  std::printf("\n%-12s %s\n", "source", "malware verdicts");
  for (const auto& [src, n] : m.attribution) std::printf("%-12s %zu\n", src.c_str(), n);
}

}  // namespace

int run_extract(const ExtractArgs& args) {
  std::vector<std::string> variants = args.variants;
  if (variants.empty()) variants = {"default", "v1", "v2", "v3", "skipgram"};
  for (const auto& v : variants) model_input_dimension(v);  // rejects unknown names up front

  const auto entries = read_manifest(args.manifest);
  std::filesystem::create_directories(args.output_dir);
  std::vector<std::ofstream> outs;
  for (const auto& v : variants) {
    outs.emplace_back(args.output_dir / (v + ".jsonl"));
    if (!outs.back()) throw Error("cannot write " + (args.output_dir / (v + ".jsonl")).string());
  }
  for (const auto& e : entries) {
    const Bytes bytes = read_file(e.path);
    const std::string digest = sha256_hex(bytes);
    for (std::size_t i = 0; i < variants.size(); ++i) {
      DumpRecord r{digest, e.label, variants[i], model_input(bytes, variants[i])};
      outs[i] << dump_record_to_json(r) << '\n';
    }
  }
  spdlog::info("extracted {} files x {} variants into {}", entries.size(), variants.size(), args.output_dir.string());
  return 0;
}

int run_train(const TrainArgs& args) {
  std::string variant;
  const Dataset data = read_dump(args.dump, &variant);
  std::vector<std::int8_t> monotone;
  if (args.monotone == "increasing") {
    monotone.assign(data.cols(), 1);
  } else if (args.monotone != "none") {
    if (args.monotone.size() != data.cols()) {
      throw ConfigError("--monotone needs " + std::to_string(data.cols()) + " characters");
    }
    for (char ch : args.monotone) {
      if (ch == '+') monotone.push_back(1);
      else if (ch == '-') monotone.push_back(-1);
      else if (ch == '0') monotone.push_back(0);
      else throw ConfigError("--monotone characters must be +, - or 0");
    }
  }
  spdlog::info("training {} on {} rows x {} features", variant, data.rows(), data.cols());
  TreeEnsemble model = train(data, args.training, monotone);
  model.variant = variant;
  if (args.corpus_tag) {
    model.corpus_tag = *args.corpus_tag;
  } else if (const auto v = variant_by_name(variant)) {
    model.corpus_tag = v->corpus_tag;
  }
  save_model(model, args.output);
  std::printf("model %s  trees %zu  digest %s\n", args.output.string().c_str(), model.trees.size(),
              model_digest(model).c_str());

  if (args.validation_dump) {
    std::string val_variant;
    const Dataset val = read_dump(*args.validation_dump, &val_variant);
    if (val_variant != variant) throw ConfigError("validation dump is " + val_variant + ", model is " + variant);
    std::vector<double> scores, benign;
    for (std::size_t r = 0; r < val.rows(); ++r) {
      std::vector<double> x(val.row(r).begin(), val.row(r).end());
      scores.push_back(model.predict(x));
      if (val.label(r) == 0) benign.push_back(scores.back());
    }
    std::printf("validation auc %.4f\n", roc_auc(scores, val.labels()));
    if (!benign.empty()) {
      std::printf("threshold at fpr <= %.4f: %.6f\n", args.max_fpr, threshold_for_fpr(benign, args.max_fpr));
    }
  }
  return 0;
}

int run_rules_filter(const RulesFilterArgs& args) {
  ParsedRules parsed;
  if (std::filesystem::is_directory(args.rules)) {
    parsed = load_rules_dir(args.rules, args.lenient);
  } else {
    const Bytes text = read_file(args.rules);
    const std::string_view sv(reinterpret_cast<const char*>(text.data()), text.size());
    if (args.lenient) parsed = parse_rules_lenient(sv);
    else parsed.rules = parse_rules(sv);
  }
  for (const auto& s : parsed.skipped) spdlog::warn("skipped rule {}: {}", s.name, s.reason);

  const LoadedCorpus corpus = load_corpus(args.manifest);
  const RuleSet kept = filter_rules(parsed.rules, corpus.view);
  save_ruleset(kept, args.output);
  std::printf("%-32s %8s %8s\n", "rule", "malware", "benign");
  for (const auto& s : kept.stats()) std::printf("%-32s %8zu %8zu\n", s.name.c_str(), s.malware_matches, s.benign_matches);
  std::printf("kept %zu of %zu rules\n", kept.rules().size(), parsed.rules.size());
  return 0;
}

int run_rules_scan(const RulesScanArgs& args) {
  const RuleSet rules = load_ruleset(args.rules);
  for (const auto& f : args.files) {
    const auto hits = rules.scan(read_file(f));
    std::printf("%s\t%s\n", f.string().c_str(), hits.empty() ? "-" : join(hits, ",").c_str());
  }
  return 0;
}

int run_serve(const ServeArgs& args) {
  auto pipeline = load_pipeline(args.pipeline);
  service::Service svc(args.service, pipeline);
  svc.start();
  std::printf("listening on %s:%d admin %d\n", args.service.host.c_str(), svc.port(), svc.admin_port());
  std::fflush(stdout);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  svc.stop();
  spdlog::info("stopped; {}", service::stats_to_json(svc.stats()));
  return 0;
}

int run_classify(const ClassifyArgs& args) {
  auto pipeline = load_pipeline(args.pipeline);
  for (const auto& f : args.files) {
    const Verdict v = pipeline->classify(read_file(f));
    std::printf("%s\t%d", f.string().c_str(), v.malware ? 1 : 0);
    if (args.verbose) {
      std::printf("\t%s\t%.1fms", v.sources.empty() ? "-" : join(v.sources, ",").c_str(), v.total_ms);
      for (const auto& s : v.scores) {
        if (s.skipped) std::printf("\t%s=skipped", s.name.c_str());
        else std::printf("\t%s=%.4f/%.4f", s.name.c_str(), s.score, s.threshold);
      }
    }
    std::printf("\n");
  }
  return 0;
}

int run_evaluate(const EvaluateArgs& args) {
  auto pipeline = load_pipeline(args.pipeline);
  const LoadedCorpus corpus = load_corpus(args.manifest);
  const EvaluationMetrics m = evaluate(*pipeline, corpus.view);
  if (args.json) {
    nlohmann::json j{{"benign", m.benign},
                     {"malware", m.malware},
                     {"tpr", m.tpr},
                     {"fpr", m.fpr},
                     {"attribution", m.attribution},
                     {"latency_p50_ms", m.latency_p50_ms},
                     {"latency_p99_ms", m.latency_p99_ms},
                     {"latency_max_ms", m.latency_max_ms}};
    std::printf("%s\n", j.dump(2).c_str());
  } else {
    print_metrics(m);
  }
  return 0;
}

int run_attack(const AttackArgs& args) {
  AttackBudget budget;
  budget.max_queries = args.queries;
  budget.seed = args.seed;
  std::vector<std::string> pool = args.pool;
  if (pool.empty()) pool = {"append_overlay", "fill_slack", "add_section", "inject_benign_strings"};
  for (const auto& name : pool) {
    const auto kind = modification_from_string(name);
    if (!kind) throw ConfigError("unknown modification '" + name + "'");
    budget.pool.push_back(*kind);
  }

  AttackOptions options;
  options.donor = args.donor ? read_file(*args.donor) : synth::benign_donor(args.seed);

  Oracle oracle;
  std::shared_ptr<const Pipeline> pipeline;
  std::shared_ptr<httplib::Client> client;
  if (args.pipeline) {
    pipeline = load_pipeline(*args.pipeline);
    oracle = [pipeline](ByteView b) { return pipeline->classify(b).malware ? 1 : 0; };
  } else if (args.url) {
    client = std::make_shared<httplib::Client>(*args.url);
    client->set_read_timeout(30);
    httplib::Headers headers;
    if (args.token) headers.emplace("Authorization", "Bearer " + *args.token);
    oracle = [client, headers](ByteView b) {
      const auto res = client->Post("/predict", headers, reinterpret_cast<const char*>(b.data()), b.size(),
                                    "application/octet-stream");
      if (!res) throw Error("request failed: " + httplib::to_string(res.error()));
      if (res->status != 200) throw Error("service answered " + std::to_string(res->status));
      return nlohmann::json::parse(res->body).at("result").get<int>();
    };
  } else {
    throw ConfigError("attack needs --config or --url");
  }

  const Bytes sample = read_file(args.sample);
  const AttackOutcome out = blackbox_attack(oracle, sample, budget, options);
  std::printf("evaded %s  queries %zu  final size %zu\n", out.evaded ? "yes" : "no", out.queries_used,
              out.final_sample.size());
  if (args.output && out.evaded) write_file(*args.output, out.final_sample);
  if (args.log) {
    std::ofstream log(*args.log);
    log << "query\tmodification\tverdict\tfile_size\tretained\n";
    for (const auto& e : out.log) {
      log << e.query << '\t' << e.modification << '\t' << e.verdict << '\t' << e.file_size << '\t'
          << (e.retained ? 1 : 0) << '\n';
    }
  }
  return 0;
}

int run_gen_corpus(const GenCorpusArgs& args) {
  const DeskSplit split = make_desk_split(args.desk);
  save_desk_split(split, args.output);
  std::printf("train %zu  validation %zu  test %zu  -> %s\n", split.train.size(), split.validation.size(),
              split.test.size(), args.output.string().c_str());
  return 0;
}

int run_desk_build(const DeskBuildArgs& args) {
  spdlog::info("generating desk corpus ({} benign, {} malware, seed {})", args.desk.benign, args.desk.malware,
               args.desk.seed);
  const DeskSplit split = make_desk_split(args.desk);
  DeskArtifacts art = train_desk_pipeline(split, args.desk);
  save_desk_artifacts(art, args.output);
  if (args.write_split) save_desk_split(split, args.output / "corpus");

  std::printf("%-10s %8s %10s\n", "model", "val auc", "threshold");
  for (const auto& spec : art.config.models) {
    std::printf("%-10s %8.4f %10.6f\n", spec.name.c_str(), art.validation_auc.at(spec.name), spec.threshold);
  }
  std::printf("rules kept %zu  stateful threshold %.4f\n\n", art.rules.rules().size(), art.stateful_threshold);

  const Pipeline pipeline = Pipeline::load(args.output / "pipeline.json");
  const auto test = labeled_view(split.test);
  print_metrics(evaluate(pipeline, test));
  return 0;
}

}  // namespace peguard::cli

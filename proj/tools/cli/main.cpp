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

// peguard command line. Usage errors exit with 2, runtime failures with 1.
//
// Environment overrides (flags win):
//   PEGUARD_CONFIG        --config
//   PEGUARD_HOST          serve --host
//   PEGUARD_PORT          serve --port
//   PEGUARD_ADMIN_PORT    serve --admin-port
//   PEGUARD_API_TOKEN     serve --token, attack --token
//   PEGUARD_DEADLINE_MS   serve --deadline-ms
//   PEGUARD_MAX_BODY      serve --max-body
//   PEGUARD_STATE_PERSIST --state-persist
//   PEGUARD_LOG_LEVEL     --log-level

#include <cstdio>
#include <exception>
#include <functional>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "commands.hpp"

namespace {

using namespace peguard;
using namespace peguard::cli;

void add_pipeline_flags(CLI::App* cmd, PipelineOverrides& o, bool config_required = true) {
  auto* c = cmd->add_option("-c,--config", o.config, "Pipeline config (JSON)")->envname("PEGUARD_CONFIG");
  if (config_required) c->required();
  cmd->add_option("--slack-threshold", o.slack_threshold, "Non-zero byte fraction that flags a slack region")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--overlay-threshold", o.overlay_threshold, "Overlay/file size ratio that flags an overlay")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--state-capacity", o.state_capacity, "Query-history capacity")->check(CLI::PositiveNumber);
  cmd->add_option("--state-threshold", o.state_threshold, "Query-history L1 distance threshold")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--state-persist", o.state_persist, "Append-only fingerprint log")->envname("PEGUARD_STATE_PERSIST");
  cmd->add_flag("--no-detectors", o.no_detectors, "Disable the semantic-gap detectors");
  cmd->add_flag("--no-stateful", o.no_stateful, "Disable the query-history check");
  cmd->add_flag("--no-signatures", o.no_signatures, "Disable signature rules");
  cmd->add_option("--models", o.models, "Enable only these models (by name)")->delimiter(',');
}

void add_desk_flags(CLI::App* cmd, DeskConfig& d) {
  cmd->add_option("--benign", d.benign, "Benign samples")->capture_default_str();
  cmd->add_option("--malware", d.malware, "Malware samples")->capture_default_str();
  cmd->add_option("--seed", d.seed, "Generator seed")->capture_default_str();
  cmd->add_option("--train-fraction", d.train_fraction, "Training share")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--validation-fraction", d.validation_fraction, "Validation share")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("peguard"));

  CLI::App app{"peguard: static PE malware detection with gap detectors, boosted trees, signatures and query history"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->envname("PEGUARD_LOG_LEVEL")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  int rc = 0;
  std::vector<std::pair<CLI::App*, std::function<void()>>> actions;

  ExtractArgs extract;
  auto* c_extract = app.add_subcommand("extract", "Write per-variant feature dumps for a manifest");
  c_extract->add_option("-m,--manifest", extract.manifest, "TSV manifest: path, label[, tag]")->required()->check(CLI::ExistingFile);
  c_extract->add_option("--variant", extract.variants, "default, v1, v2, v3 or skipgram (repeatable; default all)")
      ->check(CLI::IsMember({"default", "v1", "v2", "v3", "skipgram"}));
  c_extract->add_option("-o,--output-dir", extract.output_dir, "Directory for <variant>.jsonl")->required();
  actions.emplace_back(c_extract, [&] { rc = run_extract(extract); });

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a boosted-tree model from a feature dump");
  c_train->add_option("-d,--dump", tr.dump, "Feature dump (JSONL)")->required()->check(CLI::ExistingFile);
  c_train->add_option("-o,--output", tr.output, "Model file")->required();
  c_train->add_option("--trees", tr.training.num_trees, "Number of trees")->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--depth", tr.training.max_depth, "Maximum depth")->capture_default_str()->check(CLI::PositiveNumber);
  c_train->add_option("--learning-rate", tr.training.learning_rate, "Shrinkage")->capture_default_str();
  c_train->add_option("--min-leaf", tr.training.min_samples_leaf, "Minimum rows per leaf")->capture_default_str();
  c_train->add_option("--bins", tr.training.histogram_bins, "Histogram bins (<= 256)")->capture_default_str();
  c_train->add_option("--l2", tr.training.l2_leaf_regularization, "L2 leaf regularization")->capture_default_str();
  c_train->add_option("--row-subsample", tr.training.row_subsample, "Row sampling rate")->capture_default_str();
  c_train->add_option("--col-subsample", tr.training.col_subsample, "Column sampling rate per tree")->capture_default_str();
  c_train->add_option("--seed", tr.training.seed, "Training seed")->capture_default_str();
  c_train->add_option("--monotone", tr.monotone, "none, increasing, or one +/-/0 per feature")->capture_default_str();
  c_train->add_option("--corpus-tag", tr.corpus_tag, "Corpus tag stored in the model");
  c_train->add_option("--validation", tr.validation_dump, "Dump for AUC and threshold reporting")->check(CLI::ExistingFile);
  c_train->add_option("--max-fpr", tr.max_fpr, "FPR budget for the reported threshold")->capture_default_str();
  actions.emplace_back(c_train, [&] {
    tr.training.validate();
    rc = run_train(tr);
  });

  auto* c_rules = app.add_subcommand("rules", "Signature rule tools");
  c_rules->require_subcommand(1);
  RulesFilterArgs rf;
  auto* c_filter = c_rules->add_subcommand("filter", "Keep rules that hit malware and never hit benign files");
  c_filter->add_option("-r,--rules", rf.rules, "Rule file or directory")->required()->check(CLI::ExistingPath);
  c_filter->add_option("-m,--manifest", rf.manifest, "Labeled manifest")->required()->check(CLI::ExistingFile);
  c_filter->add_option("-o,--output", rf.output, "Filtered rule set")->required();
  c_filter->add_flag("--lenient", rf.lenient, "Skip unsupported rules instead of failing");
  actions.emplace_back(c_filter, [&] { rc = run_rules_filter(rf); });
  RulesScanArgs rs;
  auto* c_scan = c_rules->add_subcommand("scan", "Print matching rules per file");
  c_scan->add_option("-r,--rules", rs.rules, "Rule set")->required()->check(CLI::ExistingFile);
  c_scan->add_option("files", rs.files, "Files to scan")->required()->check(CLI::ExistingFile);
  actions.emplace_back(c_scan, [&] { rc = run_rules_scan(rs); });

  ServeArgs serve;
  int deadline_ms = static_cast<int>(serve.service.deadline.count());
  std::string token;
  auto* c_serve = app.add_subcommand("serve", "Run the classification service");
  add_pipeline_flags(c_serve, serve.pipeline);
  c_serve->add_option("--host", serve.service.host, "Bind address")->envname("PEGUARD_HOST")->capture_default_str();
  c_serve->add_option("--port", serve.service.port, "Black-box port (0 = any)")
      ->envname("PEGUARD_PORT")
      ->capture_default_str()
      ->check(CLI::Range(0, 65535));
  c_serve->add_option("--admin-port", serve.service.admin_port, "Admin port for /stats (-1 = off)")
      ->envname("PEGUARD_ADMIN_PORT")
      ->capture_default_str()
      ->check(CLI::Range(-1, 65535));
  c_serve->add_flag("--stats-on-main-port", serve.service.stats_on_main_port, "Also serve /stats on the black-box port");
  c_serve->add_option("--max-body", serve.service.max_body, "Largest accepted body in bytes")
      ->envname("PEGUARD_MAX_BODY")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1024}, std::size_t{1} << 30));
  c_serve->add_option("--deadline-ms", deadline_ms, "Hard response deadline")
      ->envname("PEGUARD_DEADLINE_MS")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_serve->add_flag("!--fail-open", serve.service.fail_closed, "Answer 0 instead of 1 on deadline misses");
  c_serve->add_option("--token", token, "Require 'Authorization: Bearer <token>'")->envname("PEGUARD_API_TOKEN");
  c_serve->add_option("--workers", serve.service.workers, "Classification workers (0 = hardware threads)")
      ->capture_default_str();
  c_serve->add_option("--http-threads", serve.service.http_threads, "Connection threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  actions.emplace_back(c_serve, [&] {
    serve.service.deadline = std::chrono::milliseconds(deadline_ms);
    if (!token.empty()) serve.service.api_token = token;
    rc = run_serve(serve);
  });

  ClassifyArgs cl;
  auto* c_classify = app.add_subcommand("classify", "Classify files with a local pipeline");
  add_pipeline_flags(c_classify, cl.pipeline);
  c_classify->add_flag("-v,--verbose", cl.verbose, "Print sources, scores and timing");
  c_classify->add_option("files", cl.files, "Files")->required()->check(CLI::ExistingFile);
  actions.emplace_back(c_classify, [&] { rc = run_classify(cl); });

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "TPR/FPR, attribution and latency on a labeled manifest");
  add_pipeline_flags(c_eval, ev.pipeline);
  c_eval->add_option("-m,--manifest", ev.manifest, "Labeled manifest")->required()->check(CLI::ExistingFile);
  c_eval->add_flag("--json", ev.json, "Print JSON instead of a table");
  actions.emplace_back(c_eval, [&] {
    ev.pipeline.no_stateful = true;
    rc = run_evaluate(ev);
  });

  AttackArgs at;
  PipelineOverrides at_pipeline;
  std::string at_token;
  auto* c_attack = app.add_subcommand("attack", "Query-driven evasion attack against a pipeline or service");
  c_attack->add_option("-s,--sample", at.sample, "Malware sample")->required()->check(CLI::ExistingFile);
  add_pipeline_flags(c_attack, at_pipeline, false);
  auto* url = c_attack->add_option("--url", at.url, "Service base URL, e.g. http://127.0.0.1:8080");
  c_attack->get_option("--config")->excludes(url);
  c_attack->add_option("--token", at_token, "Bearer token for --url")->envname("PEGUARD_API_TOKEN");
  c_attack->add_option("--pool", at.pool, "Modification kinds (comma separated)")->delimiter(',');
  c_attack->add_option("--queries", at.queries, "Query budget")->capture_default_str()->check(CLI::PositiveNumber);
  c_attack->add_option("--seed", at.seed, "Attack seed")->capture_default_str();
  c_attack->add_option("--donor", at.donor, "Benign file supplying strings")->check(CLI::ExistingFile);
  c_attack->add_option("-o,--output", at.output, "Write the evading sample here");
  c_attack->add_option("--log", at.log, "Per-query TSV log");
  actions.emplace_back(c_attack, [&] {
    if (!at_pipeline.config.empty()) at.pipeline = at_pipeline;
    if (!at_token.empty()) at.token = at_token;
    if (!at.pipeline && !at.url) throw CLI::RequiredError("--config or --url");
    rc = run_attack(at);
  });

  GenCorpusArgs gc;
  auto* c_gen = app.add_subcommand("gen-corpus", "Write the synthetic desk corpus with train/validation/test manifests");
  c_gen->add_option("-o,--output", gc.output, "Output directory")->required();
  add_desk_flags(c_gen, gc.desk);
  actions.emplace_back(c_gen, [&] { rc = run_gen_corpus(gc); });

  DeskBuildArgs db;
  auto* c_desk = app.add_subcommand("desk-build", "Generate, train and calibrate the full desk pipeline");
  c_desk->add_option("-o,--output", db.output, "Output directory")->required();
  add_desk_flags(c_desk, db.desk);
  c_desk->add_option("--model-max-fpr", db.desk.model_max_fpr, "Per-model FPR budget")->capture_default_str();
  c_desk->add_option("--calibration-benign", db.desk.calibration_benign, "Extra benign calibration samples")
      ->capture_default_str();
  c_desk->add_flag("!--no-corpus", db.write_split, "Do not write the corpus files");
  actions.emplace_back(c_desk, [&] { rc = run_desk_build(db); });

  try {
    app.parse(argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));
    for (auto& [cmd, action] : actions) {
      if (cmd->parsed()) action();
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return rc;
}

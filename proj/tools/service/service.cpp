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

#include "service.hpp"

#include <algorithm>
#include <future>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "peguard/error.hpp"

namespace peguard::service {

using Clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kLatencyWindow = 10000;
// Handlers answer this much before the hard deadline to leave room for the
// response write.
constexpr auto kResponseMargin = std::chrono::milliseconds(50);

std::string result_body(int result) { return nlohmann::json{{"result", result}}.dump(); }

std::string error_body(const std::string& message) { return nlohmann::json{{"error", message}}.dump(); }

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

void ServiceConfig::validate() const {
  if (deadline.count() <= 0) throw ConfigError("deadline must be positive");
  if (max_body < kKiB) throw ConfigError("max body must be at least 1 KiB");
  if (port < 0 || port > 65535) throw ConfigError("invalid port");
  if (admin_port > 65535) throw ConfigError("invalid admin port");
  if (http_threads == 0) throw ConfigError("http_threads must be positive");
  if (api_token && api_token->empty()) throw ConfigError("empty API token");
}

std::string stats_to_json(const StatsSnapshot& s) {
  nlohmann::json j;
  j["queries"] = s.queries;
  j["malware_verdicts"] = s.malware_verdicts;
  j["stateful_hits"] = s.stateful_hits;
  j["timeouts"] = s.timeouts;
  j["rejected"] = s.rejected;
  j["attribution"] = s.attribution;
  j["latency_p50_ms"] = s.latency_p50_ms;
  j["latency_p99_ms"] = s.latency_p99_ms;
  return j.dump();
}

struct Service::Job {
  Bytes body;
  Clock::time_point received;
  std::promise<std::optional<Verdict>> result;
  std::atomic<bool> abandoned{false};
};

struct Service::Listeners {
  httplib::Server main;
  httplib::Server admin;
  std::thread main_thread;
  std::thread admin_thread;
};

Service::Service(ServiceConfig config, std::shared_ptr<const Pipeline> pipeline)
    : config_(std::move(config)), pipeline_(std::move(pipeline)) {
  config_.validate();
  if (!pipeline_) throw ConfigError("service needs a pipeline");
  std::size_t n = config_.workers;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  latencies_.reserve(kLatencyWindow);
  for (std::size_t i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() {
  stop();
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

void Service::worker_loop() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = std::move(queue_.front());
      queue_.pop_front();
    }
    if (job->abandoned.load() || Clock::now() >= job->received + config_.deadline) {
      job->result.set_value(std::nullopt);
      continue;
    }
    ClassifyOptions options;
    options.received = job->received;
    job->result.set_value(pipeline_->classify(job->body, options));
  }
}

PredictResponse Service::predict(ByteView body, Clock::time_point received) {
  PredictResponse r;
  if (body.empty()) {
    count_rejection();
    r.status = 400;
    r.body = error_body("empty body");
    return r;
  }
  if (body.size() > config_.max_body) {
    count_rejection();
    r.status = 413;
    r.body = error_body("body exceeds " + std::to_string(config_.max_body) + " bytes");
    return r;
  }

  auto job = std::make_shared<Job>();
  job->body.assign(body.begin(), body.end());
  job->received = received;
  auto future = job->result.get_future();
  {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(job);
  }
  queue_cv_.notify_one();

  const auto due = received + config_.deadline - kResponseMargin;
  std::optional<Verdict> verdict;
  if (future.wait_until(due) == std::future_status::ready) verdict = future.get();
  if (!verdict) {
    job->abandoned = true;
    r.timed_out = true;
    r.result = config_.fail_closed ? 1 : 0;
  } else {
    r.result = verdict->malware ? 1 : 0;
  }
  r.body = result_body(r.result);
  record(verdict ? &*verdict : nullptr, r.timed_out, ms_between(received, Clock::now()));
  if (r.timed_out) spdlog::warn("request missed the deadline; answered {}", r.result);
  return r;
}

void Service::record(const Verdict* verdict, bool timed_out, double latency_ms) {
  std::lock_guard lock(stats_mutex_);
  ++counters_.queries;
  if (timed_out) {
    ++counters_.timeouts;
    if (config_.fail_closed) {
      ++counters_.malware_verdicts;
      ++counters_.attribution["timeout"];
    }
  } else if (verdict && verdict->malware) {
    ++counters_.malware_verdicts;
    for (const auto& src : verdict->sources) {
      ++counters_.attribution[src];
      if (src == "stateful") ++counters_.stateful_hits;
    }
  }
  if (latencies_.size() < kLatencyWindow) {
    latencies_.push_back(latency_ms);
  } else {
    latencies_[latency_next_] = latency_ms;
    latency_next_ = (latency_next_ + 1) % kLatencyWindow;
  }
}

void Service::count_rejection() {
  std::lock_guard lock(stats_mutex_);
  ++counters_.rejected;
}

bool Service::authorized(const std::string& header) const {
  if (!config_.api_token) return true;
  return header == "Bearer " + *config_.api_token;
}

StatsSnapshot Service::stats() const {
  std::lock_guard lock(stats_mutex_);
  StatsSnapshot s = counters_;
  if (!latencies_.empty()) {
    s.latency_p50_ms = percentile(latencies_, 50);
    s.latency_p99_ms = percentile(latencies_, 99);
  }
  return s;
}

void Service::start() {
  if (running_) return;
  listeners_ = std::make_unique<Listeners>();
  const std::size_t threads = config_.http_threads;

  auto configure = [&](httplib::Server& svr) {
    svr.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    svr.set_payload_max_length(config_.max_body);
    svr.set_error_handler([this](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      count_rejection();
      res.set_content(error_body(httplib::status_message(res.status)), "application/json");
      return httplib::Server::HandlerResponse::Handled;
    });
  };
  auto stats_handler = [this](const httplib::Request& req, httplib::Response& res) {
    if (!authorized(req.get_header_value("Authorization"))) {
      count_rejection();
      res.status = 401;
      res.set_content(error_body("unauthorized"), "application/json");
      return;
    }
    res.set_content(stats_to_json(stats()), "application/json");
  };

  auto& main = listeners_->main;
  configure(main);
  main.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
    const auto received = Clock::now();
    if (!authorized(req.get_header_value("Authorization"))) {
      count_rejection();
      res.status = 401;
      res.set_content(error_body("unauthorized"), "application/json");
      return;
    }
    const PredictResponse r = predict(as_bytes(req.body), received);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  if (config_.stats_on_main_port) main.Get("/stats", stats_handler);

  auto bind = [&](httplib::Server& svr, int port) {
    if (port == 0) return svr.bind_to_any_port(config_.host);
    return svr.bind_to_port(config_.host, port) ? port : -1;
  };
  bound_port_ = bind(main, config_.port);
  if (bound_port_ < 0) throw Error("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  listeners_->main_thread = std::thread([&main] { main.listen_after_bind(); });

  if (config_.admin_port >= 0) {
    auto& admin = listeners_->admin;
    configure(admin);
    admin.Get("/stats", stats_handler);
    admin.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"ok\":true}", "application/json");
    });
    bound_admin_port_ = bind(admin, config_.admin_port);
    if (bound_admin_port_ < 0) {
      main.stop();
      listeners_->main_thread.join();
      throw Error("cannot bind admin port " + std::to_string(config_.admin_port));
    }
    listeners_->admin_thread = std::thread([&admin] { admin.listen_after_bind(); });
    admin.wait_until_ready();
  }
  main.wait_until_ready();
  running_ = true;
  spdlog::info("listening on {}:{} (admin {})", config_.host, bound_port_, bound_admin_port_);
}

void Service::stop() {
  if (!listeners_) return;
  listeners_->main.stop();
  listeners_->admin.stop();
  if (listeners_->main_thread.joinable()) listeners_->main_thread.join();
  if (listeners_->admin_thread.joinable()) listeners_->admin_thread.join();
  listeners_.reset();
  running_ = false;
  running_.notify_all();
}

void Service::wait() {
  while (running_) running_.wait(true);
}

}  // namespace peguard::service

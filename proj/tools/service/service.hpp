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

// HTTP front end for a Pipeline: a black-box port that answers POST /predict
// with {"result": 0|1} and nothing else, and an optional admin port serving
// GET /stats.
//
// Requests are classified by a fixed pool of workers fed from a FIFO queue.
// A request's soft budget starts when it arrives, so queue time counts. If no
// verdict is ready by the hard deadline the handler answers with the
// fail-closed result and the job is abandoned (a job still queued at its
// deadline is dropped without being classified).

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "peguard/bytes.hpp"
#include "peguard/pipeline.hpp"

namespace peguard::service {

inline constexpr std::size_t kDefaultMaxBody = 2 * kMiB;
inline constexpr std::chrono::milliseconds kDefaultDeadline{5000};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  /// GET /stats listener; negative disables it.
  int admin_port = 8081;
  /// Also serve /stats on the black-box port.
  bool stats_on_main_port = false;
  std::size_t max_body = kDefaultMaxBody;
  std::chrono::milliseconds deadline = kDefaultDeadline;
  /// Result sent when the deadline passes without a verdict.
  bool fail_closed = true;
  /// When set, requests must carry "Authorization: Bearer <token>".
  std::optional<std::string> api_token;
  /// Classification workers; 0 means one per hardware thread.
  std::size_t workers = 0;
  /// Connection-handling threads. Must cover the expected concurrency or
  /// requests wait for a connection slot before their clock starts.
  std::size_t http_threads = 64;

  /// Throws ConfigError.
  void validate() const;
};

struct PredictResponse {
  int status = 200;
  /// 0/1 for status 200.
  int result = 1;
  bool timed_out = false;
  std::string body;  // JSON
};

struct StatsSnapshot {
  std::uint64_t queries = 0;
  std::uint64_t malware_verdicts = 0;
  std::uint64_t stateful_hits = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t rejected = 0;  // 4xx responses
  std::map<std::string, std::uint64_t> attribution;
  double latency_p50_ms = 0.0;
  double latency_p99_ms = 0.0;
};

std::string stats_to_json(const StatsSnapshot& stats);

class Service {
 public:
  Service(ServiceConfig config, std::shared_ptr<const Pipeline> pipeline);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listeners and starts serving in background threads. Throws
  /// Error when a port cannot be bound.
  void start();
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();

  /// Bound ports, valid after start().
  int port() const { return bound_port_; }
  int admin_port() const { return bound_admin_port_; }

  /// The /predict logic without HTTP: size checks, deadline, counters.
  /// \p received is when the request arrived.
  PredictResponse predict(ByteView body, std::chrono::steady_clock::time_point received);
  PredictResponse predict(ByteView body) { return predict(body, std::chrono::steady_clock::now()); }
  /// Records a rejection decided outside predict() (bad token, 413 from the
  /// HTTP layer).
  void count_rejection();
  bool authorized(const std::string& authorization_header) const;

  StatsSnapshot stats() const;
  const ServiceConfig& config() const { return config_; }

 private:
  struct Job;
  struct Listeners;

  void worker_loop();
  void record(const Verdict* verdict, bool timed_out, double latency_ms);

  ServiceConfig config_;
  std::shared_ptr<const Pipeline> pipeline_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::shared_ptr<Job>> queue_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;

  mutable std::mutex stats_mutex_;
  StatsSnapshot counters_;
  std::vector<double> latencies_;  // ring buffer of recent latencies
  std::size_t latency_next_ = 0;

  std::unique_ptr<Listeners> listeners_;
  int bound_port_ = -1;
  int bound_admin_port_ = -1;
  std::atomic<bool> running_{false};
};

}  // namespace peguard::service

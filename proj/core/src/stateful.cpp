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

#include "peguard/stateful.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "peguard/error.hpp"
#include "peguard/features.hpp"

namespace peguard {

Fingerprint fingerprint(ByteView bytes, std::int64_t timestamp) {
  if (bytes.empty()) throw EmptyInput("cannot fingerprint an empty input");
  Fingerprint fp;
  const auto hist = byte_histogram(bytes);
  const auto ent = byte_entropy_histogram(bytes);
  std::copy(hist.begin(), hist.end(), fp.values.begin());
  std::copy(ent.begin(), ent.end(), fp.values.begin() + kByteHistogramDim);
  fp.digest = sha256_hex(bytes);
  fp.timestamp = timestamp;
  return fp;
}

double l1_distance(const Fingerprint& a, const Fingerprint& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < kFingerprintDim; ++i) d += std::abs(a.values[i] - b.values[i]);
  return d;
}

HistoryBuffer::HistoryBuffer(StatefulConfig config) : config_(std::move(config)) {
  if (config_.capacity == 0) throw ConfigError("history capacity must be positive");
  if (!(config_.threshold >= 0.0)) throw ConfigError("stateful threshold must be >= 0");
  if (config_.persist_path) {
    if (std::filesystem::exists(*config_.persist_path)) load_log(*config_.persist_path);
    log_.open(*config_.persist_path, std::ios::app);
    if (!log_) throw Error("cannot open fingerprint log " + config_.persist_path->string());
  }
}

Nearest HistoryBuffer::nearest_locked(const Fingerprint& fp) const {
  Nearest best;
  for (const Fingerprint& e : entries_) {
    const double d = l1_distance(fp, e);
    if (d < best.distance) {
      best.distance = d;
      best.digest = e.digest;
    }
  }
  return best;
}

void HistoryBuffer::insert_locked(const Fingerprint& fp) {
  entries_.push_back(fp);
  while (entries_.size() > config_.capacity) entries_.pop_front();
  if (log_.is_open()) {
    log_ << fingerprint_to_record(fp) << '\n';
    log_.flush();
  }
}

Nearest HistoryBuffer::nearest(const Fingerprint& fp) const {
  std::shared_lock lock(mutex_);
  return nearest_locked(fp);
}

StatefulDecision HistoryBuffer::check_and_update(const Fingerprint& fp, bool ensemble_malware) {
  std::unique_lock lock(mutex_);
  StatefulDecision d;
  if (ensemble_malware) {
    d.malware = true;
    d.stored = true;
    insert_locked(fp);
    return d;
  }
  const Nearest n = nearest_locked(fp);
  d.distance = n.distance;
  if (n.distance < config_.threshold) {
    d.malware = true;
    d.flagged = true;
    if (config_.store_flagged) {
      d.stored = true;
      insert_locked(fp);
    }
  }
  return d;
}

void HistoryBuffer::insert(const Fingerprint& fp) {
  std::unique_lock lock(mutex_);
  insert_locked(fp);
}

std::size_t HistoryBuffer::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::vector<Fingerprint> HistoryBuffer::snapshot() const {
  std::shared_lock lock(mutex_);
  return {entries_.begin(), entries_.end()};
}

void HistoryBuffer::clear() {
  std::unique_lock lock(mutex_);
  entries_.clear();
}

void HistoryBuffer::load_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      entries_.push_back(fingerprint_from_record(line));
    } catch (const Error&) {
      // A torn final write leaves a partial record; skip it.
      continue;
    }
    while (entries_.size() > config_.capacity) entries_.pop_front();
  }
}

double calibrate_threshold(std::span<const Fingerprint> benign, double percentile) {
  std::vector<const Fingerprint*> unique;
  std::vector<std::string> seen;
  for (const Fingerprint& f : benign) {
    if (std::find(seen.begin(), seen.end(), f.digest) == seen.end()) {
      seen.push_back(f.digest);
      unique.push_back(&f);
    }
  }
  if (unique.size() < 2) throw EmptySet("need at least two distinct benign fingerprints");
  std::vector<double> d;
  d.reserve(unique.size() * (unique.size() - 1) / 2);
  for (std::size_t i = 0; i < unique.size(); ++i) {
    for (std::size_t j = i + 1; j < unique.size(); ++j) d.push_back(l1_distance(*unique[i], *unique[j]));
  }
  std::sort(d.begin(), d.end());
  // Nearest-rank percentile.
  const double rank = std::ceil(percentile / 100.0 * static_cast<double>(d.size()));
  const std::size_t idx = rank <= 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return d[std::min(idx, d.size() - 1)];
}

std::string fingerprint_to_record(const Fingerprint& fp) {
  std::string out = "fp " + std::to_string(fp.timestamp) + " " + fp.digest;
  char buf[32];
  for (double v : fp.values) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out += ' ';
    out.append(buf, res.ptr);
  }
  return out;
}

Fingerprint fingerprint_from_record(std::string_view line) {
  Fingerprint fp;
  auto next_token = [&]() -> std::string_view {
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    const auto end = line.find(' ');
    const std::string_view tok = line.substr(0, end);
    line.remove_prefix(end == std::string_view::npos ? line.size() : end);
    return tok;
  };
  if (next_token() != "fp") throw Error("bad fingerprint record");
  const auto ts = next_token();
  if (std::from_chars(ts.data(), ts.data() + ts.size(), fp.timestamp).ec != std::errc()) {
    throw Error("bad fingerprint timestamp");
  }
  fp.digest = std::string(next_token());
  if (fp.digest.size() != 64) throw Error("bad fingerprint digest");
  for (double& v : fp.values) {
    const auto tok = next_token();
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      throw Error("bad fingerprint value");
    }
  }
  if (!next_token().empty()) throw Error("trailing data in fingerprint record");
  return fp;
}

}  // namespace peguard

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

#include "peguard/gbdt.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "peguard/bytes.hpp"
#include "peguard/error.hpp"

namespace peguard {

double Tree::predict(std::span<const double> x) const {
  if (nodes.empty()) return 0.0;
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(static_cast<float>(x[n.feature]) < n.threshold ? n.left
                                                                               : n.right);
  }
  return nodes[i].value;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    }
  }
  return best;
}

double TreeEnsemble::raw_score(std::span<const double> x) const {
  if (x.size() != feature_dimension) {
    throw DimensionMismatch("model expects " + std::to_string(feature_dimension) +
                            " features, got " + std::to_string(x.size()));
  }
  double s = base_score;
  for (const Tree& t : trees) s += t.predict(x);
  return s;
}

double TreeEnsemble::predict(std::span<const double> x) const { return sigmoid(raw_score(x)); }

void TrainConfig::validate() const {
  if (num_trees < 0) throw Error("num_trees must be >= 0");
  if (max_depth < 1) throw Error("max_depth must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("learning_rate must be > 0");
  if (min_samples_leaf < 1) throw Error("min_samples_leaf must be >= 1");
  if (histogram_bins < 2 || histogram_bins > 256) throw Error("histogram_bins must be in [2, 256]");
  if (!(l2_leaf_regularization > 0.0)) throw Error("l2_leaf_regularization must be > 0");
  if (!(row_subsample > 0.0 && row_subsample <= 1.0)) throw Error("row_subsample must be in (0, 1]");
  if (!(col_subsample > 0.0 && col_subsample <= 1.0)) throw Error("col_subsample must be in (0, 1]");
  if (!(max_delta_step > 0.0)) throw Error("max_delta_step must be > 0");
}

void Dataset::add_row(std::span<const double> values, int label) {
  if (values.size() != cols_) {
    throw DimensionMismatch("row has " + std::to_string(values.size()) + " values, expected " +
                            std::to_string(cols_));
  }
  for (double v : values) values_.push_back(static_cast<float>(v));
  labels_.push_back(label);
}

void Dataset::add_row(std::span<const float> values, int label) {
  if (values.size() != cols_) {
    throw DimensionMismatch("row has " + std::to_string(values.size()) + " values, expected " +
                            std::to_string(cols_));
  }
  values_.insert(values_.end(), values.begin(), values.end());
  labels_.push_back(label);
}

std::string Dataset::digest() const {
  Bytes buf(values_.size() * sizeof(float) + labels_.size());
  if (!values_.empty()) std::memcpy(buf.data(), values_.data(), values_.size() * sizeof(float));
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    buf[values_.size() * sizeof(float) + i] = static_cast<std::uint8_t>(labels_[i]);
  }
  return sha256_hex(buf);
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double logistic_loss(double z, double y) {
  // log(1 + e^-z) and log(1 + e^z) without overflow.
  auto softplus = [](double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); };
  return y * softplus(-z) + (1.0 - y) * softplus(z);
}

GradHess logistic_grad_hess(double p, double y) { return {p - y, p * (1.0 - p)}; }

GradientReport verify_gradients(std::size_t points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pdist(0.01, 0.99);
  GradientReport report;
  report.points = points;
  const double e = 1e-4;
  for (std::size_t i = 0; i < points; ++i) {
    const double p = pdist(rng);
    const double y = static_cast<double>(rng() & 1u);
    const double z = logit(p);
    const GradHess an = logistic_grad_hess(p, y);
    const double lp = logistic_loss(z + e, y);
    const double l0 = logistic_loss(z, y);
    const double lm = logistic_loss(z - e, y);
    const double g = (lp - lm) / (2 * e);
    const double h = (lp - 2 * l0 + lm) / (e * e);
    report.max_grad_error = std::max(report.max_grad_error, std::abs(g - an.grad));
    report.max_hess_error = std::max(report.max_hess_error, std::abs(h - an.hess));
  }
  return report;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionMismatch("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        ++pos;
      } else {
        ++neg;
      }
    }
    i = j;
  }
  if (pos == 0 || neg == 0) throw DegenerateData("AUC needs both classes");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

namespace {

// Cut points for one column; a value v falls in bin upper_bound(cuts, v).
std::vector<float> column_cuts(std::vector<float> values, std::size_t max_bins) {
  std::sort(values.begin(), values.end());
  std::vector<float> uniq;
  std::vector<std::size_t> counts;
  for (float v : values) {
    if (uniq.empty() || uniq.back() != v) {
      uniq.push_back(v);
      counts.push_back(1);
    } else {
      ++counts.back();
    }
  }
  std::vector<float> cuts;
  if (uniq.size() < 2) return cuts;
  auto between = [](float a, float b) {
    float m = a + (b - a) / 2.0f;
    if (!(m > a) || m > b) m = b;
    return m;
  };
  if (uniq.size() <= max_bins) {
    for (std::size_t i = 0; i + 1 < uniq.size(); ++i) cuts.push_back(between(uniq[i], uniq[i + 1]));
    return cuts;
  }
  // Quantile cuts: close a bin once it holds its share of the rows.
  const double per_bin = static_cast<double>(values.size()) / static_cast<double>(max_bins);
  double acc = 0;
  double next = per_bin;
  for (std::size_t i = 0; i + 1 < uniq.size() && cuts.size() + 1 < max_bins; ++i) {
    acc += static_cast<double>(counts[i]);
    if (acc >= next) {
      cuts.push_back(between(uniq[i], uniq[i + 1]));
      while (next <= acc) next += per_bin;
    }
  }
  return cuts;
}

struct Binned {
  std::size_t rows = 0;
  std::vector<std::vector<float>> cuts;  // per column
  std::vector<std::uint8_t> bins;        // column-major
  std::uint8_t at(std::size_t col, std::size_t row) const { return bins[col * rows + row]; }
};

Binned bin_dataset(const Dataset& data, std::size_t max_bins) {
  Binned b;
  b.rows = data.rows();
  b.cuts.resize(data.cols());
  b.bins.assign(data.cols() * data.rows(), 0);
  std::vector<float> column(data.rows());
  for (std::size_t c = 0; c < data.cols(); ++c) {
    bool constant = true;
    for (std::size_t r = 0; r < data.rows(); ++r) {
      column[r] = data.at(r, c);
      constant = constant && column[r] == column[0];
    }
    if (constant) continue;
    b.cuts[c] = column_cuts(column, max_bins);
    const auto& cuts = b.cuts[c];
    for (std::size_t r = 0; r < data.rows(); ++r) {
      b.bins[c * b.rows + r] = static_cast<std::uint8_t>(
          std::upper_bound(cuts.begin(), cuts.end(), column[r]) - cuts.begin());
    }
  }
  return b;
}

struct Pending {
  int node = 0;
  int depth = 0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> rows;
};

struct SplitChoice {
  int feature = -1;
  int bin = -1;
  double gain = 0.0;
  double left_weight = 0.0;
  double right_weight = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Binned& binned, const TrainConfig& cfg, const std::vector<std::int8_t>& monotone,
              const std::vector<double>& grad, const std::vector<double>& hess)
      : b_(binned), cfg_(cfg), mono_(monotone), g_(grad), h_(hess) {}

  // Returns the tree and the split bin of each node (for fast routing).
  Tree build(std::vector<std::uint32_t> rows, const std::vector<int>& features,
             std::vector<int>& node_bins) {
    Tree tree;
    tree.nodes.emplace_back();
    node_bins.assign(1, -1);
    std::vector<Pending> stack;
    stack.push_back(Pending{0, 0, -std::numeric_limits<double>::infinity(),
                            std::numeric_limits<double>::infinity(), std::move(rows)});
    while (!stack.empty()) {
      Pending p = std::move(stack.back());
      stack.pop_back();
      double G = 0, H = 0;
      for (auto r : p.rows) {
        G += g_[r];
        H += h_[r];
      }
      SplitChoice best;
      if (p.depth < cfg_.max_depth && p.rows.size() >= 2 * cfg_.min_samples_leaf) {
        best = find_split(p, features, G, H);
      }
      if (best.feature < 0) {
        tree.nodes[p.node].value = cfg_.learning_rate * bounded_weight(G, H, p.lower, p.upper);
        continue;
      }
      const int left = static_cast<int>(tree.nodes.size());
      const int right = left + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      node_bins.push_back(-1);
      node_bins.push_back(-1);
      TreeNode& n = tree.nodes[p.node];
      n.feature = best.feature;
      n.threshold = b_.cuts[best.feature][best.bin];
      n.left = left;
      n.right = right;
      n.gain = best.gain;
      node_bins[p.node] = best.bin;

      Pending lp{left, p.depth + 1, p.lower, p.upper, {}};
      Pending rp{right, p.depth + 1, p.lower, p.upper, {}};
      const int c = mono_.empty() ? 0 : mono_[best.feature];
      const double mid = (best.left_weight + best.right_weight) / 2.0;
      if (c > 0) {
        lp.upper = std::min(lp.upper, mid);
        rp.lower = std::max(rp.lower, mid);
      } else if (c < 0) {
        lp.lower = std::max(lp.lower, mid);
        rp.upper = std::min(rp.upper, mid);
      }
      for (auto r : p.rows) {
        (b_.at(best.feature, r) <= best.bin ? lp.rows : rp.rows).push_back(r);
      }
      stack.push_back(std::move(rp));
      stack.push_back(std::move(lp));
    }
    return tree;
  }

 private:
  double bounded_weight(double G, double H, double lower, double upper) const {
    double w = -G / (H + cfg_.l2_leaf_regularization);
    w = std::clamp(w, -cfg_.max_delta_step, cfg_.max_delta_step);
    return std::clamp(w, lower, upper);
  }

  SplitChoice find_split(const Pending& p, const std::vector<int>& features, double G, double H) {
    SplitChoice best;
    const double lambda = cfg_.l2_leaf_regularization;
    const double parent = G * G / (H + lambda);
    const std::size_t n = p.rows.size();
    for (int f : features) {
      const auto& cuts = b_.cuts[f];
      const std::size_t nb = cuts.size() + 1;
      std::fill_n(hg_, nb, 0.0);
      std::fill_n(hh_, nb, 0.0);
      std::fill_n(hc_, nb, 0u);
      const std::uint8_t* col = b_.bins.data() + static_cast<std::size_t>(f) * b_.rows;
      for (auto r : p.rows) {
        const std::uint8_t bin = col[r];
        hg_[bin] += g_[r];
        hh_[bin] += h_[r];
        ++hc_[bin];
      }
      const int c = mono_.empty() ? 0 : mono_[f];
      double GL = 0, HL = 0;
      std::size_t CL = 0;
      for (std::size_t bin = 0; bin + 1 < nb; ++bin) {
        GL += hg_[bin];
        HL += hh_[bin];
        CL += hc_[bin];
        if (CL < cfg_.min_samples_leaf) continue;
        if (n - CL < cfg_.min_samples_leaf) break;
        if (hc_[bin] == 0) continue;  // same partition as the previous cut
        const double GR = G - GL;
        const double HR = H - HL;
        const double gain = GL * GL / (HL + lambda) + GR * GR / (HR + lambda) - parent;
        if (!(gain > best.gain)) continue;
        const double wl = bounded_weight(GL, HL, p.lower, p.upper);
        const double wr = bounded_weight(GR, HR, p.lower, p.upper);
        if ((c > 0 && wl > wr) || (c < 0 && wl < wr)) continue;
        best = SplitChoice{f, static_cast<int>(bin), gain, wl, wr};
      }
    }
    return best;
  }

  const Binned& b_;
  const TrainConfig& cfg_;
  const std::vector<std::int8_t>& mono_;
  const std::vector<double>& g_;
  const std::vector<double>& h_;
  double hg_[256];
  double hh_[256];
  std::uint32_t hc_[256];
};

double route(const Tree& tree, const std::vector<int>& node_bins, const Binned& b, std::size_t row) {
  std::size_t i = 0;
  while (!tree.nodes[i].is_leaf()) {
    const TreeNode& n = tree.nodes[i];
    i = static_cast<std::size_t>(b.at(n.feature, row) <= node_bins[i] ? n.left : n.right);
  }
  return tree.nodes[i].value;
}

}  // namespace

TreeEnsemble train(const Dataset& data, const TrainConfig& config, std::vector<std::int8_t> monotone) {
  config.validate();
  if (data.rows() == 0) throw DegenerateData("empty training set");
  if (!monotone.empty() && monotone.size() != data.cols()) {
    throw DimensionMismatch("monotone vector has " + std::to_string(monotone.size()) +
                            " entries, expected " + std::to_string(data.cols()));
  }
  for (auto c : monotone) {
    if (c < -1 || c > 1) throw Error("monotone constraints must be -1, 0 or +1");
  }
  std::size_t npos = 0;
  for (int y : data.labels()) {
    if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
    npos += static_cast<std::size_t>(y);
  }
  const std::size_t nneg = data.rows() - npos;

  TreeEnsemble model;
  model.feature_dimension = data.cols();
  model.monotone = std::move(monotone);
  model.training_digest = data.digest();

  const double pos_weight =
      (config.balance_classes && npos > 0 && nneg > 0) ? static_cast<double>(nneg) / static_cast<double>(npos) : 1.0;
  const double wpos = pos_weight * static_cast<double>(npos);
  const double prior = std::clamp(wpos / (wpos + static_cast<double>(nneg)), 1e-6, 1.0 - 1e-6);
  model.base_score = logit(prior);
  if (npos == 0 || nneg == 0) return model;  // constant model at the prior

  const Binned binned = bin_dataset(data, config.histogram_bins);
  std::vector<int> usable;
  for (std::size_t c = 0; c < data.cols(); ++c) {
    if (!binned.cuts[c].empty()) usable.push_back(static_cast<int>(c));
  }
  if (usable.empty()) return model;

  std::mt19937_64 rng(config.seed);
  std::vector<double> margin(data.rows(), model.base_score);
  std::vector<double> grad(data.rows()), hess(data.rows());
  TreeBuilder builder(binned, config, model.monotone, grad, hess);
  std::vector<int> node_bins;
  const std::size_t ncols = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.col_subsample * static_cast<double>(usable.size()))));
  std::bernoulli_distribution keep_row(config.row_subsample);

  for (int t = 0; t < config.num_trees; ++t) {
    for (std::size_t r = 0; r < data.rows(); ++r) {
      const double w = data.label(r) == 1 ? pos_weight : 1.0;
      const GradHess gh = logistic_grad_hess(sigmoid(margin[r]), data.label(r));
      grad[r] = w * gh.grad;
      hess[r] = w * gh.hess;
    }
    std::vector<std::uint32_t> rows;
    rows.reserve(data.rows());
    for (std::size_t r = 0; r < data.rows(); ++r) {
      if (config.row_subsample >= 1.0 || keep_row(rng)) rows.push_back(static_cast<std::uint32_t>(r));
    }
    if (rows.empty()) rows.push_back(static_cast<std::uint32_t>(rng() % data.rows()));

    std::vector<int> features = usable;
    if (ncols < features.size()) {
      for (std::size_t i = 0; i < ncols; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, features.size() - 1);
        std::swap(features[i], features[pick(rng)]);
      }
      features.resize(ncols);
      std::sort(features.begin(), features.end());
    }

    Tree tree = builder.build(std::move(rows), features, node_bins);
    for (std::size_t r = 0; r < data.rows(); ++r) margin[r] += route(tree, node_bins, binned, r);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Text format

namespace {

template <typename T>
std::string fmt(T v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view s, const char* what) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw CorruptModel(std::string("bad ") + what + ": '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(const std::string& text) : text_(text) {}
  std::string_view next() {
    if (pos_ >= text_.size()) throw CorruptModel("unexpected end of model file (truncated?)");
    auto end = text_.find('\n', pos_);
    if (end == std::string::npos) end = text_.size();
    std::string_view line(text_.data() + pos_, end - pos_);
    pos_ = end + 1;
    ++line_no_;
    return line;
  }
  // "key value..." where value is the remainder of the line.
  std::string_view field(std::string_view key) {
    std::string_view line = next();
    if (line.substr(0, key.size()) != key ||
        (line.size() > key.size() && line[key.size()] != ' ')) {
      throw CorruptModel("line " + std::to_string(line_no_) + ": expected '" + std::string(key) + "'");
    }
    return line.size() > key.size() ? line.substr(key.size() + 1) : std::string_view{};
  }
  int line_no() const { return line_no_; }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
  int line_no_ = 0;
};

constexpr std::string_view kMagic = "peguard-gbdt";

}  // namespace

std::string model_to_text(const TreeEnsemble& m) {
  std::string out;
  out += std::string(kMagic) + " " + std::to_string(kModelFormatVersion) + "\n";
  out += "variant " + m.variant + "\n";
  out += "corpus_tag " + m.corpus_tag + "\n";
  out += "training_digest " + m.training_digest + "\n";
  out += "feature_dimension " + std::to_string(m.feature_dimension) + "\n";
  out += "base_score " + fmt(m.base_score) + "\n";
  if (m.monotone.empty()) {
    out += "monotone none\n";
  } else {
    out += "monotone ";
    for (auto c : m.monotone) out += c > 0 ? '+' : (c < 0 ? '-' : '0');
    out += '\n';
  }
  out += "trees " + std::to_string(m.trees.size()) + "\n";
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    const Tree& tree = m.trees[t];
    out += "tree " + std::to_string(t) + " " + std::to_string(tree.nodes.size()) + "\n";
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const TreeNode& n = tree.nodes[i];
      if (n.is_leaf()) {
        out += std::to_string(i) + " leaf " + fmt(n.value) + "\n";
      } else {
        out += std::to_string(i) + " split " + std::to_string(n.feature) + " " + fmt(n.threshold) + " " +
               std::to_string(n.left) + " " + std::to_string(n.right) + " " + (n.default_left ? "L" : "R") +
               " " + fmt(n.gain) + "\n";
      }
    }
  }
  out += "end\n";
  return out;
}

TreeEnsemble model_from_text(const std::string& text) {
  LineReader in(text);
  TreeEnsemble m;
  {
    auto head = split_ws(in.next());
    if (head.size() != 2 || head[0] != kMagic) throw CorruptModel("not a peguard model file");
    const int version = parse_number<int>(head[1], "format version");
    if (version != kModelFormatVersion) {
      throw CorruptModel("unsupported model format version " + std::to_string(version));
    }
  }
  m.variant = std::string(in.field("variant"));
  m.corpus_tag = std::string(in.field("corpus_tag"));
  m.training_digest = std::string(in.field("training_digest"));
  m.feature_dimension = parse_number<std::size_t>(in.field("feature_dimension"), "feature_dimension");
  m.base_score = parse_number<double>(in.field("base_score"), "base_score");
  if (!std::isfinite(m.base_score)) throw CorruptModel("non-finite base_score");
  const std::string_view mono = in.field("monotone");
  if (mono != "none") {
    if (mono.size() != m.feature_dimension) throw CorruptModel("monotone vector length mismatch");
    for (char c : mono) {
      if (c == '+') m.monotone.push_back(1);
      else if (c == '-') m.monotone.push_back(-1);
      else if (c == '0') m.monotone.push_back(0);
      else throw CorruptModel("bad monotone flag");
    }
  }
  const std::size_t ntrees = parse_number<std::size_t>(in.field("trees"), "tree count");
  if (ntrees > text.size()) throw CorruptModel("tree count exceeds file size");
  m.trees.resize(ntrees);
  for (std::size_t t = 0; t < ntrees; ++t) {
    auto head = split_ws(in.next());
    if (head.size() != 3 || head[0] != "tree" || parse_number<std::size_t>(head[1], "tree index") != t) {
      throw CorruptModel("line " + std::to_string(in.line_no()) + ": expected tree header");
    }
    const std::size_t nn = parse_number<std::size_t>(head[2], "node count");
    if (nn == 0 || nn > text.size()) throw CorruptModel("bad node count");
    auto& nodes = m.trees[t].nodes;
    nodes.resize(nn);
    for (std::size_t i = 0; i < nn; ++i) {
      auto tok = split_ws(in.next());
      const std::string where = "line " + std::to_string(in.line_no()) + ": ";
      if (tok.size() < 2 || parse_number<std::size_t>(tok[0], "node id") != i) {
        throw CorruptModel(where + "bad node id");
      }
      TreeNode& n = nodes[i];
      if (tok[1] == "leaf" && tok.size() == 3) {
        n.value = parse_number<double>(tok[2], "leaf value");
        if (!std::isfinite(n.value)) throw CorruptModel(where + "non-finite leaf");
      } else if (tok[1] == "split" && tok.size() == 8) {
        n.feature = parse_number<int>(tok[2], "feature index");
        n.threshold = parse_number<float>(tok[3], "threshold");
        n.left = parse_number<int>(tok[4], "left child");
        n.right = parse_number<int>(tok[5], "right child");
        if (tok[6] != "L" && tok[6] != "R") throw CorruptModel(where + "bad default direction");
        n.default_left = tok[6] == "L";
        n.gain = parse_number<double>(tok[7], "gain");
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= m.feature_dimension) {
          throw CorruptModel(where + "feature index out of range");
        }
        // Children must come after their parent, which also rules out cycles.
        auto bad_child = [&](int c) { return c <= static_cast<int>(i) || static_cast<std::size_t>(c) >= nn; };
        if (bad_child(n.left) || bad_child(n.right) || n.left == n.right) {
          throw CorruptModel(where + "dangling child index");
        }
      } else {
        throw CorruptModel(where + "bad node record");
      }
    }
  }
  if (split_ws(in.next()) != std::vector<std::string_view>{"end"}) throw CorruptModel("missing end marker");
  return m;
}

void save_model(const TreeEnsemble& model, const std::filesystem::path& path) {
  write_file(path, as_bytes(model_to_text(model)));
}

TreeEnsemble load_model(const std::filesystem::path& path) {
  Bytes raw;
  try {
    raw = read_file(path);
  } catch (const Error& e) {
    throw CorruptModel(e.what());
  }
  return model_from_text(std::string(raw.begin(), raw.end()));
}

std::string model_digest(const TreeEnsemble& model) { return sha256_hex(as_bytes(model_to_text(model))); }

}  // namespace peguard

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

// Gradient-boosted decision trees on logistic loss, with histogram-binned
// split finding and optional per-feature monotone constraints.
//
// Monotone constraints are enforced two ways: a split on a constrained
// feature is rejected when its (bounded) child weights are ordered the wrong
// way, and every accepted split narrows the [lower, upper] weight bounds of
// its subtrees around the midpoint of the two child weights. Leaf weights are
// clamped into those bounds, so for a +1 feature every leaf reachable by
// larger values is >= every leaf reachable by smaller values.
//
// Feature values are compared in single precision: a row goes left iff
// float(x) < threshold. There are no missing values; default_left is kept in
// the node for the file format and is always true.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace peguard {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  float threshold = 0.0f;
  int left = -1;
  int right = -1;
  bool default_left = true;
  double value = 0.0;  // leaf output (already scaled by the learning rate)
  double gain = 0.0;   // split gain, internal nodes only

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  int depth() const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct TreeEnsemble {
  std::vector<Tree> trees;
  double base_score = 0.0;
  /// Per-feature constraint in {-1, 0, +1}; empty means unconstrained.
  std::vector<std::int8_t> monotone;
  std::size_t feature_dimension = 0;
  std::string variant;
  std::string corpus_tag;
  std::string training_digest;

  /// base_score + sum of tree outputs. Throws DimensionMismatch.
  double raw_score(std::span<const double> x) const;
  /// sigmoid(raw_score(x)).
  double predict(std::span<const double> x) const;
  friend bool operator==(const TreeEnsemble&, const TreeEnsemble&) = default;
};

struct TrainConfig {
  int num_trees = 200;
  int max_depth = 6;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 20;
  std::size_t histogram_bins = 256;
  double l2_leaf_regularization = 1.0;
  double row_subsample = 1.0;
  double col_subsample = 1.0;
  /// Bound on |leaf weight| before learning-rate scaling.
  double max_delta_step = 10.0;
  /// Weight positives by N_neg / N_pos.
  bool balance_classes = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Dense row-major training matrix.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t cols) : cols_(cols) {}

  void add_row(std::span<const double> values, int label);
  void add_row(std::span<const float> values, int label);
  void reserve(std::size_t rows) { values_.reserve(rows * cols_); labels_.reserve(rows); }

  std::size_t rows() const { return labels_.size(); }
  std::size_t cols() const { return cols_; }
  float at(std::size_t row, std::size_t col) const { return values_[row * cols_ + col]; }
  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(values_).subspan(r * cols_, cols_);
  }
  int label(std::size_t row) const { return labels_[row]; }
  const std::vector<int>& labels() const { return labels_; }
  /// SHA-256 over values and labels.
  std::string digest() const;

 private:
  std::size_t cols_ = 0;
  std::vector<float> values_;
  std::vector<int> labels_;
};

/// Fits an ensemble. A single-class dataset yields a constant model at the
/// clamped prior log-odds.
TreeEnsemble train(const Dataset& data, const TrainConfig& config,
                   std::vector<std::int8_t> monotone = {});

double sigmoid(double z);
double logit(double p);
/// Logistic loss of margin z against label y.
double logistic_loss(double z, double y);

struct GradHess {
  double grad = 0.0;
  double hess = 0.0;
};
/// g = p - y, h = p (1 - p).
GradHess logistic_grad_hess(double p, double y);

struct GradientReport {
  std::size_t points = 0;
  double max_grad_error = 0.0;
  double max_hess_error = 0.0;
};
/// Compares logistic_grad_hess against central finite differences of
/// logistic_loss at random (p, y) points.
GradientReport verify_gradients(std::size_t points = 100, std::uint64_t seed = 7);

/// Area under the ROC curve by the rank-sum statistic (ties averaged).
double roc_auc(std::span<const double> scores, std::span<const int> labels);

inline constexpr int kModelFormatVersion = 1;

std::string model_to_text(const TreeEnsemble& model);
/// Throws CorruptModel.
TreeEnsemble model_from_text(const std::string& text);
void save_model(const TreeEnsemble& model, const std::filesystem::path& path);
TreeEnsemble load_model(const std::filesystem::path& path);
/// SHA-256 of model_to_text.
std::string model_digest(const TreeEnsemble& model);

}  // namespace peguard

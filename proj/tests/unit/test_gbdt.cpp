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

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "peguard/error.hpp"
#include "peguard/gbdt.hpp"
#include "peguard/synth.hpp"

namespace peguard {
namespace {

// Label depends on x0 + x1 > 1 with a little noise in x2..
Dataset toy(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  synth::Rng rng(seed);
  Dataset d(cols);
  std::vector<double> x(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (auto& v : x) v = rng.uniform();
    d.add_row(x, x[0] + x[1] + 0.1 * x[2] > 1.05 ? 1 : 0);
  }
  return d;
}

std::vector<double> row_of(const Dataset& d, std::size_t r) {
  const auto row = d.row(r);
  return {row.begin(), row.end()};
}

TEST(GbdtLoss, GradientsMatchFiniteDifferences) {
  for (double m : {-8.0, -2.0, -0.3, 0.0, 0.7, 3.0, 9.0}) {
    for (double y : {0.0, 1.0}) {
      const auto fd = oracle::logistic_fd(m, y, 1e-4);
      const auto gh = logistic_grad_hess(sigmoid(m), y);
      EXPECT_NEAR(gh.grad, fd.first, 1e-7) << m << " " << y;
      EXPECT_NEAR(gh.hess, fd.second, 1e-6) << m << " " << y;
    }
  }
  const auto report = verify_gradients(200, 3);
  EXPECT_EQ(report.points, 200u);
  EXPECT_LT(report.max_grad_error, 1e-5);
  EXPECT_LT(report.max_hess_error, 1e-4);
}

TEST(GbdtLoss, SigmoidLogitStable) {
  EXPECT_NEAR(logit(sigmoid(2.5)), 2.5, 1e-12);
  EXPECT_EQ(sigmoid(-1000), 0.0);
  EXPECT_EQ(sigmoid(1000), 1.0);
  EXPECT_TRUE(std::isfinite(logistic_loss(-800, 1)));
  EXPECT_TRUE(std::isfinite(logistic_loss(800, 0)));
  EXPECT_NEAR(logistic_loss(0, 1), std::log(2.0), 1e-12);
}

TEST(GbdtAuc, MatchesPairwiseOracle) {
  synth::Rng rng(8);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = rng.between(2, 300);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::floor(rng.uniform() * 20) / 20;  // plenty of ties
      y[i] = static_cast<int>(i % 2);
    }
    EXPECT_NEAR(roc_auc(s, y), oracle::auc_pairwise(s, y), 1e-12);
  }
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DegenerateData);
  EXPECT_THROW(roc_auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), DimensionMismatch);
}

TEST(GbdtSplit, RootSplitIsTheExactBest) {
  synth::Rng rng(12);
  for (int round = 0; round < 40; ++round) {
    const std::size_t n = rng.between(20, 200);
    Dataset d(1);
    std::vector<double> xs(n);
    std::vector<int> ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = std::round(rng.uniform() * 1e4) / 16.0;  // exact in float
      ys[i] = rng.chance(0.2 + 0.6 * (xs[i] / 625.0)) ? 1 : 0;
      d.add_row(std::vector<double>{xs[i]}, ys[i]);
    }
    TrainConfig c;
    c.num_trees = 1;
    c.max_depth = 1;
    c.learning_rate = 1.0;
    c.min_samples_leaf = rng.between(1, 5);
    c.balance_classes = false;
    c.max_delta_step = 1e9;
    std::size_t pos = 0;
    for (int y : ys) pos += static_cast<std::size_t>(y);
    if (pos == 0 || pos == n) continue;
    const double p = static_cast<double>(pos) / static_cast<double>(n);
    std::vector<double> g(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto gh = logistic_grad_hess(p, ys[i]);
      g[i] = gh.grad;
      h[i] = gh.hess;
    }
    const auto want = oracle::best_split_1d(xs, g, h, c.l2_leaf_regularization, c.min_samples_leaf);
    const auto model = train(d, c);
    ASSERT_EQ(model.trees.size(), 1u);
    const auto& root = model.trees[0].nodes[0];
    if (want.gain <= 0) {
      EXPECT_TRUE(root.is_leaf());
      continue;
    }
    ASSERT_FALSE(root.is_leaf()) << round;
    EXPECT_GT(root.threshold, want.lo) << round;
    EXPECT_LE(root.threshold, want.hi) << round;
    EXPECT_NEAR(root.gain, want.gain, 1e-9 * std::max(1.0, want.gain));
  }
}

TEST(GbdtTrain, LearnsAndPredictsConsistently) {
  const Dataset d = toy(2000, 5, 1);
  TrainConfig c;
  c.num_trees = 60;
  c.max_depth = 4;
  c.min_samples_leaf = 5;
  const auto model = train(d, c);
  std::vector<double> scores;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    const auto x = row_of(d, r);
    const double s = model.raw_score(x);
    EXPECT_NEAR(s, oracle::raw_score(model, x), 1e-9);
    scores.push_back(s);
  }
  EXPECT_GT(roc_auc(scores, d.labels()), 0.98);

  const Dataset test = toy(1000, 5, 2);
  std::vector<double> ts;
  for (std::size_t r = 0; r < test.rows(); ++r) ts.push_back(model.predict(row_of(test, r)));
  EXPECT_GT(roc_auc(ts, test.labels()), 0.95);
  for (double p : ts) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(GbdtTrain, DeterministicForSeed) {
  const Dataset d = toy(500, 6, 4);
  TrainConfig c;
  c.num_trees = 20;
  c.row_subsample = 0.7;
  c.col_subsample = 0.5;
  c.seed = 9;
  const auto a = train(d, c);
  EXPECT_EQ(a, train(d, c));
  EXPECT_EQ(model_digest(a), model_digest(train(d, c)));
  c.seed = 10;
  EXPECT_NE(model_digest(a), model_digest(train(d, c)));
}

TEST(GbdtTrain, MonotoneConstraintHolds) {
  synth::Rng rng(5);
  Dataset d(3);
  for (int i = 0; i < 3000; ++i) {
    std::vector<double> x{rng.uniform(), rng.uniform(), rng.uniform()};
    // non-monotone signal in feature 0 that the constraint must flatten
    const double signal = std::sin(x[0] * 12) + x[1];
    d.add_row(x, signal + 0.3 * rng.uniform() > 0.8 ? 1 : 0);
  }
  TrainConfig c;
  c.num_trees = 80;
  c.min_samples_leaf = 5;
  const auto model = train(d, c, {1, 0, 0});
  const auto unconstrained = train(d, c);
  bool unconstrained_violates = false;
  for (int probe = 0; probe < 200; ++probe) {
    std::vector<double> x{0.0, rng.uniform(), rng.uniform()};
    double prev = -1e300, prev_u = -1e300;
    for (int step = 0; step <= 100; ++step) {
      x[0] = step / 100.0;
      const double s = model.raw_score(x);
      ASSERT_GE(s, prev - 1e-12) << "probe " << probe << " step " << step;
      prev = s;
      const double u = unconstrained.raw_score(x);
      unconstrained_violates = unconstrained_violates || u < prev_u - 1e-9;
      prev_u = u;
    }
  }
  EXPECT_TRUE(unconstrained_violates);

  const auto decreasing = train(d, c, {-1, 0, 0});
  std::vector<double> x{0.0, 0.5, 0.5};
  double prev = 1e300;
  for (int step = 0; step <= 100; ++step) {
    x[0] = step / 100.0;
    const double s = decreasing.raw_score(x);
    ASSERT_LE(s, prev + 1e-12);
    prev = s;
  }
}

TEST(GbdtTrain, DegenerateInputs) {
  Dataset one_class(2);
  for (int i = 0; i < 10; ++i) one_class.add_row(std::vector<double>{double(i), 1.0}, 1);
  const auto constant = train(one_class, TrainConfig{});
  EXPECT_TRUE(constant.trees.empty());
  EXPECT_GT(constant.predict(std::vector<double>{0, 0}), 0.99);

  EXPECT_THROW(train(Dataset(3), TrainConfig{}), DegenerateData);
  EXPECT_THROW(train(toy(10, 2, 1), TrainConfig{}, {1}), DimensionMismatch);
  EXPECT_THROW(train(toy(10, 2, 1), TrainConfig{}, {2, 0}), Error);
  TrainConfig bad;
  bad.histogram_bins = 1000;
  EXPECT_THROW(train(toy(10, 2, 1), bad), Error);

  Dataset d(2);
  EXPECT_THROW(d.add_row(std::vector<double>{1.0}, 0), DimensionMismatch);
  const auto m = train(toy(100, 2, 1), TrainConfig{});
  EXPECT_THROW(m.raw_score(std::vector<double>{1.0, 2.0, 3.0}), DimensionMismatch);
}

TEST(GbdtFormat, TextRoundTripIsExact) {
  TrainConfig c;
  c.num_trees = 15;
  auto model = train(toy(400, 4, 3), c, {1, 0, -1, 0});
  model.variant = "v1";
  model.corpus_tag = "2017";
  const std::string text = model_to_text(model);
  const auto back = model_from_text(text);
  EXPECT_EQ(back, model);
  EXPECT_EQ(model_to_text(back), text);

  const auto dir = std::filesystem::temp_directory_path() / "peguard_gbdt_test";
  std::filesystem::create_directories(dir);
  save_model(model, dir / "m.model");
  EXPECT_EQ(load_model(dir / "m.model"), model);
  std::filesystem::remove_all(dir);
}

TEST(GbdtFormat, CorruptionIsDetected) {
  TrainConfig c;
  c.num_trees = 5;
  const std::string text = model_to_text(train(toy(300, 3, 6), c));
  EXPECT_THROW(model_from_text(""), CorruptModel);
  EXPECT_THROW(model_from_text("hello world\n"), CorruptModel);
  EXPECT_THROW(model_from_text(text.substr(0, text.size() / 2)), CorruptModel);
  EXPECT_THROW(model_from_text(text.substr(0, text.size() - 5)), CorruptModel);
  synth::Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    std::string t = text;
    t[rng.between(0, t.size() - 1)] = static_cast<char>(rng.between(32, 126));
    try {
      const auto m = model_from_text(t);
      // a flip that still parses must give a usable model
      std::vector<double> x(m.feature_dimension, 0.5);
      EXPECT_TRUE(std::isfinite(m.raw_score(x)));
    } catch (const CorruptModel&) {
    }
  }
  EXPECT_THROW(load_model("/nonexistent/peguard.model"), Error);
}

}  // namespace
}  // namespace peguard

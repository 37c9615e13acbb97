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

#include <benchmark/benchmark.h>

#include <random>

#include "peguard/gbdt.hpp"
#include "peguard/rules.hpp"
#include "peguard/synth.hpp"

namespace {

using namespace peguard;

Dataset gaussians(std::size_t rows, std::size_t cols) {
  std::mt19937_64 eng(1);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset d(cols);
  std::vector<double> x(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const int label = static_cast<int>(r % 2);
    for (auto& v : x) v = noise(eng) + label;
    d.add_row(std::span<const double>(x), label);
  }
  return d;
}

void BM_Train(benchmark::State& state) {
  const Dataset d = gaussians(static_cast<std::size_t>(state.range(0)), 10);
  TrainConfig c;
  c.num_trees = 50;
  for (auto _ : state) benchmark::DoNotOptimize(train(d, c));
}
BENCHMARK(BM_Train)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const Dataset d = gaussians(2000, 10);
  const TreeEnsemble model = train(d, TrainConfig{});
  std::vector<double> x(10, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x));
}
BENCHMARK(BM_Predict);

void BM_RuleScan(benchmark::State& state) {
  const RuleSet rules(parse_rules(synth::desk_rule_text()));
  synth::Rng rng(9);
  const Bytes b = synth::random_bytes(rng, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(rules.scan(b));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * b.size()));
}
BENCHMARK(BM_RuleScan)->Range(4 << 10, 2 << 20);

}  // namespace

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

#include "peguard/desk.hpp"
#include "peguard/pipeline.hpp"
#include "peguard/stateful.hpp"
#include "peguard/synth.hpp"

namespace {

using namespace peguard;

// Small desk so the fixture trains in a few seconds.
const DeskArtifacts& artifacts() {
  static const DeskArtifacts a = [] {
    DeskConfig c;
    c.benign = c.malware = 200;
    c.calibration_benign = 300;
    c.model_max_fpr = 0.005;
    c.ember_training.num_trees = 40;
    c.skipgram_training.num_trees = 30;
    return train_desk_pipeline(make_desk_split(c), c);
  }();
  return a;
}

Bytes input(std::size_t size) {
  synth::Rng rng(17);
  synth::FixtureSpec spec;
  spec.sections = {{".text", synth::random_bytes(rng, size / 2), kScnCntCode | kScnMemExecute | kScnMemRead, {}},
                   {".data", Bytes(size / 2, 0x41), kScnCntInitializedData | kScnMemRead, {}}};
  return synth::build_pe(spec);
}

void BM_Classify(benchmark::State& state) {
  const auto& a = artifacts();
  const Pipeline p(a.config, a.models, a.rules);
  const Bytes b = input(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(p.classify(b, {false, std::nullopt}));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * b.size()));
}
BENCHMARK(BM_Classify)->Arg(64 << 10)->Arg(1 << 20)->Arg(2000 << 10)->Unit(benchmark::kMillisecond);

void BM_HistoryNearest(benchmark::State& state) {
  HistoryBuffer h;
  synth::Rng rng(2);
  for (int i = 0; i < state.range(0); ++i) h.insert(fingerprint(synth::random_bytes(rng, 4096)));
  const Fingerprint q = fingerprint(synth::random_bytes(rng, 4096));
  for (auto _ : state) benchmark::DoNotOptimize(h.nearest(q));
}
BENCHMARK(BM_HistoryNearest)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();

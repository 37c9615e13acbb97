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

#include "peguard/features.hpp"
#include "peguard/pe.hpp"
#include "peguard/skipgram.hpp"
#include "peguard/synth.hpp"

namespace {

using namespace peguard;

Bytes sample(std::size_t overlay) {
  synth::FixtureOptions o;
  o.num_sections = 4;
  o.imports = true;
  o.exports = true;
  o.overlay_size = overlay;
  return synth::make_fixture(11, o);
}

void BM_ParsePe(benchmark::State& state) {
  const Bytes b = sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(parse_pe(b));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * b.size()));
}
BENCHMARK(BM_ParsePe)->Arg(0)->Arg(1 << 20);

void BM_ByteEntropyHistogram(benchmark::State& state) {
  synth::Rng rng(3);
  const Bytes b = synth::random_bytes(rng, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(byte_entropy_histogram(b));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * b.size()));
}
BENCHMARK(BM_ByteEntropyHistogram)->Range(4 << 10, 2 << 20);

void BM_ExtractFeatures(benchmark::State& state) {
  const Bytes b = sample(256 << 10);
  const auto variant = *variant_by_name(ember_variant_names().at(static_cast<std::size_t>(state.range(0))));
  state.SetLabel(variant.name);
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(b, variant));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * b.size()));
}
BENCHMARK(BM_ExtractFeatures)->DenseRange(0, 3);

void BM_SkipgramVector(benchmark::State& state) {
  synth::Rng rng(5);
  const Bytes b = synth::random_bytes(rng, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(skipgram_vector_bounded(b));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * b.size()));
}
BENCHMARK(BM_SkipgramVector)->Range(4 << 10, 2 << 20);

}  // namespace

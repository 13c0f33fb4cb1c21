/* Copyright 2026 The trailcache Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Micro-benchmarks for the hot paths: candidate retrieval, evaluator scoring,
// student decoding, one simulated user and the JSD kernel. Models are
// untrained; their cost does not depend on the weights.

#include <benchmark/benchmark.h>

#include <vector>

#include "trailcache/experiment.hpp"

namespace tc = trailcache;

namespace {

struct Setup {
  tc::ExperimentConfig cfg;
  tc::SyntheticTeacher teacher;
  tc::City city = tc::build_city(cfg);
  tc::CacheIndex cache = tc::build_cache(cfg, teacher, city);
  tc::EvaluatorModel evaluator{1};
  tc::StudentDecoder decoder{2};
  std::vector<tc::SimulationContext> users =
      tc::population(cfg, tc::Stage::kQueryPopulation, 256, city);
};

const Setup& setup() {
  static const Setup s;
  return s;
}

void BM_RetrieveCandidates(benchmark::State& state) {
  const auto& s = setup();
  tc::NodeId at = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.cache.retrieve_candidates(at, 8, 1));
    at = (at + 97) % s.cache.node_count();
  }
  state.counters["nodes"] = static_cast<double>(s.cache.node_count());
}
BENCHMARK(BM_RetrieveCandidates);

void BM_MatchContext(benchmark::State& state) {
  const auto& s = setup();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.cache.match_context(s.users[i++ % s.users.size()], 0.85));
  }
}
BENCHMARK(BM_MatchContext);

void BM_EvaluatorScore(benchmark::State& state) {
  const auto& s = setup();
  const auto chain = s.cache.chain(0).steps;
  const auto features = s.cache.features(0);
  const auto depth = static_cast<std::size_t>(state.range(0));
  const std::span<const tc::LatentStep> prefix(chain.data(), std::min(depth, chain.size() - 1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(s.evaluator.score(features, prefix, chain.back()));
  }
}
BENCHMARK(BM_EvaluatorScore)->Arg(1)->Arg(4)->Arg(8);

void BM_DecoderDecode(benchmark::State& state) {
  const auto& s = setup();
  std::size_t i = 0;
  for (auto _ : state) {
    const auto chain = s.cache.chain(static_cast<tc::ChainId>(i++ % s.cache.entry_count()));
    benchmark::DoNotOptimize(s.decoder.decode(chain.steps));
  }
}
BENCHMARK(BM_DecoderDecode);

void BM_SimulateUser(benchmark::State& state) {
  const auto& s = setup();
  const tc::EvaluatorScorer scorer(s.evaluator);
  const tc::Models models{&s.teacher, &scorer, &s.decoder, &s.city, false};
  tc::InferenceConfig cfg = s.cfg.inference;
  cfg.exploration_rate = static_cast<double>(state.range(0)) / 100.0;
  std::size_t i = 0;
  for (auto _ : state) {
    // Read-only snapshot path: the delta is discarded so the cache stays fixed.
    benchmark::DoNotOptimize(
        tc::simulate_user(s.users[i++ % s.users.size()], s.cache, models, cfg));
  }
}
BENCHMARK(BM_SimulateUser)->Arg(0)->Arg(50)->Arg(100);

void BM_Jsd(benchmark::State& state) {
  const auto bins = static_cast<std::size_t>(state.range(0));
  tc::Histogram p, q;
  for (std::size_t i = 0; i <= bins; ++i) {
    p.edges.push_back(static_cast<double>(i));
    q.edges.push_back(static_cast<double>(i));
  }
  for (std::size_t i = 0; i < bins; ++i) {
    p.mass.push_back(1.0 + static_cast<double>(i % 7));
    q.mass.push_back(1.0 + static_cast<double>(i % 5));
  }
  for (auto _ : state) benchmark::DoNotOptimize(tc::jsd(p, q));
}
BENCHMARK(BM_Jsd)->Arg(24)->Arg(900);

}  // namespace

BENCHMARK_MAIN();

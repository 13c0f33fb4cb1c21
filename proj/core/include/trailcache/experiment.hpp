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


#pragma once

// End-to-end experiment plumbing shared by the command-line tool, the
// acceptance suite and the benchmarks. Every stage derives its seed from the
// experiment seed and a fixed stage tag, so any stage can be rebuilt alone.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trailcache/cache.hpp"
#include "trailcache/decoder.hpp"
#include "trailcache/evaluator.hpp"
#include "trailcache/geo.hpp"
#include "trailcache/inference.hpp"
#include "trailcache/metrics.hpp"
#include "trailcache/teacher.hpp"

namespace trailcache {

struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::size_t pois_per_category = 60;
  std::size_t cache_users = 500;
  std::size_t query_users = 2000;
  std::size_t reference_users = 2000;

  std::size_t evaluator_examples = 4000;
  int evaluator_hidden = EvaluatorModel::kDefaultHidden;
  EvaluatorTrainOptions evaluator{100, 0.5, 32, 0};

  std::size_t decoder_examples = 8000;
  std::size_t decoder_heldout = 500;
  int decoder_hidden = StudentDecoder::kDefaultHidden;
  DecoderTrainOptions decoder{40, 0.1, 0.05, 2, 0, 0.02};

  InferenceConfig inference;
  std::size_t batch_size = 8;

  std::size_t archetypes = 20;
  std::size_t samples_per_archetype = 5;

  std::optional<std::filesystem::path> policy_path;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Fields missing from `j` keep their values in `base`.
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_hash(const ExperimentConfig& cfg);

// Named stages; tags keep their seeds apart.
enum class Stage : std::uint64_t {
  kCity = 1,
  kCachePopulation,
  kCacheChains,
  kQueryPopulation,
  kReferencePopulation,
  kReferenceChains,
  kEvaluatorLabels,
  kEvaluatorInit,
  kDecoderPopulation,
  kDecoderChains,
  kDecoderHeldoutPopulation,
  kDecoderInit,
  kBaseline,
  kGenerateAll,
};
std::uint64_t stage_seed(const ExperimentConfig& cfg, Stage stage);

TeacherPolicy load_policy(const ExperimentConfig& cfg);
City build_city(const ExperimentConfig& cfg);
std::vector<SimulationContext> population(const ExperimentConfig& cfg, Stage stage,
                                          std::size_t n, const City& city);

CacheIndex build_cache(const ExperimentConfig& cfg, const SyntheticTeacher& teacher,
                       const City& city);
CacheIndex build_cache(const ExperimentConfig& cfg, const SyntheticTeacher& teacher,
                       std::span<const SimulationContext> users);

// Teacher rollouts for a population, with tokens materialized to places.
struct TeacherRollouts {
  std::vector<GeneratedChain> chains;
  std::vector<Trajectory> trajectories;
};
TeacherRollouts teacher_rollouts(std::span<const SimulationContext> users,
                                 std::uint64_t seed, const SyntheticTeacher& teacher,
                                 const City& city, const GravityParams& gravity);

std::vector<DistillationExample> distillation_corpus(
    std::span<const GeneratedChain> chains);

struct TrainedEvaluator {
  EvaluatorModel model;
  EvaluatorTrainingReport report;
};
TrainedEvaluator train_evaluator(const ExperimentConfig& cfg, const CacheIndex& cache,
                                 const SyntheticTeacher& teacher);

struct TrainedDecoder {
  StudentDecoder model;
  DecoderTrainingReport report;
  DecoderEvaluation heldout;
};
// `lambda` overrides the configured law weight when given.
TrainedDecoder train_decoder(const ExperimentConfig& cfg, const SyntheticTeacher& teacher,
                             const City& city, std::optional<double> lambda = {});
std::vector<DistillationExample> decoder_heldout(const ExperimentConfig& cfg,
                                                 const SyntheticTeacher& teacher,
                                                 const City& city);

// Every user pays for a full backend rollout; no cache.
BatchResult generate_all(std::span<const SimulationContext> users,
                         const ExperimentConfig& cfg, const ReasoningBackend& teacher,
                         const City& city);

}  // namespace trailcache

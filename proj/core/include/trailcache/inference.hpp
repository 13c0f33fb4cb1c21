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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trailcache/cache.hpp"
#include "trailcache/decoder.hpp"
#include "trailcache/domain.hpp"
#include "trailcache/evaluator.hpp"
#include "trailcache/geo.hpp"
#include "trailcache/metrics.hpp"
#include "trailcache/teacher.hpp"

namespace trailcache {

// Which embedding seeds the candidate search at a branch point t.
//   kBranchNode:   the node before t (candidates that could follow it)
//   kReplacedStep: step t itself (alternatives to the step being replaced)
enum class BranchQuery : std::uint8_t { kBranchNode, kReplacedStep };
// "branch-node" / "replaced-step"
std::string_view branch_query_name(BranchQuery q);
BranchQuery branch_query_from_name(std::string_view name);

struct InferenceConfig {
  BranchQuery branch_query = BranchQuery::kReplacedStep;
  double exploration_rate = 0.5;
  double context_threshold = 0.85;
  std::size_t candidate_k = 8;
  double score_threshold = 0.6;
  int min_rounds = 1;
  int max_rounds = 3;
  int depth_window = 1;
  std::uint64_t global_seed = 0;
  // Users simulated against one cache snapshot before their writes are
  // committed. Fixed independently of the worker count so that results do
  // not depend on batch size.
  std::size_t commit_window = 8;
  BackendCostModel cost;
  GravityParams gravity;
};

void validate(const InferenceConfig& cfg);

// Scores a candidate next step given the context and the steps before it.
class BranchScorer {
 public:
  virtual ~BranchScorer() = default;
  virtual double score(const ContextFeatures& context,
                       std::span<const LatentStep> prefix,
                       const LatentStep& candidate) const = 0;
};

class EvaluatorScorer : public BranchScorer {
 public:
  explicit EvaluatorScorer(const EvaluatorModel& model) : model_(model) {}
  double score(const ContextFeatures& context, std::span<const LatentStep> prefix,
               const LatentStep& candidate) const override {
    return model_.score(context, prefix, candidate);
  }

 private:
  const EvaluatorModel& model_;
};

// (1 + cos(last prefix step, candidate)) / 2, no learned parameters.
class RawCosineScorer : public BranchScorer {
 public:
  double score(const ContextFeatures& context, std::span<const LatentStep> prefix,
               const LatentStep& candidate) const override;
};

// Uniform scores that depend only on the seed and the inputs, so runs stay
// reproducible under any scheduling.
class RandomScorer : public BranchScorer {
 public:
  explicit RandomScorer(std::uint64_t seed) : seed_(seed) {}
  double score(const ContextFeatures& context, std::span<const LatentStep> prefix,
               const LatentStep& candidate) const override;

 private:
  std::uint64_t seed_;
};

class ConstantScorer : public BranchScorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double score(const ContextFeatures&, std::span<const LatentStep>,
               const LatentStep&) const override {
    return value_;
  }

 private:
  double value_;
};

// Per-step argmax decoding of the latent layout. Stands in for decoding with
// the reasoning backend itself, so each use is charged as backend steps.
class ReferenceDecoder : public ChainDecoder {
 public:
  TokenSequence decode(std::span<const LatentStep> chain) const override;
};

struct Models {
  const ReasoningBackend* backend = nullptr;
  const BranchScorer* scorer = nullptr;
  const ChainDecoder* decoder = nullptr;
  const City* city = nullptr;
  // True when `decoder` itself is the reference decoder (ablation), which
  // charges backend steps for every decode.
  bool decoder_is_backend = false;
};

enum class Repair : std::uint8_t { kNone, kRetried, kRegenerated };
std::string_view repair_name(Repair r);

struct SplicePoint {
  int depth = 0;
  NodeId node_id = 0;  // donor node
  bool operator==(const SplicePoint&) const = default;
};

struct StrategyOutcome {
  Strategy strategy = Strategy::kGenerated;
  ReasoningChain chain;
  std::vector<SplicePoint> splice_points;
  long long backend_steps_charged = 0;
  std::optional<ChainId> matched_chain;
  bool pre_repair_monotone = true;
  Repair repair = Repair::kNone;
  bool reference_decoded = false;
  int rounds = 0;
  int fallbacks = 0;  // rounds that fell back to the teacher
};

// Cache writes produced by one user, applied later by commit().
struct ParentRef {
  bool in_delta = false;
  std::uint64_t index = 0;  // NodeId, or index into CacheDelta::nodes
  bool operator==(const ParentRef&) const = default;
};

struct DeltaNode {
  ParentRef parent;
  LatentStep step;
  std::optional<NodeId> origin;
};

struct NewChain {
  SimulationContext context;
  std::vector<LatentStep> steps;
  std::uint64_t teacher_seed = 0;
};

struct CacheDelta {
  std::optional<NewChain> chain;
  std::vector<DeltaNode> nodes;
  bool empty() const { return !chain && nodes.empty(); }
};

void commit(CacheIndex& cache, const CacheDelta& delta);

struct UserResult {
  Trajectory trajectory;
  StrategyOutcome outcome;
  CacheDelta delta;
  TokenSequence tokens;
  EfficiencyRecord record;
};

std::uint64_t user_seed(std::uint64_t global_seed, const std::string& user_id);

// Reads `snapshot` only. The returned delta carries the cache writes.
UserResult simulate_user(const SimulationContext& ctx, const CacheIndex& snapshot,
                         const Models& models, const InferenceConfig& cfg);

// Convenience wrapper that commits the delta immediately.
UserResult simulate_user(const SimulationContext& ctx, CacheIndex& cache,
                         const Models& models, const InferenceConfig& cfg);

struct ExploreResult {
  std::vector<LatentStep> steps;
  std::vector<StepSource> provenance;
  std::vector<SplicePoint> splice_points;
  CacheDelta delta;
  long long charged = 0;
  int rounds = 0;
  int fallbacks = 0;
};

ExploreResult explore_chain(const SimulationContext& ctx, ChainId base,
                            const CacheIndex& cache, const Models& models,
                            const InferenceConfig& cfg, Rng& rng);

struct BatchResult {
  std::vector<UserResult> users;  // input order
  double wall_s = 0.0;
  // Wall time plus simulated backend time, where backend calls of users
  // handled by different workers overlap.
  double elapsed_s = 0.0;
  std::vector<EfficiencyRecord> records() const;
  std::vector<Trajectory> trajectories() const;
};

BatchResult batch_simulate(std::span<const SimulationContext> contexts,
                           CacheIndex& cache, const Models& models,
                           const InferenceConfig& cfg, std::size_t batch_size = 8);

void write_trajectories(const std::filesystem::path& path,
                        std::span<const Trajectory> trajectories);
std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);

}  // namespace trailcache

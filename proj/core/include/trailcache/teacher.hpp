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

// Synthetic reasoning backend.
//
// A seeded activity policy stands in for a fine-tuned latent-reasoning
// model. Its embedding scheme is exactly invertible, which makes the
// logical consistency of recombined chains checkable after decoding.

#include <array>
#include <cstdint>
#include <span>

#include "trailcache/domain.hpp"
#include "trailcache/tokens.hpp"

namespace trailcache {

struct StepSemantics {
  ActivityKind kind = ActivityKind::kHome;
  int start_minute = 0;
  double travel_km = 0.0;
  bool operator==(const StepSemantics&) const = default;
};

inline constexpr std::size_t kOccupationClasses = 3;

using TransitionMatrix = std::array<std::array<double, kKindCount>, kKindCount>;

struct GapParams {
  double mean_min = 60.0;
  double sd_min = 20.0;
};

struct LogNormalParams {
  double median_km = 1.0;
  double sigma = 0.5;
};

struct TeacherPolicy {
  // Indexed by occupation_class(occupation) * 2 + is_weekend.
  std::array<TransitionMatrix, kOccupationClasses * 2> transitions{};
  std::array<GapParams, kKindCount> gaps{};  // stay after the given kind
  std::array<LogNormalParams, kKindCount> distances{};
  double noise_amp = 0.05;
  int min_gap_min = 60;
  int first_start_max_min = 120;

  static TeacherPolicy defaults();
  const TransitionMatrix& matrix(int occupation, bool is_weekend) const;
};

std::size_t occupation_class(int occupation);
void validate(const TeacherPolicy& policy);

struct BackendCostModel {
  double per_step_latency_s = 0.33;
  int tokens_per_activity = kTokensPerActivity;
  double api_usd_per_1m_output_tokens = 10.0;
  double gpu_usd_per_hour = 0.5;
};

struct BackendCost {
  double latency_s = 0.0;
  double usd_api = 0.0;
  double usd_gpu_per_s = 0.0;  // rate; multiplied by measured seconds later
};

BackendCost simulate_backend_cost(long long n_steps, long long n_output_tokens,
                                  const BackendCostModel& model);

struct GeneratedChain {
  ReasoningChain chain;
  TokenSequence tokens;
};

// Contract of a latent-reasoning model: r_t = f(q, R_{1:t-1}).
class ReasoningBackend {
 public:
  virtual ~ReasoningBackend() = default;
  virtual LatentStep next_step(const SimulationContext& ctx,
                               std::span<const LatentStep> prefix,
                               std::uint64_t seed) const = 0;
  virtual GeneratedChain generate_chain(const SimulationContext& ctx,
                                        std::uint64_t seed) const = 0;
};

StepSemantics decode_step_reference(const LatentStep& step);

class SyntheticTeacher : public ReasoningBackend {
 public:
  explicit SyntheticTeacher(TeacherPolicy policy = TeacherPolicy::defaults());

  const TeacherPolicy& policy() const { return policy_; }

  LatentStep encode_step(const StepSemantics& sem, const SimulationContext& ctx,
                         int step_index, std::uint64_t seed) const;

  // Number of activities the rollout for (ctx, seed) produces.
  int chain_length(const SimulationContext& ctx, std::uint64_t seed) const;

  LatentStep next_step(const SimulationContext& ctx,
                       std::span<const LatentStep> prefix,
                       std::uint64_t seed) const override;
  GeneratedChain generate_chain(const SimulationContext& ctx,
                                std::uint64_t seed) const override;

 private:
  StepSemantics first_semantics(const SimulationContext& ctx,
                                std::uint64_t seed) const;
  StepSemantics next_semantics(const SimulationContext& ctx,
                               const StepSemantics& prev, int step_index,
                               std::uint64_t seed) const;

  TeacherPolicy policy_;
};

// Convenience used by the reference decoder and by tests.
std::vector<Activity> semantics_to_activities(
    std::span<const StepSemantics> sems);

}  // namespace trailcache

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

#include "trailcache/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trailcache/errors.hpp"
#include "trailcache/rng.hpp"

namespace trailcache {

namespace {

enum : std::uint64_t { kTagSemantics = 1, kTagNoise = 2, kTagLength = 3 };

const double kLogMaxKm = std::log1p(kMaxTravelKm);

std::uint64_t context_key(const SimulationContext& ctx) {
  const auto days = std::chrono::sys_days{ctx.date}.time_since_epoch().count();
  return hash_all({hash_string(ctx.profile.user_id),
                   static_cast<std::uint64_t>(days)});
}

std::uint64_t step_seed(std::uint64_t seed, const SimulationContext& ctx,
                        int step_index, std::uint64_t tag) {
  return hash_all({seed, context_key(ctx), static_cast<std::uint64_t>(step_index),
                   tag});
}

// Relative preference of moving to each kind; rows are the current kind.
constexpr TransitionMatrix kBaseAffinity = {{
    {0.0, 6.0, 1.0, 1.0, 0.8, 1.2, 0.5, 0.8},
    {4.0, 0.0, 2.5, 1.0, 0.7, 0.8, 0.4, 0.6},
    {3.0, 2.5, 0.0, 1.0, 1.0, 0.6, 0.3, 1.0},
    {3.5, 1.0, 1.0, 0.0, 1.0, 0.8, 0.3, 0.8},
    {4.0, 0.8, 1.2, 1.0, 0.0, 0.5, 0.3, 1.0},
    {3.0, 1.5, 0.8, 1.2, 0.7, 0.0, 0.4, 0.6},
    {3.5, 1.0, 0.8, 0.8, 0.5, 0.8, 0.0, 0.4},
    {4.0, 0.5, 1.2, 0.8, 1.0, 0.4, 0.2, 0.0},
}};

// Column multipliers per occupation class, then for weekends.
constexpr std::array<std::array<double, kKindCount>, kOccupationClasses>
    kClassScale = {{
        {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0},
        {1.0, 0.6, 1.0, 1.2, 1.3, 1.0, 1.0, 1.0},
        {1.0, 0.2, 1.0, 1.0, 1.6, 1.0, 1.8, 1.4},
    }};
constexpr std::array<double, kKindCount> kWeekendScale = {
    1.0, 0.0, 1.3, 1.6, 2.0, 0.7, 1.0, 2.0};

}  // namespace

std::size_t occupation_class(int occupation) {
  return std::clamp<std::size_t>(static_cast<std::size_t>(occupation) / 4, 0,
                                 kOccupationClasses - 1);
}

TeacherPolicy TeacherPolicy::defaults() {
  TeacherPolicy p;
  for (std::size_t c = 0; c < kOccupationClasses; ++c) {
    for (int weekend = 0; weekend < 2; ++weekend) {
      TransitionMatrix& m = p.transitions[c * 2 + weekend];
      for (std::size_t i = 0; i < kKindCount; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < kKindCount; ++j) {
          double w = kBaseAffinity[i][j] * kClassScale[c][j];
          if (weekend) w *= kWeekendScale[j];
          m[i][j] = w;
          total += w;
        }
        for (auto& w : m[i]) w /= total;
      }
    }
  }
  p.gaps = {{{360, 120}, {420, 90}, {75, 25}, {70, 30},
             {120, 45}, {50, 20}, {90, 30}, {150, 60}}};
  p.distances = {{{4.0, 0.7}, {8.0, 0.6}, {2.0, 0.7}, {3.0, 0.8},
                  {5.0, 0.9}, {1.5, 0.7}, {4.0, 0.8}, {6.0, 0.9}}};
  return p;
}

const TransitionMatrix& TeacherPolicy::matrix(int occupation,
                                              bool is_weekend) const {
  return transitions[occupation_class(occupation) * 2 + (is_weekend ? 1 : 0)];
}

void validate(const TeacherPolicy& policy) {
  for (const auto& m : policy.transitions) {
    for (const auto& row : m) {
      double total = 0.0;
      for (double w : row) {
        if (!(w >= 0.0)) fail(ErrorCode::kOutOfRange, "negative transition");
        total += w;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        fail(ErrorCode::kOutOfRange, "transition row sums to " +
                                         std::to_string(total));
      }
    }
  }
  for (const auto& g : policy.gaps) {
    if (!(g.mean_min > 0.0) || g.sd_min < 0.0) {
      fail(ErrorCode::kOutOfRange, "gap parameters");
    }
  }
  for (const auto& d : policy.distances) {
    if (!(d.median_km > 0.0) || d.sigma < 0.0) {
      fail(ErrorCode::kOutOfRange, "distance parameters");
    }
  }
  if (!(policy.noise_amp >= 0.0 && policy.noise_amp <= 0.05)) {
    fail(ErrorCode::kOutOfRange, "noise_amp must lie in [0, 0.05]");
  }
  if (policy.min_gap_min < 1 || policy.first_start_max_min < 0 ||
      policy.first_start_max_min + (kMaxActivities - 1) * policy.min_gap_min >=
          kMinutesPerDay) {
    fail(ErrorCode::kOutOfRange, "time packing parameters");
  }
}

BackendCost simulate_backend_cost(long long n_steps, long long n_output_tokens,
                                  const BackendCostModel& model) {
  if (n_steps < 0 || n_output_tokens < 0) {
    fail(ErrorCode::kInvalidArgument, "negative cost counts");
  }
  BackendCost cost;
  cost.latency_s = static_cast<double>(n_steps) * model.per_step_latency_s;
  cost.usd_api = static_cast<double>(n_output_tokens) *
                 model.api_usd_per_1m_output_tokens / 1e6;
  cost.usd_gpu_per_s = model.gpu_usd_per_hour / 3600.0;
  return cost;
}

StepSemantics decode_step_reference(const LatentStep& step) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kKindCount; ++i) {
    if (step.v[i] > step.v[best]) best = i;
  }
  if (!(step.v[best] >= 0.5)) {
    fail(ErrorCode::kUndecodable, "no dominant kind component");
  }
  StepSemantics sem;
  sem.kind = kind_from_index(best);
  double angle = std::atan2(step.v[8], step.v[9]);
  if (angle < 0.0) angle += 2.0 * M_PI;
  const long minute = std::lround(angle * kMinutesPerDay / (2.0 * M_PI));
  sem.start_minute = static_cast<int>(minute % kMinutesPerDay);
  const double km = std::expm1(step.v[10] * kLogMaxKm);
  sem.travel_km = std::clamp(km, 0.0, kMaxTravelKm);
  return sem;
}

SyntheticTeacher::SyntheticTeacher(TeacherPolicy policy)
    : policy_(std::move(policy)) {
  validate(policy_);
}

LatentStep SyntheticTeacher::encode_step(const StepSemantics& sem,
                                         const SimulationContext& ctx,
                                         int step_index,
                                         std::uint64_t seed) const {
  if (sem.start_minute < 0 || sem.start_minute >= kMinutesPerDay ||
      !(sem.travel_km >= 0.0 && sem.travel_km <= kMaxTravelKm) ||
      kind_index(sem.kind) >= kKindCount) {
    fail(ErrorCode::kOutOfRange, "step semantics out of range");
  }
  LatentStep r;
  r.v[kind_index(sem.kind)] = 1.0;
  const double angle = 2.0 * M_PI * sem.start_minute / kMinutesPerDay;
  r.v[8] = std::sin(angle);
  r.v[9] = std::cos(angle);
  r.v[10] = std::log1p(sem.travel_km) / kLogMaxKm;
  const Profile& p = ctx.profile;
  r.v[11] = p.age / 80.0;
  r.v[12] = p.income_level / 3.0;
  r.v[13] = p.occupation / 11.0;
  r.v[14] = ctx.is_weekend ? 1.0 : 0.0;
  r.v[15] = 0.0;
  Rng noise(step_seed(seed, ctx, step_index, kTagNoise));
  for (std::size_t i = 16; i < kLatentDim; ++i) {
    r.v[i] = noise.uniform(-policy_.noise_amp, policy_.noise_amp);
  }
  return r;
}

int SyntheticTeacher::chain_length(const SimulationContext& ctx,
                                   std::uint64_t seed) const {
  Rng rng(step_seed(seed, ctx, 0, kTagLength));
  return static_cast<int>(rng.uniform_int(kMinActivities, kMaxActivities));
}

StepSemantics SyntheticTeacher::first_semantics(const SimulationContext& ctx,
                                                std::uint64_t seed) const {
  Rng rng(step_seed(seed, ctx, 0, kTagSemantics));
  StepSemantics sem;
  sem.kind = ActivityKind::kHome;
  sem.start_minute =
      static_cast<int>(rng.uniform_int(0, policy_.first_start_max_min));
  sem.travel_km = 0.0;
  return sem;
}

StepSemantics SyntheticTeacher::next_semantics(const SimulationContext& ctx,
                                               const StepSemantics& prev,
                                               int step_index,
                                               std::uint64_t seed) const {
  Rng rng(step_seed(seed, ctx, step_index, kTagSemantics));
  const auto& row = policy_.matrix(ctx.profile.occupation,
                                   ctx.is_weekend)[kind_index(prev.kind)];
  StepSemantics sem;
  sem.kind = kind_from_index(rng.categorical(row));

  // Gap of the stay at the previous activity. The upper bound keeps room
  // for the longest possible chain, so the rule never needs to know T.
  const GapParams& g = policy_.gaps[kind_index(prev.kind)];
  const int gap = static_cast<int>(std::lround(rng.normal(g.mean_min, g.sd_min)));
  const int lo = prev.start_minute + policy_.min_gap_min;
  const int hi = std::max(
      lo, kMinutesPerDay - 1 - (kMaxActivities - 1 - step_index) *
                                   policy_.min_gap_min);
  sem.start_minute =
      std::min(std::clamp(prev.start_minute + gap, lo, hi), kMinutesPerDay - 1);

  const LogNormalParams& d = policy_.distances[kind_index(sem.kind)];
  const double km = d.median_km * std::exp(rng.normal(0.0, d.sigma));
  sem.travel_km = std::min(km, kMaxTravelKm);
  return sem;
}

LatentStep SyntheticTeacher::next_step(const SimulationContext& ctx,
                                       std::span<const LatentStep> prefix,
                                       std::uint64_t seed) const {
  const int t = static_cast<int>(prefix.size());
  if (t == 0) return encode_step(first_semantics(ctx, seed), ctx, 0, seed);
  const StepSemantics prev = decode_step_reference(prefix.back());
  return encode_step(next_semantics(ctx, prev, t, seed), ctx, t, seed);
}

GeneratedChain SyntheticTeacher::generate_chain(const SimulationContext& ctx,
                                                std::uint64_t seed) const {
  const int length = chain_length(ctx, seed);
  std::vector<StepSemantics> sems;
  sems.push_back(first_semantics(ctx, seed));
  for (int t = 1; t < length; ++t) {
    sems.push_back(next_semantics(ctx, sems.back(), t, seed));
  }
  GeneratedChain out;
  out.chain.context = ctx;
  for (int t = 0; t < length; ++t) {
    out.chain.steps.push_back(
        encode_step(sems[static_cast<std::size_t>(t)], ctx, t, seed));
    out.chain.provenance.push_back({StepSource::Kind::kGenerated, 0});
  }
  // Tokens come from what the embeddings decode to, so that they agree
  // with the reference decoder bit for bit.
  std::vector<StepSemantics> decoded;
  for (const auto& s : out.chain.steps) {
    decoded.push_back(decode_step_reference(s));
  }
  out.tokens = encode_tokens(semantics_to_activities(decoded));
  return out;
}

std::vector<Activity> semantics_to_activities(
    std::span<const StepSemantics> sems) {
  std::vector<Activity> acts;
  acts.reserve(sems.size());
  for (const auto& s : sems) {
    Activity a;
    a.kind = s.kind;
    a.start_minute = s.start_minute;
    a.travel_km = s.travel_km;
    acts.push_back(a);
  }
  return acts;
}

}  // namespace trailcache

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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "test_util.hpp"
#include "trailcache/errors.hpp"
#include "trailcache/jsonio.hpp"
#include "trailcache/teacher.hpp"

namespace trailcache {
namespace {

StepSemantics random_semantics(Rng& rng) {
  StepSemantics s;
  s.kind = kind_from_index(static_cast<std::size_t>(rng.uniform_int(0, 7)));
  s.start_minute = static_cast<int>(rng.uniform_int(0, 1439));
  s.travel_km = rng.uniform(0.0, 50.0);
  return s;
}

TEST(Encode, LayoutBeforeNoise) {
  Rng rng(1);
  const auto ctx = testing::random_context(rng, 0);
  const SyntheticTeacher teacher;
  const auto r = teacher.encode_step({ActivityKind::kHome, 0, 0.0}, ctx, 0, 9);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(r.v[i], i == 0 ? 1.0 : 0.0);
  EXPECT_NEAR(r.v[8], 0.0, 1e-15);
  EXPECT_NEAR(r.v[9], 1.0, 1e-15);
  EXPECT_EQ(r.v[10], 0.0);
  EXPECT_DOUBLE_EQ(r.v[11], ctx.profile.age / 80.0);
  EXPECT_DOUBLE_EQ(r.v[12], ctx.profile.income_level / 3.0);
  EXPECT_DOUBLE_EQ(r.v[13], ctx.profile.occupation / 11.0);
  EXPECT_EQ(r.v[14], ctx.is_weekend ? 1.0 : 0.0);
  EXPECT_EQ(r.v[15], 0.0);
  for (std::size_t i = 16; i < kLatentDim; ++i) EXPECT_LE(std::abs(r.v[i]), 0.05);
  EXPECT_EQ(r, teacher.encode_step({ActivityKind::kHome, 0, 0.0}, ctx, 0, 9));
}

TEST(Encode, RejectsInvalidSemantics) {
  Rng rng(2);
  const auto ctx = testing::random_context(rng, 0);
  const SyntheticTeacher teacher;
  EXPECT_THROW(teacher.encode_step({ActivityKind::kWork, 1440, 1.0}, ctx, 0, 1), Error);
  EXPECT_THROW(teacher.encode_step({ActivityKind::kWork, 10, 51.0}, ctx, 0, 1), Error);
}

TEST(Decode, RoundTripTenThousand) {
  Rng rng(3);
  const SyntheticTeacher teacher;
  for (int i = 0; i < 10000; ++i) {
    const auto ctx = testing::random_context(rng, i);
    const auto sem = random_semantics(rng);
    const auto back = decode_step_reference(
        teacher.encode_step(sem, ctx, i % 9, rng.next_u64()));
    ASSERT_EQ(back.kind, sem.kind);
    ASSERT_LE(std::abs(back.start_minute - sem.start_minute), 1);
    ASSERT_NEAR(back.travel_km, sem.travel_km, 1e-6 * std::max(1.0, sem.travel_km));
  }
}

TEST(Decode, ZeroVectorIsUndecodable) {
  try {
    decode_step_reference(LatentStep{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndecodable);
  }
}

TEST(Decode, NoiseIsolation) {
  Rng rng(4);
  const SyntheticTeacher teacher;
  for (int i = 0; i < 1000; ++i) {
    const auto ctx = testing::random_context(rng, i);
    const auto sem = random_semantics(rng);
    const auto a = teacher.encode_step(sem, ctx, 0, 1);
    const auto b = teacher.encode_step(sem, ctx, 0, 2);
    EXPECT_NE(a, b);
    EXPECT_EQ(decode_step_reference(a), decode_step_reference(b));
  }
}

TEST(Chain, DeterministicAndWellFormed) {
  Rng rng(5);
  const SyntheticTeacher teacher;
  for (int i = 0; i < 500; ++i) {
    const auto ctx = testing::random_context(rng, i);
    const auto a = teacher.generate_chain(ctx, 77 + i);
    const auto b = teacher.generate_chain(ctx, 77 + i);
    EXPECT_EQ(a.chain.steps, b.chain.steps);
    EXPECT_EQ(a.tokens, b.tokens);
    const auto n = a.chain.steps.size();
    ASSERT_GE(n, 2u);
    ASSERT_LE(n, 9u);
    const auto acts = decode_tokens(a.tokens);
    ASSERT_EQ(acts.size(), n);
    const auto first = decode_step_reference(a.chain.steps[0]);
    EXPECT_EQ(first.kind, ActivityKind::kHome);
    EXPECT_LE(first.start_minute, 120);
    int prev = -1;
    for (const auto& s : a.chain.steps) {
      const auto sem = decode_step_reference(s);
      EXPECT_GT(sem.start_minute, prev);
      prev = sem.start_minute;
    }
  }
}

TEST(Chain, LengthIsUniformOverTwoToNine) {
  Rng rng(6);
  const SyntheticTeacher teacher;
  std::array<int, 10> counts{};
  const int n = 8000;
  for (int i = 0; i < n; ++i) {
    const auto ctx = testing::random_context(rng, i);
    ++counts[static_cast<std::size_t>(teacher.chain_length(ctx, rng.next_u64()))];
  }
  for (int t = 2; t <= 9; ++t) EXPECT_NEAR(counts[t] / double(n), 0.125, 0.02);
}

TEST(Chain, TransitionFrequenciesMatchMatrix) {
  Rng rng(7);
  const SyntheticTeacher teacher;
  auto ctx = testing::random_context(rng, 0);
  ctx.profile.occupation = 4;
  ctx.is_weekend = false;
  const auto& m = teacher.policy().matrix(4, false);
  std::array<std::array<double, kKindCount>, kKindCount> joint{};
  std::array<double, kKindCount> from{};
  double total = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto g = teacher.generate_chain(ctx, rng.next_u64());
    const auto acts = decode_tokens(g.tokens);
    for (std::size_t t = 1; t < acts.size(); ++t) {
      joint[kind_index(acts[t - 1].kind)][kind_index(acts[t].kind)] += 1;
      from[kind_index(acts[t - 1].kind)] += 1;
      total += 1;
    }
  }
  double tv = 0.0;
  for (std::size_t p = 0; p < kKindCount; ++p) {
    for (std::size_t q = 0; q < kKindCount; ++q) {
      tv += std::abs(joint[p][q] / total - from[p] / total * m[p][q]);
    }
  }
  EXPECT_LE(0.5 * tv, 0.02);
}

TEST(NextStep, ReproducesRolloutFromPrefix) {
  Rng rng(8);
  const SyntheticTeacher teacher;
  for (int i = 0; i < 300; ++i) {
    const auto ctx = testing::random_context(rng, i);
    const std::uint64_t seed = rng.next_u64();
    const auto g = teacher.generate_chain(ctx, seed);
    const auto& steps = g.chain.steps;
    EXPECT_EQ(teacher.next_step(ctx, {}, seed), steps[0]);
    for (std::size_t t = 1; t < steps.size(); ++t) {
      const std::span<const LatentStep> prefix(steps.data(), t);
      const auto next = teacher.next_step(ctx, prefix, seed);
      EXPECT_EQ(next, steps[t]);
      EXPECT_GT(decode_step_reference(next).start_minute,
                decode_step_reference(steps[t - 1]).start_minute);
      EXPECT_EQ(next, teacher.next_step(ctx, prefix, seed));
    }
  }
}

TEST(Cost, Arithmetic) {
  const BackendCostModel model;
  EXPECT_NEAR(simulate_backend_cost(6, 0, model).latency_s, 1.98, 1e-12);
  EXPECT_NEAR(simulate_backend_cost(0, 180, model).usd_api, 1.8e-3, 1e-15);
  EXPECT_EQ(simulate_backend_cost(0, 0, model).latency_s, 0.0);
}

TEST(Policy, DefaultsValidAndShippedFileMatches) {
  const auto policy = TeacherPolicy::defaults();
  EXPECT_NO_THROW(validate(policy));
  for (const auto& m : policy.transitions) {
    for (const auto& row : m) {
      double s = 0;
      for (double p : row) s += p;
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
  std::ifstream in(std::string(TRAILCACHE_SOURCE_DIR) + "/data/policy_default.json");
  ASSERT_TRUE(in) << "data/policy_default.json missing";
  const auto loaded = nlohmann::json::parse(in).get<TeacherPolicy>();
  EXPECT_EQ(nlohmann::json(loaded), nlohmann::json(policy));
}

TEST(Policy, RowsMustSumToOne) {
  auto policy = TeacherPolicy::defaults();
  policy.transitions[0][0][0] += 0.01;
  EXPECT_THROW(validate(policy), Error);
  policy = TeacherPolicy::defaults();
  policy.gaps[2].mean_min = 0.0;
  EXPECT_THROW(validate(policy), Error);
}

}  // namespace
}  // namespace trailcache

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

#include <algorithm>
#include <filesystem>

#include "test_util.hpp"
#include "trailcache/errors.hpp"
#include "trailcache/inference.hpp"

namespace trailcache {
namespace {

struct World {
  City city = generate_city(1, 40, "test");
  SyntheticTeacher teacher;
  ReferenceDecoder reference;
  RawCosineScorer cosine_scorer;
  std::vector<SimulationContext> cached_users = generate_population(200, 11, city);
  CacheIndex cache;

  World() {
    for (std::size_t i = 0; i < cached_users.size(); ++i) {
      const std::uint64_t s = hash_all({5, i});
      cache.insert_chain(cached_users[i], teacher.generate_chain(cached_users[i], s).chain.steps, s);
    }
  }

  Models models(const BranchScorer* scorer = nullptr,
                const ChainDecoder* decoder = nullptr) const {
    Models m;
    m.backend = &teacher;
    m.scorer = scorer ? scorer : &cosine_scorer;
    m.decoder = decoder ? decoder : &reference;
    m.city = &city;
    return m;
  }
};

const World& world() {
  static const World w;
  return w;
}

std::vector<StepSemantics> semantics(const TokenSequence& seq) {
  std::vector<StepSemantics> out;
  for (const auto& a : decode_tokens(seq)) out.push_back({a.kind, a.start_minute, a.travel_km});
  return out;
}

TEST(Follow, PassThroughOfMatchedChain) {
  const auto& w = world();
  InferenceConfig cfg;
  cfg.exploration_rate = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    const auto& ctx = w.cached_users[i];
    const auto r = simulate_user(ctx, w.cache, w.models(), cfg);
    EXPECT_EQ(r.outcome.strategy, Strategy::kFollowed);
    ASSERT_TRUE(r.outcome.matched_chain);
    EXPECT_EQ(r.outcome.backend_steps_charged, 0);
    EXPECT_TRUE(r.delta.empty());
    const auto cached = w.cache.chain(*r.outcome.matched_chain);
    EXPECT_EQ(r.outcome.chain.steps, cached.steps);
    const auto expected = w.reference.decode(cached.steps);
    EXPECT_EQ(r.tokens, expected);
    const auto sem = semantics(expected);
    ASSERT_EQ(r.trajectory.activities.size(), sem.size());
    for (std::size_t k = 0; k < sem.size(); ++k) {
      EXPECT_EQ(r.trajectory.activities[k].kind, sem[k].kind);
      EXPECT_EQ(r.trajectory.activities[k].start_minute, sem[k].start_minute);
    }
  }
}

TEST(Generate, EmptyCacheMissGrowsCache) {
  const auto& w = world();
  CacheIndex empty;
  InferenceConfig cfg;
  const auto r = simulate_user(w.cached_users[0], empty, w.models(), cfg);
  EXPECT_EQ(r.outcome.strategy, Strategy::kGenerated);
  EXPECT_EQ(empty.entry_count(), 1u);
  EXPECT_EQ(r.outcome.backend_steps_charged,
            static_cast<long long>(r.outcome.chain.steps.size()));
  EXPECT_EQ(empty.chain(0).steps, r.outcome.chain.steps);
  EXPECT_NEAR(r.record.simulated_backend_s, 0.33 * r.outcome.backend_steps_charged, 1e-12);
}

TEST(Explore, ZeroScoresFallBackToTheBackend) {
  const auto& w = world();
  const ConstantScorer zero(0.0);
  InferenceConfig cfg;
  cfg.exploration_rate = 1.0;
  for (std::size_t i = 0; i < 30; ++i) {
    const auto r = simulate_user(w.cached_users[i], w.cache, w.models(&zero), cfg);
    EXPECT_EQ(r.outcome.strategy, Strategy::kExplored);
    EXPECT_GT(r.outcome.backend_steps_charged, 0);
    EXPECT_EQ(r.outcome.fallbacks, r.outcome.rounds);
    EXPECT_TRUE(r.outcome.splice_points.empty());
    EXPECT_GE(r.outcome.rounds, 1);
    EXPECT_LE(r.outcome.rounds, 3);
  }
}

TEST(Explore, IdenticalDonorDecodesLikeFollowing) {
  const auto& w = world();
  CacheIndex cache;
  const auto& ctx = w.cached_users[0];
  const auto g = w.teacher.generate_chain(ctx, 1234);
  if (g.chain.steps.size() < 3) GTEST_SKIP();
  cache.insert_chain(ctx, g.chain.steps, 1234);
  // Same steps under a very different context: never matched, only donated.
  auto other = w.cached_users[1];
  other.profile.age = ctx.profile.age > 50 ? 18 : 80;
  other.profile.occupation = (ctx.profile.occupation + 6) % 12;
  other.is_weekend = !ctx.is_weekend;
  cache.insert_chain(other, g.chain.steps, 1234);
  const ConstantScorer one(1.0);
  InferenceConfig follow_cfg;
  follow_cfg.exploration_rate = 0.0;
  InferenceConfig explore_cfg;
  explore_cfg.exploration_rate = 1.0;
  const auto followed = simulate_user(ctx, cache, w.models(&one), follow_cfg);
  const auto explored = simulate_user(ctx, cache, w.models(&one), explore_cfg);
  ASSERT_EQ(followed.outcome.matched_chain, ChainId{0});
  ASSERT_EQ(explored.outcome.strategy, Strategy::kExplored);
  EXPECT_FALSE(explored.outcome.splice_points.empty());
  EXPECT_EQ(explored.outcome.backend_steps_charged, 0);
  EXPECT_EQ(semantics(explored.tokens), semantics(followed.tokens));
}

TEST(Accounting, ChargesFollowStrategy) {
  const auto& w = world();
  const auto users = generate_population(300, 77, w.city);
  CacheIndex cache = w.cache;
  InferenceConfig cfg;
  const auto run = batch_simulate(users, cache, w.models(), cfg, 8);
  long long charged = 0;
  std::size_t generated = 0;
  for (const auto& u : run.users) {
    const auto& o = u.outcome;
    charged += o.backend_steps_charged;
    switch (o.strategy) {
      case Strategy::kFollowed:
        // Cached teacher chains decode in order, so no repair is needed.
        EXPECT_EQ(o.repair, Repair::kNone);
        EXPECT_EQ(o.backend_steps_charged, 0);
        break;
      case Strategy::kGenerated:
        ++generated;
        EXPECT_EQ(o.repair, Repair::kNone);
        EXPECT_EQ(o.backend_steps_charged, static_cast<long long>(o.chain.steps.size()));
        break;
      case Strategy::kExplored:
        // Only fallback steps are charged unless a repair re-ran the backend.
        if (o.repair == Repair::kNone) {
          EXPECT_EQ(o.backend_steps_charged > 0, o.fallbacks > 0);
        }
        break;
    }
    EXPECT_NEAR(u.record.simulated_backend_s, 0.33 * o.backend_steps_charged, 1e-12);
    EXPECT_EQ(u.record.charged_steps, o.backend_steps_charged);
    EXPECT_EQ(u.record.output_tokens, static_cast<long long>(u.tokens.tokens.size()));
  }
  EXPECT_EQ(cache.entry_count(), w.cache.entry_count() + generated);
  double total = 0;
  for (const auto& r : run.records()) total += r.simulated_backend_s;
  EXPECT_NEAR(total, charged * 0.33, 1e-9);
}

TEST(Explore, FractionConcentratesAtRate) {
  const auto& w = world();
  const auto users = generate_population(2000, 78, w.city);
  InferenceConfig cfg;
  cfg.context_threshold = 0.0;  // every user hits
  std::size_t explored = 0;
  for (const auto& u : users) {
    const auto r = simulate_user(u, w.cache, w.models(), cfg);
    ASSERT_NE(r.outcome.strategy, Strategy::kGenerated);
    explored += r.outcome.strategy == Strategy::kExplored ? 1 : 0;
  }
  EXPECT_NEAR(explored / 2000.0, 0.5, 0.05);
}

bool same(const BatchResult& a, const BatchResult& b) {
  if (a.users.size() != b.users.size()) return false;
  for (std::size_t i = 0; i < a.users.size(); ++i) {
    const auto& x = a.users[i].trajectory.activities;
    const auto& y = b.users[i].trajectory.activities;
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (x[k].kind != y[k].kind || x[k].start_minute != y[k].start_minute ||
          x[k].location != y[k].location) {
        return false;
      }
    }
    if (a.users[i].outcome.strategy != b.users[i].outcome.strategy) return false;
  }
  return true;
}

TEST(Batch, WorkerCountDoesNotChangeResults) {
  const auto& w = world();
  const auto users = generate_population(120, 79, w.city);
  InferenceConfig cfg;
  CacheIndex c1 = w.cache, c8 = w.cache, again = w.cache;
  const auto r1 = batch_simulate(users, c1, w.models(), cfg, 1);
  const auto r8 = batch_simulate(users, c8, w.models(), cfg, 8);
  const auto r8b = batch_simulate(users, again, w.models(), cfg, 8);
  EXPECT_TRUE(same(r1, r8));
  EXPECT_TRUE(same(r8, r8b));
  EXPECT_TRUE(c1 == c8);
}

TEST(Batch, SingleWorkerEqualsSequentialLoop) {
  const auto& w = world();
  const auto users = generate_population(60, 80, w.city);
  InferenceConfig cfg;
  cfg.commit_window = 1;
  CacheIndex batch_cache = w.cache, loop_cache = w.cache;
  const auto run = batch_simulate(users, batch_cache, w.models(), cfg, 1);
  for (std::size_t i = 0; i < users.size(); ++i) {
    const auto r = simulate_user(users[i], loop_cache, w.models(), cfg);
    EXPECT_EQ(r.tokens, run.users[i].tokens);
    EXPECT_EQ(r.trajectory.activities.size(), run.users[i].trajectory.activities.size());
  }
  EXPECT_TRUE(batch_cache == loop_cache);
}

TEST(Validity, UntrainedDecoderStillYieldsValidTrajectories) {
  const auto& w = world();
  const StudentDecoder untrained(3, 16);
  const auto users = generate_population(150, 81, w.city);
  CacheIndex cache = w.cache;
  InferenceConfig cfg;
  const auto run = batch_simulate(users, cache, w.models(nullptr, &untrained), cfg, 4);
  std::size_t repaired = 0;
  for (const auto& u : run.users) {
    EXPECT_NO_THROW(validate(u.trajectory));
    repaired += u.outcome.repair != Repair::kNone || u.outcome.reference_decoded ? 1 : 0;
  }
  EXPECT_GT(repaired, 0u);  // the repair path was exercised
}

TEST(Config, ValidationRejectsOutOfRange) {
  InferenceConfig cfg;
  EXPECT_NO_THROW(validate(cfg));
  cfg.exploration_rate = 1.5;
  EXPECT_THROW(validate(cfg), Error);
  cfg = {};
  cfg.score_threshold = 0.0;
  EXPECT_THROW(validate(cfg), Error);
  cfg = {};
  cfg.min_rounds = 3;
  cfg.max_rounds = 2;
  EXPECT_THROW(validate(cfg), Error);
  cfg = {};
  cfg.candidate_k = 0;
  EXPECT_THROW(validate(cfg), Error);
}

TEST(Io, TrajectoryJsonlRoundTrip) {
  Rng rng(3);
  std::vector<Trajectory> ts;
  for (int i = 0; i < 20; ++i) ts.push_back(testing::random_trajectory(rng, i));
  const auto path = std::filesystem::temp_directory_path() / "trailcache_traj.jsonl";
  write_trajectories(path, ts);
  const auto back = read_trajectories(path);
  ASSERT_EQ(back.size(), ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    EXPECT_EQ(back[i].context.profile.user_id, ts[i].context.profile.user_id);
    ASSERT_EQ(back[i].activities.size(), ts[i].activities.size());
    for (std::size_t k = 0; k < ts[i].activities.size(); ++k) {
      EXPECT_EQ(back[i].activities[k].start_minute, ts[i].activities[k].start_minute);
      EXPECT_EQ(back[i].activities[k].location, ts[i].activities[k].location);
    }
  }
}

}  // namespace
}  // namespace trailcache

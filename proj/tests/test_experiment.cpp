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

#include <fstream>
#include <set>

#include "trailcache/errors.hpp"
#include "trailcache/experiment.hpp"

namespace trailcache {
namespace {

TEST(Config, JsonRoundTripPreservesEverything) {
  ExperimentConfig cfg;
  cfg.seed = 99;
  cfg.cache_users = 123;
  cfg.decoder.lambda = 0.2;
  cfg.inference.exploration_rate = 0.25;
  cfg.inference.branch_query = BranchQuery::kBranchNode;
  cfg.inference.gravity.band_tolerance_km = 0.7;
  cfg.policy_path = "data/policy_default.json";
  const auto back = config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(config_hash(back), config_hash(cfg));
  EXPECT_EQ(back.inference.branch_query, BranchQuery::kBranchNode);
  EXPECT_EQ(*back.inference.gravity.band_tolerance_km, 0.7);
}

TEST(Config, HashTracksContent) {
  ExperimentConfig a, b;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.inference.score_threshold = 0.61;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, PartialOverridesKeepDefaults) {
  const auto j = nlohmann::json::parse(R"({"seed": 3, "inference": {"candidate_k": 4}})");
  const auto cfg = config_from_json(j);
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.inference.candidate_k, 4u);
  EXPECT_EQ(cfg.inference.exploration_rate, 0.5);
  EXPECT_EQ(cfg.decoder.lambda, 0.05);
}

TEST(Config, InvalidValuesRejected) {
  auto expect_invalid = [](const char* text) {
    try {
      config_from_json(nlohmann::json::parse(text));
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument) << text;
    }
  };
  expect_invalid(R"({"inference": {"exploration_rate": 2}})");
  expect_invalid(R"({"inference": {"branch_query": "sideways"}})");
  expect_invalid(R"({"seed": "seven"})");
  expect_invalid(R"({"decoder": {"lambda": -1}})");
}

TEST(Config, ShippedTinyConfigLoads) {
  const auto cfg = load_config(std::string(TRAILCACHE_SOURCE_DIR) + "/tests/data/tiny_config.json");
  EXPECT_LT(cfg.cache_users, ExperimentConfig{}.cache_users);
}

TEST(Stages, SeedsAreDistinctAndStable) {
  ExperimentConfig cfg;
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 1; s <= static_cast<std::uint64_t>(Stage::kGenerateAll); ++s) {
    seen.insert(stage_seed(cfg, static_cast<Stage>(s)));
  }
  EXPECT_EQ(seen.size(), static_cast<std::size_t>(Stage::kGenerateAll));
  EXPECT_EQ(stage_seed(cfg, Stage::kCity), hash_all({7, 1}));
}

TEST(Pipeline, SmallStagesAreReproducible) {
  ExperimentConfig cfg;
  cfg.cache_users = 40;
  const City city = build_city(cfg);
  EXPECT_TRUE(city == build_city(cfg));
  const SyntheticTeacher teacher(load_policy(cfg));
  const auto a = build_cache(cfg, teacher, city);
  const auto b = build_cache(cfg, teacher, city);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(a.entry_count(), 40u);
  EXPECT_EQ(a.integrity_problem(), "");
  const auto users = population(cfg, Stage::kQueryPopulation, 30, city);
  const auto all = generate_all(users, cfg, teacher, city);
  ASSERT_EQ(all.users.size(), 30u);
  for (const auto& u : all.users) {
    EXPECT_EQ(u.outcome.strategy, Strategy::kGenerated);
    EXPECT_EQ(u.outcome.backend_steps_charged,
              static_cast<long long>(u.trajectory.activities.size()));
  }
}

}  // namespace
}  // namespace trailcache

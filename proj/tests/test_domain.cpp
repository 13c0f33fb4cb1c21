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

#include "test_util.hpp"
#include "trailcache/domain.hpp"
#include "trailcache/errors.hpp"

namespace trailcache {
namespace {

TEST(Geometry, EuclidThreeFourFive) {
  EXPECT_DOUBLE_EQ(euclid_km({0, 0}, {3, 4}), 5.0);
}

TEST(Geometry, TriangleInequality) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const GeoPoint a{rng.uniform(0, 30), rng.uniform(0, 30)};
    const GeoPoint b{rng.uniform(0, 30), rng.uniform(0, 30)};
    const GeoPoint c{rng.uniform(0, 30), rng.uniform(0, 30)};
    EXPECT_LE(euclid_km(a, c), euclid_km(a, b) + euclid_km(b, c) + 1e-12);
  }
}

TEST(Dates, ParseFormatAndWeekend) {
  const Date d = parse_date("2019-10-05");
  EXPECT_EQ(format_date(d), "2019-10-05");
  EXPECT_TRUE(date_is_weekend(d));                    // Saturday
  EXPECT_FALSE(date_is_weekend(parse_date("2019-10-07")));  // Monday
  EXPECT_THROW(parse_date("2019-13-01"), Error);
  EXPECT_THROW(parse_date("yesterday"), Error);
}

TEST(Context, SimilarityIdentityAndSymmetry) {
  Rng rng(2);
  const auto a = testing::random_context(rng, 0);
  const auto b = testing::random_context(rng, 1);
  EXPECT_EQ(context_similarity(a, a), 1.0);
  EXPECT_DOUBLE_EQ(context_similarity(a, b), context_similarity(b, a));
}

// Feature vector written out independently from the documented layout.
double oracle_similarity(const SimulationContext& a, const SimulationContext& b) {
  auto feats = [](const SimulationContext& c) {
    std::vector<double> f;
    f.push_back(c.profile.age / 80.0);
    f.push_back(c.profile.income_level / 3.0);
    for (int o = 0; o < 12; ++o) f.push_back(c.profile.occupation == o ? 1.0 : 0.0);
    f.push_back(c.is_weekend ? 1.0 : 0.0);
    f.push_back(c.profile.home.x / 30.0);
    f.push_back(c.profile.home.y / 30.0);
    f.push_back(c.profile.workplace.x / 30.0);
    f.push_back(c.profile.workplace.y / 30.0);
    return f;
  };
  const auto fa = feats(a);
  const auto fb = feats(b);
  double dot = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) dot += fa[i] * fb[i];
  return (1.0 + dot / (testing::l2(fa) * testing::l2(fb))) / 2.0;
}

TEST(Context, WeekendFlagAloneLowersSimilarity) {
  Rng rng(6);
  auto a = testing::random_context(rng, 0);
  auto b = a;
  b.is_weekend = !a.is_weekend;
  EXPECT_LT(context_similarity(a, b), 1.0);
  EXPECT_NEAR(context_similarity(a, b), context_similarity(b, a), 1e-12);
}

TEST(Context, SimilarityMatchesOracle) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto a = testing::random_context(rng, i);
    const auto b = testing::random_context(rng, i + 1000);
    EXPECT_NEAR(context_similarity(a, b), oracle_similarity(a, b), 1e-12);
  }
}

TEST(Context, ValidationRejectsBadProfiles) {
  Rng rng(4);
  auto c = testing::random_context(rng, 0);
  c.profile.age = 10;
  EXPECT_THROW(validate(c), Error);
  c = testing::random_context(rng, 0);
  c.profile.occupation = 12;
  EXPECT_THROW(validate(c), Error);
  c = testing::random_context(rng, 0);
  c.profile.home = {31.0, 1.0};
  EXPECT_THROW(validate(c), Error);
}

TEST(Trajectory, Invariant) {
  Rng rng(5);
  Trajectory t = testing::random_trajectory(rng, 0);
  EXPECT_NO_THROW(validate(t));
  Trajectory one = t;
  one.activities.resize(1);
  EXPECT_THROW(validate(one), Error);
  Trajectory backwards = t;
  backwards.activities[1].start_minute = backwards.activities[0].start_minute;
  EXPECT_THROW(validate(backwards), Error);
  Trajectory unlocated = t;
  unlocated.activities[0].location.reset();
  EXPECT_THROW(validate(unlocated), Error);
  Trajectory too_long = t;
  too_long.activities.clear();
  for (int i = 0; i < 10; ++i) {
    too_long.activities.push_back({i * 60, ActivityKind::kHome, 0.0, GeoPoint{1, 1}});
  }
  EXPECT_THROW(validate(too_long), Error);
}

TEST(LatentStep, ValidationAndCosine) {
  LatentStep s;
  EXPECT_THROW(validate(s), Error);  // zero norm
  s.v[0] = 1.0;
  EXPECT_NO_THROW(validate(s));
  s.v[1] = std::nan("");
  EXPECT_THROW(validate(s), Error);
  LatentStep a;
  a.v[0] = 1.0;
  LatentStep b;
  b.v[0] = -2.0;
  EXPECT_DOUBLE_EQ(cosine(a.v, b.v), -1.0);
  EXPECT_DOUBLE_EQ(cosine(a.v, a.v), 1.0);
}

TEST(Kinds, NameRoundTrip) {
  for (std::size_t k = 0; k < kKindCount; ++k) {
    EXPECT_EQ(kind_from_name(kind_name(kind_from_index(k))), kind_from_index(k));
  }
  EXPECT_THROW(kind_from_name("gym"), Error);
}

}  // namespace
}  // namespace trailcache

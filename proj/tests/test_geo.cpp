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
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "test_util.hpp"
#include "trailcache/errors.hpp"
#include "trailcache/geo.hpp"
#include "trailcache/teacher.hpp"

namespace trailcache {
namespace {

City hand_city(std::vector<Poi> pois) {
  City c;
  c.city_id = "hand";
  c.pois = std::move(pois);
  c.rebuild_index();
  return c;
}

TEST(City, DeterministicCountedAndBounded) {
  const City a = generate_city(5, 40, "a");
  EXPECT_TRUE(a == generate_city(5, 40, "a"));
  EXPECT_FALSE(a == generate_city(6, 40, "a"));
  EXPECT_EQ(a.pois.size(), 8u * 40u);
  for (const auto& idx : a.by_kind) EXPECT_EQ(idx.size(), 40u);
  for (const auto& p : a.pois) {
    EXPECT_TRUE(in_city_bounds(p.location));
    EXPECT_GT(p.attractiveness, 0.0);
  }
  EXPECT_NO_THROW(validate(a));
  EXPECT_THROW(generate_city(5, 19), Error);
}

TEST(City, FileRoundTrip) {
  const City a = generate_city(8, 25, "rt");
  const auto path = std::filesystem::temp_directory_path() / "trailcache_city.jsonl";
  write_city(path, a);
  EXPECT_TRUE(read_city(path) == a);
}

TEST(Cells, RowMajorOneKilometre) {
  EXPECT_EQ(cell_index({0.0, 0.0}), 0);
  EXPECT_EQ(cell_index({1.5, 0.2}), 1);
  EXPECT_EQ(cell_index({0.2, 1.5}), 30);
  EXPECT_EQ(cell_index({30.0, 30.0}), 899);
}

TEST(Gravity, TwoPoiExample) {
  // Both in band around 1.5 km with tolerance 0.6: weights 4/2^2 and 1/1^2.
  const City c = hand_city({{{12.0, 10.0}, ActivityKind::kDining, 4.0},
                            {{10.0, 11.0}, ActivityKind::kDining, 1.0},
                            {{25.0, 25.0}, ActivityKind::kDining, 9.0}});
  GravityParams params;
  params.band_tolerance_km = 0.6;
  const auto choice = gravity_candidates({10.0, 10.0}, ActivityKind::kDining, 1.5, c, params);
  ASSERT_EQ(choice.poi_indices.size(), 2u);
  const double w0 = 4.0 / std::pow(2.0, 2.0);
  const double w1 = 1.0 / std::pow(1.0, 2.0);
  EXPECT_NEAR(choice.probabilities[0], w0 / (w0 + w1), 1e-12);
  EXPECT_NEAR(choice.probabilities[1], w1 / (w0 + w1), 1e-12);
  EXPECT_NEAR(choice.probabilities[0], 0.5, 1e-12);
}

TEST(Gravity, SingleCandidateWidenedBandAndFallback) {
  const City c = hand_city({{{13.0, 10.0}, ActivityKind::kLeisure, 1.0},
                            {{29.0, 29.0}, ActivityKind::kLeisure, 1.0}});
  GravityParams params;
  params.band_tolerance_km = 0.5;
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto p = gravity_assign({10.0, 10.0}, ActivityKind::kLeisure, 3.0, c, params, rng);
    EXPECT_EQ(p.x, 13.0);
  }
  // 3.8 km target: band 0.5 misses, 1.0 catches the POI at 3 km.
  const auto widened = gravity_candidates({10.0, 10.0}, ActivityKind::kLeisure, 3.8, c, params);
  EXPECT_EQ(widened.tolerance_km, 1.0);
  EXPECT_FALSE(widened.nearest_fallback);
  // 8 km: 0.5, 1, 2, 4 all miss the 3 km POI; the other sits ~26.9 km away.
  const auto nearest = gravity_candidates({10.0, 10.0}, ActivityKind::kLeisure, 8.0, c, params);
  EXPECT_TRUE(nearest.nearest_fallback);
  ASSERT_EQ(nearest.poi_indices.size(), 1u);
  EXPECT_EQ(nearest.poi_indices[0], 0u);
  try {
    gravity_candidates({1, 1}, ActivityKind::kHealth, 1.0, c, params);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoPoiOfKind);
  }
}

TEST(Gravity, WeightsFormDistributionWithDistanceFloor) {
  const City city = generate_city(3, 200);
  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const GeoPoint o{rng.uniform(0, 30), rng.uniform(0, 30)};
    const auto kind = kind_from_index(static_cast<std::size_t>(rng.uniform_int(2, 7)));
    const auto ch = gravity_candidates(o, kind, rng.uniform(0, 10), city, {});
    double s = 0;
    for (double p : ch.probabilities) s += p;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_NEAR(gravity_weight(2.0, 0.0, 2.0), 200.0, 1e-9);
  EXPECT_NEAR(gravity_weight(2.0, 0.05, 2.0), 200.0, 1e-9);
}

TEST(Gravity, MonteCarloMatchesAnalyticWeights) {
  const City city = generate_city(4, 200);
  const GeoPoint origin{15.0, 15.0};
  GravityParams params;
  params.band_tolerance_km = 1.5;
  const auto choice = gravity_candidates(origin, ActivityKind::kShopping, 4.0, city, params);
  ASSERT_GE(choice.poi_indices.size(), 3u);
  std::map<std::pair<double, double>, std::size_t> slot;
  for (std::size_t i = 0; i < choice.poi_indices.size(); ++i) {
    const auto& loc = city.pois[choice.poi_indices[i]].location;
    slot[{loc.x, loc.y}] = i;
  }
  std::vector<double> freq(choice.poi_indices.size(), 0.0);
  Rng rng(5);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto p = gravity_assign(origin, ActivityKind::kShopping, 4.0, city, params, rng);
    freq[slot.at({p.x, p.y})] += 1.0 / n;
  }
  // Analytic weights recomputed from POI data.
  std::vector<double> w;
  double total = 0;
  for (std::size_t idx : choice.poi_indices) {
    const auto& poi = city.pois[idx];
    w.push_back(poi.attractiveness / std::pow(std::max(euclid_km(origin, poi.location), 0.1), 2.0));
    total += w.back();
  }
  double tv = 0;
  for (std::size_t i = 0; i < w.size(); ++i) tv += std::abs(freq[i] - w[i] / total);
  EXPECT_LE(0.5 * tv, 0.01);
}

TEST(Materialize, HomeAndWorkArePinned) {
  const City city = generate_city(6, 30);
  Rng rng(6);
  const auto ctx = generate_population(1, 6, city)[0];
  const auto seq = assemble_tokens(std::vector<ActivityTokens>{
      {0, 2, 0}, {1, 16, 5}, {0, 36, 5}, {1, 40, 5}});
  const auto t = materialize(ctx, seq, city, {}, rng);
  EXPECT_EQ(*t.activities[0].location, ctx.profile.home);
  EXPECT_EQ(*t.activities[1].location, ctx.profile.workplace);
  EXPECT_EQ(*t.activities[2].location, ctx.profile.home);
  EXPECT_EQ(*t.activities[3].location, ctx.profile.workplace);
  EXPECT_DOUBLE_EQ(t.activities[1].travel_km, euclid_km(ctx.profile.home, ctx.profile.workplace));
  EXPECT_EQ(t.activities[0].travel_km, 0.0);
}

TEST(Materialize, RealizedJumpsStayInBandOnDenseCity) {
  const City city = generate_city(7, 400);
  const SyntheticTeacher teacher;
  const auto users = generate_population(4000, 7, city);
  int checked = 0, in_band = 0;
  for (std::size_t u = 0; u < users.size() && checked < 10000; ++u) {
    const auto g = teacher.generate_chain(users[u], u);
    Rng rng(hash_all({7, u}));
    const auto traj = materialize(users[u], g.tokens, city, {}, rng);
    ASSERT_NO_THROW(validate(traj));
    const auto decoded = decode_tokens(g.tokens);
    GeoPoint prev = users[u].profile.home;
    for (std::size_t i = 0; i < decoded.size(); ++i) {
      const auto kind = decoded[i].kind;
      const GeoPoint loc = *traj.activities[i].location;
      if (kind != ActivityKind::kHome && kind != ActivityKind::kWork) {
        const auto ch = gravity_candidates(prev, kind, decoded[i].travel_km, city, {});
        ++checked;
        if (!ch.nearest_fallback &&
            std::abs(euclid_km(prev, loc) - decoded[i].travel_km) <= ch.tolerance_km + 1e-9) {
          ++in_band;
        }
      }
      prev = loc;
    }
  }
  ASSERT_GE(checked, 10000);
  EXPECT_GE(in_band / static_cast<double>(checked), 0.95) << in_band << "/" << checked;
}

TEST(Materialize, DeterministicGivenSeed) {
  const City city = generate_city(9, 30);
  const auto ctx = generate_population(1, 9, city)[0];
  const auto g = SyntheticTeacher().generate_chain(ctx, 3);
  Rng a(11), b(11);
  const auto ta = materialize(ctx, g.tokens, city, {}, a);
  const auto tb = materialize(ctx, g.tokens, city, {}, b);
  ASSERT_EQ(ta.activities.size(), tb.activities.size());
  for (std::size_t i = 0; i < ta.activities.size(); ++i) {
    EXPECT_EQ(ta.activities[i].location, tb.activities[i].location);
  }
}

TEST(Population, MarginalsMatchSpec) {
  const City city = generate_city(10, 30);
  const PopulationSpec spec;
  const std::size_t n = 20000;
  const auto users = generate_population(n, 10, city, spec);
  ASSERT_EQ(users.size(), n);
  std::array<double, 4> age{}, income{};
  std::array<double, 12> occ{};
  std::set<std::string> ids;
  int weekend = 0;
  for (const auto& u : users) {
    ASSERT_NO_THROW(validate(u));
    const int a = u.profile.age;
    age[a <= 29 ? 0 : a <= 44 ? 1 : a <= 59 ? 2 : 3] += 1.0 / n;
    income[static_cast<std::size_t>(u.profile.income_level)] += 1.0 / n;
    occ[static_cast<std::size_t>(u.profile.occupation)] += 1.0 / n;
    ids.insert(u.profile.user_id);
    weekend += u.is_weekend ? 1 : 0;
  }
  auto tv = [](auto& got, auto& want) {
    double s = 0;
    for (std::size_t i = 0; i < got.size(); ++i) s += std::abs(got[i] - want[i]);
    return 0.5 * s;
  };
  EXPECT_LE(tv(age, spec.age_bracket_probs), 0.02);
  EXPECT_LE(tv(income, spec.income_probs), 0.02);
  EXPECT_LE(tv(occ, spec.occupation_probs), 0.02);
  EXPECT_EQ(ids.size(), n);
  // 92 days from 2019-10-01 contain 26 weekend days.
  EXPECT_NEAR(weekend / static_cast<double>(n), 26.0 / 92.0, 0.02);
}

std::set<int> top15_cells(const City& city, std::uint64_t seed) {
  const SyntheticTeacher teacher;
  const auto users = generate_population(1500, seed, city);
  std::map<int, int> counts;
  for (std::size_t u = 0; u < users.size(); ++u) {
    Rng rng(hash_all({seed, u, 1}));
    const auto t = materialize(users[u], teacher.generate_chain(users[u], u).tokens,
                               city, {}, rng);
    for (const auto& a : t.activities) ++counts[cell_index(*a.location)];
  }
  std::vector<std::pair<int, int>> v(counts.begin(), counts.end());
  std::stable_sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.second > b.second; });
  std::set<int> top;
  for (std::size_t i = 0; i < 15 && i < v.size(); ++i) top.insert(v[i].first);
  return top;
}

TEST(City, DifferentSeedsGiveDifferentTopCells) {
  const auto a = top15_cells(generate_city(21, 60, "alpha"), 1);
  const auto b = top15_cells(generate_city(22, 60, "beta"), 1);
  EXPECT_NE(a, b);
  std::vector<int> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  EXPECT_LT(common.size(), 15u);
}

}  // namespace
}  // namespace trailcache

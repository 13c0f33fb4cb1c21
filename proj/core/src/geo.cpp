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

#include "trailcache/geo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "trailcache/errors.hpp"
#include "trailcache/jsonio.hpp"

namespace trailcache {

namespace {

double clamp_coord(double v) { return std::clamp(v, 0.0, kCityExtentKm); }

}  // namespace

void City::rebuild_index() {
  for (auto& v : by_kind) v.clear();
  for (std::size_t i = 0; i < pois.size(); ++i) {
    by_kind[kind_index(pois[i].category)].push_back(i);
  }
}

bool City::operator==(const City& other) const {
  return city_id == other.city_id && seed == other.seed &&
         extent_km == other.extent_km && grid_km == other.grid_km &&
         pois == other.pois;
}

City generate_city(std::uint64_t seed, std::size_t pois_per_category,
                   std::string city_id) {
  if (pois_per_category < 20) {
    fail(ErrorCode::kInvalidArgument, "need at least 20 POIs per category");
  }
  City city;
  city.seed = seed;
  city.city_id = city_id.empty() ? "city-" + std::to_string(seed) : city_id;
  Rng rng(hash_all({seed, 0xc17ULL}));
  for (std::size_t k = 0; k < kKindCount; ++k) {
    // Category-specific clusters plus a uniform background share.
    const int n_clusters = 2 + static_cast<int>(rng.uniform_int(0, 3));
    std::vector<GeoPoint> centers;
    std::vector<double> spreads;
    for (int c = 0; c < n_clusters; ++c) {
      centers.push_back({rng.uniform(3.0, 27.0), rng.uniform(3.0, 27.0)});
      spreads.push_back(rng.uniform(1.5, 4.0));
    }
    for (std::size_t i = 0; i < pois_per_category; ++i) {
      Poi poi;
      poi.category = kind_from_index(k);
      if (rng.uniform() < 0.2) {
        poi.location = {rng.uniform(0.0, kCityExtentKm),
                        rng.uniform(0.0, kCityExtentKm)};
      } else {
        const auto c = static_cast<std::size_t>(rng.uniform_int(0, n_clusters - 1));
        const double x = rng.normal(centers[c].x, spreads[c]);
        const double y = rng.normal(centers[c].y, spreads[c]);
        poi.location = {clamp_coord(x), clamp_coord(y)};
      }
      poi.attractiveness = std::exp(rng.normal(0.0, 0.5));
      city.pois.push_back(poi);
    }
  }
  city.rebuild_index();
  return city;
}

void validate(const City& city) {
  for (const auto& p : city.pois) {
    if (!in_city_bounds(p.location)) fail(ErrorCode::kOutOfRange, "POI outside city");
    if (!(p.attractiveness > 0.0)) {
      fail(ErrorCode::kOutOfRange, "non-positive attractiveness");
    }
  }
  for (std::size_t k = 0; k < kKindCount; ++k) {
    if (city.by_kind[k].size() < 20) {
      fail(ErrorCode::kOutOfRange, "fewer than 20 POIs of kind " +
                                       std::string(kind_name(kind_from_index(k))));
    }
  }
}

void write_city(const std::filesystem::path& path, const City& city) {
  std::vector<nlohmann::json> records;
  records.push_back({{"record", "header"},
                     {"city_id", city.city_id},
                     {"seed", city.seed},
                     {"bounds", {city.extent_km, city.extent_km}},
                     {"grid_km", city.grid_km},
                     {"poi_count", city.pois.size()}});
  for (const auto& p : city.pois) {
    records.push_back({{"record", "poi"},
                       {"category", kind_name(p.category)},
                       {"location", p.location},
                       {"attractiveness", p.attractiveness}});
  }
  write_jsonl(path, records);
}

City read_city(const std::filesystem::path& path) {
  const auto records = read_jsonl(path);
  if (records.empty() || records[0].value("record", "") != "header") {
    fail(ErrorCode::kOutOfRange, path.string() + " lacks a city header");
  }
  City city;
  const auto& h = records[0];
  city.city_id = h.at("city_id").get<std::string>();
  city.seed = h.value("seed", std::uint64_t{0});
  city.extent_km = h.at("bounds").at(0).get<double>();
  city.grid_km = h.at("grid_km").get<double>();
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    Poi p;
    p.category = kind_from_name(r.at("category").get<std::string>());
    p.location = r.at("location").get<GeoPoint>();
    p.attractiveness = r.at("attractiveness").get<double>();
    city.pois.push_back(p);
  }
  city.rebuild_index();
  validate(city);
  return city;
}

int cell_index(const GeoPoint& p) {
  const int ix = std::clamp(static_cast<int>(std::floor(p.x)), 0, kGridCells - 1);
  const int iy = std::clamp(static_cast<int>(std::floor(p.y)), 0, kGridCells - 1);
  return iy * kGridCells + ix;
}

double default_band_tolerance(double target_km) {
  const auto [lo, hi] = distance_bin_bounds(distance_bin(target_km));
  return 0.5 * (hi - lo);
}

double gravity_weight(double attractiveness, double distance_km, double beta) {
  return attractiveness / std::pow(std::max(distance_km, 0.1), beta);
}

GravityChoice gravity_candidates(const GeoPoint& origin, ActivityKind kind,
                                 double target_km, const City& city,
                                 const GravityParams& params) {
  if (!(params.beta > 0.0)) fail(ErrorCode::kInvalidArgument, "beta must be > 0");
  const auto& pool = city.by_kind[kind_index(kind)];
  if (pool.empty()) {
    fail(ErrorCode::kNoPoiOfKind, std::string(kind_name(kind)) + " in " +
                                      city.city_id);
  }
  GravityChoice choice;
  double tol = params.band_tolerance_km.value_or(default_band_tolerance(target_km));
  for (int widen = 0; widen <= 3; ++widen, tol *= 2.0) {
    double total = 0.0;
    for (std::size_t idx : pool) {
      const double d = euclid_km(origin, city.pois[idx].location);
      if (std::abs(d - target_km) <= tol) {
        const double w = gravity_weight(city.pois[idx].attractiveness, d, params.beta);
        choice.poi_indices.push_back(idx);
        choice.probabilities.push_back(w);
        total += w;
      }
    }
    if (!choice.poi_indices.empty()) {
      for (double& p : choice.probabilities) p /= total;
      choice.tolerance_km = tol;
      return choice;
    }
  }
  std::size_t best = pool.front();
  double best_err = INFINITY;
  for (std::size_t idx : pool) {
    const double err =
        std::abs(euclid_km(origin, city.pois[idx].location) - target_km);
    if (err < best_err) {
      best_err = err;
      best = idx;
    }
  }
  choice.poi_indices = {best};
  choice.probabilities = {1.0};
  choice.tolerance_km = tol / 2.0;
  choice.nearest_fallback = true;
  return choice;
}

GeoPoint gravity_assign(const GeoPoint& origin, ActivityKind kind,
                        double target_km, const City& city,
                        const GravityParams& params, Rng& rng) {
  const GravityChoice choice =
      gravity_candidates(origin, kind, target_km, city, params);
  const std::size_t pick = choice.poi_indices.size() == 1
                               ? 0
                               : rng.categorical(choice.probabilities);
  return city.pois[choice.poi_indices[pick]].location;
}

Trajectory materialize(const SimulationContext& ctx, const TokenSequence& tokens,
                       const City& city, const GravityParams& params, Rng& rng) {
  Trajectory traj;
  traj.context = ctx;
  traj.activities = decode_tokens(tokens);
  GeoPoint prev = ctx.profile.home;
  for (Activity& a : traj.activities) {
    GeoPoint loc;
    if (a.kind == ActivityKind::kHome) {
      loc = ctx.profile.home;
    } else if (a.kind == ActivityKind::kWork) {
      loc = ctx.profile.workplace;
    } else {
      loc = gravity_assign(prev, a.kind, a.travel_km, city, params, rng);
    }
    a.location = loc;
    a.travel_km = std::min(euclid_km(prev, loc), kMaxTravelKm);
    prev = loc;
  }
  return traj;
}

std::vector<SimulationContext> generate_population(std::size_t n,
                                                   std::uint64_t seed,
                                                   const City& city,
                                                   const PopulationSpec& spec) {
  const Date first = parse_date(spec.first_date);
  const auto& homes = city.by_kind[kind_index(ActivityKind::kHome)];
  const auto& works = city.by_kind[kind_index(ActivityKind::kWork)];
  if (homes.empty() || works.empty()) {
    fail(ErrorCode::kNoPoiOfKind, "population needs home and work POIs");
  }
  constexpr std::array<std::array<int, 2>, 4> kBrackets = {
      {{18, 29}, {30, 44}, {45, 59}, {60, 80}}};
  Rng rng(hash_all({seed, 0x9e09ULL}));
  std::vector<SimulationContext> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Profile p;
    char id[48];
    std::snprintf(id, sizeof(id), "p%llx-%06zu",
                  static_cast<unsigned long long>(seed), i);
    p.user_id = id;
    const auto& br = kBrackets[rng.categorical(spec.age_bracket_probs)];
    p.age = static_cast<int>(rng.uniform_int(br[0], br[1]));
    p.income_level = static_cast<int>(rng.categorical(spec.income_probs));
    p.occupation = static_cast<int>(rng.categorical(spec.occupation_probs));
    auto near = [&](const std::vector<std::size_t>& pool) {
      const auto& c = city.pois[pool[static_cast<std::size_t>(rng.uniform_int(
          0, static_cast<std::int64_t>(pool.size()) - 1))]].location;
      return GeoPoint{clamp_coord(rng.normal(c.x, 0.5)),
                      clamp_coord(rng.normal(c.y, 0.5))};
    };
    p.home = near(homes);
    do {
      p.workplace = near(works);
    } while (euclid_km(p.home, p.workplace) < 0.1);
    const Date d{std::chrono::sys_days{first} +
                 std::chrono::days{rng.uniform_int(0, spec.days - 1)}};
    out.push_back(make_context(std::move(p), d, city.city_id));
  }
  return out;
}

}  // namespace trailcache

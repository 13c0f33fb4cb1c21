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

// Synthetic city, gravity-model placement of decoded activities, and the
// seeded population generator.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trailcache/domain.hpp"
#include "trailcache/rng.hpp"
#include "trailcache/tokens.hpp"

namespace trailcache {

inline constexpr int kGridCells = 30;  // per axis, 1 km cells

struct Poi {
  GeoPoint location;
  ActivityKind category = ActivityKind::kHome;
  double attractiveness = 1.0;
  bool operator==(const Poi&) const = default;
};

struct City {
  std::string city_id;
  std::uint64_t seed = 0;
  double extent_km = kCityExtentKm;
  double grid_km = 1.0;
  std::vector<Poi> pois;
  // POI indices per category, in POI order.
  std::array<std::vector<std::size_t>, kKindCount> by_kind;

  void rebuild_index();
  bool operator==(const City& other) const;
};

City generate_city(std::uint64_t seed, std::size_t pois_per_category,
                   std::string city_id = {});
void validate(const City& city);
void write_city(const std::filesystem::path& path, const City& city);
City read_city(const std::filesystem::path& path);

// Row-major index of the 1 km cell containing a point.
int cell_index(const GeoPoint& p);

struct GravityParams {
  double beta = 2.0;
  // Unset: half the width of the target distance's bin.
  std::optional<double> band_tolerance_km;
};

struct GravityChoice {
  std::vector<std::size_t> poi_indices;  // into City::pois
  std::vector<double> probabilities;     // sums to 1
  double tolerance_km = 0.0;             // band actually used
  bool nearest_fallback = false;
};

double default_band_tolerance(double target_km);
double gravity_weight(double attractiveness, double distance_km, double beta);

GravityChoice gravity_candidates(const GeoPoint& origin, ActivityKind kind,
                                 double target_km, const City& city,
                                 const GravityParams& params);
GeoPoint gravity_assign(const GeoPoint& origin, ActivityKind kind,
                        double target_km, const City& city,
                        const GravityParams& params, Rng& rng);

Trajectory materialize(const SimulationContext& ctx, const TokenSequence& tokens,
                       const City& city, const GravityParams& params, Rng& rng);

struct PopulationSpec {
  // Age brackets [18,29], [30,44], [45,59], [60,80], uniform inside each.
  std::array<double, 4> age_bracket_probs = {0.22, 0.28, 0.27, 0.23};
  std::array<double, 4> income_probs = {0.25, 0.35, 0.28, 0.12};
  std::array<double, 12> occupation_probs = {0.12, 0.10, 0.09, 0.08,
                                             0.09, 0.08, 0.08, 0.07,
                                             0.10, 0.07, 0.07, 0.05};
  std::string first_date = "2019-10-01";
  int days = 92;
};

std::vector<SimulationContext> generate_population(std::size_t n,
                                                   std::uint64_t seed,
                                                   const City& city,
                                                   const PopulationSpec& spec = {});

}  // namespace trailcache

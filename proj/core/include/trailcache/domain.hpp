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

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trailcache {

inline constexpr std::size_t kLatentDim = 64;
inline constexpr std::size_t kKindCount = 8;
inline constexpr int kMinActivities = 2;
inline constexpr int kMaxActivities = 9;
inline constexpr double kCityExtentKm = 30.0;
inline constexpr double kMaxTravelKm = 50.0;
inline constexpr int kMinutesPerDay = 1440;

enum class ActivityKind : std::uint8_t {
  kHome = 0,
  kWork,
  kDining,
  kShopping,
  kLeisure,
  kErrand,
  kHealth,
  kSocial,
};

std::string_view kind_name(ActivityKind kind);
ActivityKind kind_from_name(std::string_view name);
inline std::size_t kind_index(ActivityKind kind) {
  return static_cast<std::size_t>(kind);
}
ActivityKind kind_from_index(std::size_t index);

struct GeoPoint {
  double x = 0.0;  // km east of the city origin
  double y = 0.0;  // km north of the city origin
  bool operator==(const GeoPoint&) const = default;
};

double euclid_km(const GeoPoint& a, const GeoPoint& b);
bool in_city_bounds(const GeoPoint& p);

struct Profile {
  std::string user_id;
  int age = 18;
  int income_level = 0;
  int occupation = 0;
  GeoPoint home;
  GeoPoint workplace;
  bool operator==(const Profile&) const = default;
};

// Throws OutOfRange on any broken invariant.
void validate(const Profile& profile);

using Date = std::chrono::year_month_day;
std::string format_date(const Date& date);
Date parse_date(std::string_view text);
bool date_is_weekend(const Date& date);

struct SimulationContext {
  Profile profile;
  Date date{};
  bool is_weekend = false;
  std::string city_id;
  bool operator==(const SimulationContext&) const = default;
};

SimulationContext make_context(Profile profile, const Date& date,
                               std::string city_id);
void validate(const SimulationContext& ctx);

// [age/80, income/3, one-hot occupation (12), is_weekend, home/30, work/30]
inline constexpr std::size_t kContextFeatureDim = 19;
using ContextFeatures = std::array<double, kContextFeatureDim>;

ContextFeatures context_features(const SimulationContext& ctx);
// (1 + cos) / 2 of the feature vectors, exactly 1.0 when they are equal.
double feature_similarity(const ContextFeatures& a, const ContextFeatures& b);
double context_similarity(const SimulationContext& a,
                          const SimulationContext& b);

struct Activity {
  int start_minute = 0;
  ActivityKind kind = ActivityKind::kHome;
  double travel_km = 0.0;
  std::optional<GeoPoint> location;
  bool operator==(const Activity&) const = default;
};

void validate(const Activity& activity);

struct Trajectory {
  SimulationContext context;
  std::vector<Activity> activities;
  bool operator==(const Trajectory&) const = default;
};

// The single validator for the trajectory invariant; returns an empty
// string when the trajectory is valid, otherwise the first problem found.
std::string trajectory_problem(const Trajectory& trajectory);
void validate(const Trajectory& trajectory);
bool times_strictly_increasing(std::span<const Activity> activities);

struct LatentStep {
  std::array<double, kLatentDim> v{};
  bool operator==(const LatentStep&) const = default;
};

double norm(const LatentStep& step);
double cosine(std::span<const double> a, std::span<const double> b);
void validate(const LatentStep& step);

using NodeId = std::uint64_t;
using ChainId = std::uint64_t;

struct StepSource {
  enum class Kind : std::uint8_t { kGenerated, kCached, kSpliced };
  Kind kind = Kind::kGenerated;
  NodeId node = 0;  // meaningful for kCached and kSpliced
  bool operator==(const StepSource&) const = default;
};

struct ReasoningChain {
  SimulationContext context;
  std::vector<LatentStep> steps;
  std::vector<StepSource> provenance;
};

void validate(const ReasoningChain& chain);

}  // namespace trailcache

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

#include "trailcache/domain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "trailcache/errors.hpp"

namespace trailcache {

namespace {

constexpr std::array<std::string_view, kKindCount> kKindNames = {
    "home", "work", "dining", "shopping", "leisure", "errand", "health",
    "social"};

}  // namespace

std::string_view kind_name(ActivityKind kind) {
  return kKindNames.at(kind_index(kind));
}

ActivityKind kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<ActivityKind>(i);
  }
  fail(ErrorCode::kOutOfRange, "unknown activity kind '" + std::string(name) +
                                   "'");
}

ActivityKind kind_from_index(std::size_t index) {
  if (index >= kKindCount) {
    fail(ErrorCode::kOutOfRange, "kind index " + std::to_string(index));
  }
  return static_cast<ActivityKind>(index);
}

double euclid_km(const GeoPoint& a, const GeoPoint& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

bool in_city_bounds(const GeoPoint& p) {
  return p.x >= 0.0 && p.x <= kCityExtentKm && p.y >= 0.0 &&
         p.y <= kCityExtentKm;
}

void validate(const Profile& profile) {
  if (profile.age < 18 || profile.age > 80) {
    fail(ErrorCode::kOutOfRange, "age " + std::to_string(profile.age));
  }
  if (profile.income_level < 0 || profile.income_level > 3) {
    fail(ErrorCode::kOutOfRange,
         "income_level " + std::to_string(profile.income_level));
  }
  if (profile.occupation < 0 || profile.occupation > 11) {
    fail(ErrorCode::kOutOfRange,
         "occupation " + std::to_string(profile.occupation));
  }
  if (!in_city_bounds(profile.home) || !in_city_bounds(profile.workplace)) {
    fail(ErrorCode::kOutOfRange, "home/workplace outside the city bounds");
  }
  if (euclid_km(profile.home, profile.workplace) < 0.1) {
    fail(ErrorCode::kOutOfRange, "home and workplace closer than 0.1 km");
  }
}

std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u",
                static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()),
                static_cast<unsigned>(date.day()));
  return buf;
}

Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  const std::string s(text);
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
    fail(ErrorCode::kOutOfRange, "malformed date '" + s + "'");
  }
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) fail(ErrorCode::kOutOfRange, "invalid date '" + s + "'");
  return date;
}

bool date_is_weekend(const Date& date) {
  const std::chrono::weekday wd{std::chrono::sys_days{date}};
  return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

SimulationContext make_context(Profile profile, const Date& date,
                               std::string city_id) {
  SimulationContext ctx;
  ctx.profile = std::move(profile);
  ctx.date = date;
  ctx.is_weekend = date_is_weekend(date);
  ctx.city_id = std::move(city_id);
  return ctx;
}

void validate(const SimulationContext& ctx) {
  validate(ctx.profile);
  if (!ctx.date.ok()) fail(ErrorCode::kOutOfRange, "invalid date");
  if (ctx.is_weekend != date_is_weekend(ctx.date)) {
    fail(ErrorCode::kOutOfRange,
         "is_weekend inconsistent with " + format_date(ctx.date));
  }
}

ContextFeatures context_features(const SimulationContext& ctx) {
  const Profile& p = ctx.profile;
  ContextFeatures f{};
  f[0] = p.age / 80.0;
  f[1] = p.income_level / 3.0;
  f[2 + static_cast<std::size_t>(p.occupation)] = 1.0;
  f[14] = ctx.is_weekend ? 1.0 : 0.0;
  f[15] = p.home.x / kCityExtentKm;
  f[16] = p.home.y / kCityExtentKm;
  f[17] = p.workplace.x / kCityExtentKm;
  f[18] = p.workplace.y / kCityExtentKm;
  return f;
}

double feature_similarity(const ContextFeatures& a, const ContextFeatures& b) {
  if (a == b) return 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < kContextFeatureDim; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na * nb);
  if (denom == 0.0) return 0.5;
  const double c = std::clamp(dot / denom, -1.0, 1.0);
  return (1.0 + c) / 2.0;
}

double context_similarity(const SimulationContext& a,
                          const SimulationContext& b) {
  return feature_similarity(context_features(a), context_features(b));
}

void validate(const Activity& activity) {
  if (activity.start_minute < 0 || activity.start_minute >= kMinutesPerDay) {
    fail(ErrorCode::kOutOfRange,
         "start_minute " + std::to_string(activity.start_minute));
  }
  if (!(activity.travel_km >= 0.0 && activity.travel_km <= kMaxTravelKm)) {
    fail(ErrorCode::kOutOfRange,
         "travel_km " + std::to_string(activity.travel_km));
  }
  if (kind_index(activity.kind) >= kKindCount) {
    fail(ErrorCode::kOutOfRange, "activity kind");
  }
}

bool times_strictly_increasing(std::span<const Activity> activities) {
  for (std::size_t i = 1; i < activities.size(); ++i) {
    if (activities[i].start_minute <= activities[i - 1].start_minute) {
      return false;
    }
  }
  return true;
}

std::string trajectory_problem(const Trajectory& trajectory) {
  const auto n = static_cast<int>(trajectory.activities.size());
  if (n < kMinActivities || n > kMaxActivities) {
    return "activity count " + std::to_string(n) + " outside [2, 9]";
  }
  for (const Activity& a : trajectory.activities) {
    if (a.start_minute < 0 || a.start_minute >= kMinutesPerDay) {
      return "start_minute out of range";
    }
    if (!(a.travel_km >= 0.0 && a.travel_km <= kMaxTravelKm)) {
      return "travel_km out of range";
    }
    if (!a.location) return "activity without a location";
  }
  if (!times_strictly_increasing(trajectory.activities)) {
    return "start minutes not strictly increasing";
  }
  return {};
}

void validate(const Trajectory& trajectory) {
  const std::string problem = trajectory_problem(trajectory);
  if (!problem.empty()) fail(ErrorCode::kOutOfRange, problem);
}

double norm(const LatentStep& step) {
  double s = 0.0;
  for (double x : step.v) s += x * x;
  return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::kDimensionMismatch, "cosine of unequal lengths");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na * nb);
  if (denom == 0.0) return 0.0;
  return std::clamp(dot / denom, -1.0, 1.0);
}

void validate(const LatentStep& step) {
  for (double x : step.v) {
    if (!std::isfinite(x)) fail(ErrorCode::kOutOfRange, "non-finite latent");
  }
  const double n = norm(step);
  if (!(n > 0.0 && n <= 16.0)) {
    fail(ErrorCode::kOutOfRange, "latent norm " + std::to_string(n));
  }
}

void validate(const ReasoningChain& chain) {
  const auto n = static_cast<int>(chain.steps.size());
  if (n < kMinActivities) {
    fail(ErrorCode::kChainTooShort, std::to_string(n) + " steps");
  }
  if (n > kMaxActivities) {
    fail(ErrorCode::kChainTooLong, std::to_string(n) + " steps");
  }
  if (chain.provenance.size() != chain.steps.size()) {
    fail(ErrorCode::kDimensionMismatch, "provenance length");
  }
  for (const auto& s : chain.steps) validate(s);
}

}  // namespace trailcache

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

// Helpers shared by the unit tests: random but seeded inputs.

#include <cmath>
#include <string>
#include <vector>

#include "trailcache/domain.hpp"
#include "trailcache/rng.hpp"
#include "trailcache/teacher.hpp"

namespace trailcache::testing {

inline SimulationContext random_context(Rng& rng, int index) {
  Profile p;
  p.user_id = "t" + std::to_string(index);
  p.age = static_cast<int>(rng.uniform_int(18, 80));
  p.income_level = static_cast<int>(rng.uniform_int(0, 3));
  p.occupation = static_cast<int>(rng.uniform_int(0, 11));
  p.home = {rng.uniform(0.0, 30.0), rng.uniform(0.0, 30.0)};
  p.workplace = {rng.uniform(0.0, 30.0), rng.uniform(0.0, 30.0)};
  const Date d{std::chrono::sys_days{std::chrono::year{2019} / 10 / 1} +
               std::chrono::days{rng.uniform_int(0, 91)}};
  return make_context(p, d, "test-city");
}

inline LatentStep random_step(Rng& rng) {
  LatentStep s;
  for (double& v : s.v) v = rng.uniform(-1.0, 1.0);
  return s;
}

// Located trajectory with strictly increasing times.
inline Trajectory random_trajectory(Rng& rng, int index) {
  Trajectory t;
  t.context = random_context(rng, index);
  const int n = static_cast<int>(rng.uniform_int(2, 9));
  int minute = static_cast<int>(rng.uniform_int(0, 120));
  for (int i = 0; i < n; ++i) {
    Activity a;
    a.start_minute = minute;
    a.kind = kind_from_index(static_cast<std::size_t>(rng.uniform_int(0, 7)));
    a.location = GeoPoint{rng.uniform(0.0, 30.0), rng.uniform(0.0, 30.0)};
    t.activities.push_back(a);
    minute += static_cast<int>(rng.uniform_int(1, 150));
  }
  return t;
}

inline double l2(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

}  // namespace trailcache::testing

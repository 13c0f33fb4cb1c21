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

#include "trailcache/jsonio.hpp"

#include <fstream>

#include "trailcache/errors.hpp"

namespace trailcache {

using nlohmann::json;

void to_json(json& j, const GeoPoint& p) { j = json::array({p.x, p.y}); }

void from_json(const json& j, GeoPoint& p) {
  if (!j.is_array() || j.size() != 2) {
    fail(ErrorCode::kOutOfRange, "GeoPoint must be an [x, y] array");
  }
  p.x = j[0].get<double>();
  p.y = j[1].get<double>();
}

void to_json(json& j, const Profile& p) {
  j = json{{"user_id", p.user_id},       {"age", p.age},
           {"income_level", p.income_level}, {"occupation", p.occupation},
           {"home", p.home},             {"workplace", p.workplace}};
}

void from_json(const json& j, Profile& p) {
  p.user_id = j.at("user_id").get<std::string>();
  p.age = j.at("age").get<int>();
  p.income_level = j.at("income_level").get<int>();
  p.occupation = j.at("occupation").get<int>();
  p.home = j.at("home").get<GeoPoint>();
  p.workplace = j.at("workplace").get<GeoPoint>();
  validate(p);
}

void to_json(json& j, const SimulationContext& c) {
  j = json{{"profile", c.profile},
           {"date", format_date(c.date)},
           {"is_weekend", c.is_weekend},
           {"city_id", c.city_id}};
}

void from_json(const json& j, SimulationContext& c) {
  c.profile = j.at("profile").get<Profile>();
  c.date = parse_date(j.at("date").get<std::string>());
  c.is_weekend = j.at("is_weekend").get<bool>();
  c.city_id = j.at("city_id").get<std::string>();
  validate(c);
}

void to_json(json& j, const Activity& a) {
  j = json{{"start_minute", a.start_minute},
           {"kind", kind_name(a.kind)},
           {"travel_km", a.travel_km}};
  j["location"] = a.location ? json(*a.location) : json(nullptr);
}

void from_json(const json& j, Activity& a) {
  a.start_minute = j.at("start_minute").get<int>();
  a.kind = kind_from_name(j.at("kind").get<std::string>());
  a.travel_km = j.at("travel_km").get<double>();
  if (j.contains("location") && !j.at("location").is_null()) {
    a.location = j.at("location").get<GeoPoint>();
  } else {
    a.location.reset();
  }
  validate(a);
}

void to_json(json& j, const Trajectory& t) {
  j = json{{"context", t.context}, {"activities", t.activities}};
}

void from_json(const json& j, Trajectory& t) {
  t.context = j.at("context").get<SimulationContext>();
  t.activities = j.at("activities").get<std::vector<Activity>>();
}

void to_json(json& j, const TeacherPolicy& p) {
  json transitions = json::array();
  for (std::size_t c = 0; c < kOccupationClasses; ++c) {
    for (int weekend = 0; weekend < 2; ++weekend) {
      transitions.push_back({{"occupation_class", c},
                             {"is_weekend", weekend == 1},
                             {"matrix", p.transitions[c * 2 + weekend]}});
    }
  }
  json gaps = json::object();
  json dists = json::object();
  for (std::size_t k = 0; k < kKindCount; ++k) {
    const std::string name(kind_name(kind_from_index(k)));
    gaps[name] = {{"mean_min", p.gaps[k].mean_min}, {"sd_min", p.gaps[k].sd_min}};
    dists[name] = {{"median_km", p.distances[k].median_km},
                   {"sigma", p.distances[k].sigma}};
  }
  j = json{{"kinds", {"home", "work", "dining", "shopping", "leisure",
                      "errand", "health", "social"}},
           {"transitions", transitions},
           {"gap_params", gaps},
           {"distance_params", dists},
           {"noise_amp", p.noise_amp},
           {"min_gap_min", p.min_gap_min},
           {"first_start_max_min", p.first_start_max_min}};
}

void from_json(const json& j, TeacherPolicy& p) {
  p = TeacherPolicy{};
  const auto& transitions = j.at("transitions");
  if (transitions.size() != kOccupationClasses * 2) {
    fail(ErrorCode::kOutOfRange, "policy needs 6 transition matrices");
  }
  for (const auto& t : transitions) {
    const auto c = t.at("occupation_class").get<std::size_t>();
    const bool weekend = t.at("is_weekend").get<bool>();
    if (c >= kOccupationClasses) fail(ErrorCode::kOutOfRange, "occupation_class");
    p.transitions[c * 2 + (weekend ? 1 : 0)] =
        t.at("matrix").get<TransitionMatrix>();
  }
  for (std::size_t k = 0; k < kKindCount; ++k) {
    const std::string name(kind_name(kind_from_index(k)));
    const auto& g = j.at("gap_params").at(name);
    p.gaps[k] = {g.at("mean_min").get<double>(), g.at("sd_min").get<double>()};
    const auto& d = j.at("distance_params").at(name);
    p.distances[k] = {d.at("median_km").get<double>(), d.at("sigma").get<double>()};
  }
  p.noise_amp = j.value("noise_amp", 0.05);
  p.min_gap_min = j.value("min_gap_min", 60);
  p.first_start_max_min = j.value("first_start_max_min", 120);
  validate(p);
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<json>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIoFailure, "cannot open " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) fail(ErrorCode::kIoFailure, "cannot write " + path.string());
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      fail(ErrorCode::kOutOfRange, path.string() + ":" +
                                       std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace trailcache

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

// JSON mappings for the record types. GeoPoint travels as [x, y].

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trailcache/domain.hpp"
#include "trailcache/teacher.hpp"

namespace trailcache {

void to_json(nlohmann::json& j, const GeoPoint& p);
void from_json(const nlohmann::json& j, GeoPoint& p);
void to_json(nlohmann::json& j, const Profile& p);
void from_json(const nlohmann::json& j, Profile& p);
void to_json(nlohmann::json& j, const SimulationContext& c);
void from_json(const nlohmann::json& j, SimulationContext& c);
void to_json(nlohmann::json& j, const Activity& a);
void from_json(const nlohmann::json& j, Activity& a);
void to_json(nlohmann::json& j, const Trajectory& t);
void from_json(const nlohmann::json& j, Trajectory& t);
void to_json(nlohmann::json& j, const TeacherPolicy& p);
void from_json(const nlohmann::json& j, TeacherPolicy& p);

// One JSON object per line. Readers raise IoFailure for unreadable files
// and OutOfRange for malformed records.
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<nlohmann::json>& records);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

template <typename T>
std::vector<T> read_records(const std::filesystem::path& path) {
  std::vector<T> out;
  for (const auto& j : read_jsonl(path)) out.push_back(j.template get<T>());
  return out;
}

template <typename T>
void write_records(const std::filesystem::path& path,
                   const std::vector<T>& items) {
  std::vector<nlohmann::json> records;
  records.reserve(items.size());
  for (const auto& item : items) records.emplace_back(item);
  write_jsonl(path, records);
}

}  // namespace trailcache

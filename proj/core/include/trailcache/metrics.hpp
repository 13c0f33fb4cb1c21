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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trailcache/domain.hpp"
#include "trailcache/geo.hpp"
#include "trailcache/teacher.hpp"

namespace trailcache {

struct Histogram {
  std::vector<double> edges;  // size = bins + 1, strictly increasing
  std::vector<double> mass;   // size = bins

  std::size_t bins() const { return mass.size(); }
  void normalize();
};

// Bin layouts are versioned so that reported JSD values stay comparable.
inline constexpr int kHistogramLayoutVersion = 1;
std::vector<double> duration_edges();  // 24 bins of 60 min
std::vector<double> jump_edges();      // the 10 token-grammar distance bins
std::vector<double> radius_edges();    // 20 linear bins over [0, 15] km

// Values beyond the outer edges land in the first or last bin.
Histogram make_histogram(std::span<const double> values,
                         std::vector<double> edges);

double jsd(const Histogram& p, const Histogram& q);
// JSD of two unnormalized sparse distributions over their union support.
template <typename Key>
double jsd_sparse(const std::map<Key, double>& p, const std::map<Key, double>& q);

double radius_of_gyration(const Trajectory& traj);
std::vector<double> stay_durations(const Trajectory& traj);
std::vector<double> jump_lengths(const Trajectory& traj);
double mean_stay_duration(const Trajectory& traj);

Histogram locfreq_distribution(std::span<const Trajectory> trajs);
using OdPair = std::pair<int, int>;
std::map<OdPair, double> od_distribution(std::span<const Trajectory> trajs);
double od_similarity(std::span<const Trajectory> a,
                     std::span<const Trajectory> b);

struct CoverageCell {
  int cell = 0;
  long long reference_count = 0;
  long long generated_count = 0;
};
std::vector<CoverageCell> top_k_coverage(std::span<const Trajectory> reference,
                                         std::span<const Trajectory> generated,
                                         std::size_t k = 15);

struct QualityReport {
  double distance_jsd = 0.0;  // jump lengths
  double radius_jsd = 0.0;
  double duration_jsd = 0.0;  // pooled stay durations (headline)
  double mean_duration_jsd = 0.0;  // one mean stay duration per trajectory
  double locfreq_jsd = 0.0;
  double od_jsd = 0.0;
};
QualityReport compare_quality(std::span<const Trajectory> reference,
                              std::span<const Trajectory> generated);
void write_quality_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, QualityReport>>& rows,
                       const std::string& config_hash);

enum class Violation : std::uint8_t {
  kMonotonicity,
  kFirstActivity,
  kWeekendWork,
  kRepeat,
  kJump,
};
std::string_view violation_name(Violation v);

struct AuditResult {
  std::vector<Violation> violations;
  bool passed() const { return violations.empty(); }
  bool has(Violation v) const;
};

AuditResult plausibility_audit(const Trajectory& traj);

enum class Strategy : std::uint8_t { kFollowed, kExplored, kGenerated };
std::string_view strategy_name(Strategy s);
Strategy strategy_from_name(std::string_view name);

struct EfficiencyRecord {
  std::string user_id;
  Strategy strategy = Strategy::kGenerated;
  double wall_ms = 0.0;
  double simulated_backend_s = 0.0;
  long long output_tokens = 0;
  long long charged_steps = 0;
};

void write_efficiency_csv(const std::filesystem::path& path,
                          std::span<const EfficiencyRecord> records);
std::vector<EfficiencyRecord> read_efficiency_csv(
    const std::filesystem::path& path);

struct EfficiencyReport {
  double inference_time_s_per_traj = 0.0;
  double tokens_per_s = 0.0;
  double throughput_traj_per_s = 0.0;
  double cost_api_usd_per_traj = 0.0;
  double cost_gpu_usd_per_traj = 0.0;
  double hit_rate = 0.0;
  std::size_t followed = 0;
  std::size_t explored = 0;
  std::size_t generated = 0;
};

// `sequential` drives the time, token and cost figures; throughput comes from
// a batch run's elapsed seconds when one is supplied.
EfficiencyReport measure_efficiency(std::span<const EfficiencyRecord> sequential,
                                    const BackendCostModel& cost,
                                    std::size_t batch_trajectories = 0,
                                    double batch_elapsed_s = 0.0);

std::vector<std::size_t> k_medoids(std::span<const ContextFeatures> points,
                                   std::size_t k, std::uint64_t seed,
                                   std::vector<std::size_t>* assignment = nullptr);

// Archetype baseline: users are clustered on context features, a small
// teacher pool is generated for each medoid, and every user copies a random
// member of its group's pool.
std::vector<Trajectory> group_baseline(std::span<const SimulationContext> users,
                                       std::size_t archetype_count,
                                       std::size_t samples_per_group,
                                       std::uint64_t seed,
                                       const SyntheticTeacher& teacher,
                                       const City& city,
                                       const GravityParams& gravity = {});

// ---- template definition ----

template <typename Key>
double jsd_sparse(const std::map<Key, double>& p, const std::map<Key, double>& q) {
  double sp = 0.0;
  double sq = 0.0;
  for (const auto& [k, v] : p) sp += v;
  for (const auto& [k, v] : q) sq += v;
  if (!(sp > 0.0) || !(sq > 0.0)) return sp == sq ? 0.0 : 1.0;
  auto term = [](double a, double m) { return a > 0.0 ? a * std::log2(a / m) : 0.0; };
  double total = 0.0;
  auto ip = p.begin();
  auto iq = q.begin();
  // Merge walk over the union of keys.
  while (ip != p.end() || iq != q.end()) {
    double a = 0.0;
    double b = 0.0;
    if (iq == q.end() || (ip != p.end() && ip->first < iq->first)) {
      a = ip++->second / sp;
    } else if (ip == p.end() || iq->first < ip->first) {
      b = iq++->second / sq;
    } else {
      a = ip++->second / sp;
      b = iq++->second / sq;
    }
    const double m = 0.5 * (a + b);
    total += 0.5 * term(a, m) + 0.5 * term(b, m);
  }
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace trailcache

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

#include "trailcache/metrics.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "trailcache/errors.hpp"
#include "trailcache/rng.hpp"
#include "trailcache/tokens.hpp"

namespace trailcache {

void Histogram::normalize() {
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (total > 0.0) {
    for (double& m : mass) m /= total;
  }
}

std::vector<double> duration_edges() {
  std::vector<double> e;
  for (int i = 0; i <= 24; ++i) e.push_back(60.0 * i);
  return e;
}

std::vector<double> jump_edges() {
  std::vector<double> e{0.0};
  for (int b = 0; b < static_cast<int>(kDistanceBins); ++b) e.push_back(distance_bin_bounds(b).second);
  return e;
}

std::vector<double> radius_edges() {
  std::vector<double> e;
  for (int i = 0; i <= 20; ++i) e.push_back(0.75 * i);
  return e;
}

Histogram make_histogram(std::span<const double> values,
                         std::vector<double> edges) {
  if (edges.size() < 2) fail(ErrorCode::kInvalidArgument, "histogram needs 2 edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) {
      fail(ErrorCode::kInvalidArgument, "edges must be strictly increasing");
    }
  }
  Histogram h;
  h.mass.assign(edges.size() - 1, 0.0);
  for (double v : values) {
    // upper_bound gives the first edge > v; bin i covers [e_i, e_{i+1}).
    const auto it = std::upper_bound(edges.begin(), edges.end(), v);
    const auto raw = static_cast<long>(it - edges.begin()) - 1;
    const auto bin = std::clamp<long>(raw, 0, static_cast<long>(h.mass.size()) - 1);
    h.mass[static_cast<std::size_t>(bin)] += 1.0;
  }
  h.edges = std::move(edges);
  h.normalize();
  return h;
}

double jsd(const Histogram& p, const Histogram& q) {
  if (p.edges != q.edges || p.mass.size() != q.mass.size()) {
    fail(ErrorCode::kEdgeMismatch, "histograms have different edges");
  }
  std::map<std::size_t, double> a;
  std::map<std::size_t, double> b;
  for (std::size_t i = 0; i < p.mass.size(); ++i) {
    if (p.mass[i] < 0.0 || q.mass[i] < 0.0) {
      fail(ErrorCode::kOutOfRange, "negative histogram mass");
    }
    if (p.mass[i] > 0.0) a[i] = p.mass[i];
    if (q.mass[i] > 0.0) b[i] = q.mass[i];
  }
  return jsd_sparse(a, b);
}

namespace {

const GeoPoint& located(const Activity& a) {
  if (!a.location) fail(ErrorCode::kGeolocationFailure, "activity has no location");
  return *a.location;
}

}  // namespace

double radius_of_gyration(const Trajectory& traj) {
  if (traj.activities.empty()) fail(ErrorCode::kTooFewActivities, "empty trajectory");
  double cx = 0.0;
  double cy = 0.0;
  for (const auto& a : traj.activities) {
    cx += located(a).x;
    cy += located(a).y;
  }
  const double n = static_cast<double>(traj.activities.size());
  cx /= n;
  cy /= n;
  double acc = 0.0;
  for (const auto& a : traj.activities) {
    const double dx = a.location->x - cx;
    const double dy = a.location->y - cy;
    acc += dx * dx + dy * dy;
  }
  return std::sqrt(acc / n);
}

std::vector<double> stay_durations(const Trajectory& traj) {
  if (traj.activities.size() < 2) {
    fail(ErrorCode::kTooFewActivities, "stay durations need 2 activities");
  }
  std::vector<double> out;
  for (std::size_t i = 1; i < traj.activities.size(); ++i) {
    out.push_back(traj.activities[i].start_minute -
                  traj.activities[i - 1].start_minute);
  }
  return out;
}

double mean_stay_duration(const Trajectory& traj) {
  const auto d = stay_durations(traj);
  double sum = 0.0;
  for (double v : d) sum += v;
  return sum / static_cast<double>(d.size());
}

std::vector<double> jump_lengths(const Trajectory& traj) {
  if (traj.activities.size() < 2) {
    fail(ErrorCode::kTooFewActivities, "jump lengths need 2 activities");
  }
  std::vector<double> out;
  for (std::size_t i = 1; i < traj.activities.size(); ++i) {
    out.push_back(euclid_km(located(traj.activities[i - 1]),
                            located(traj.activities[i])));
  }
  return out;
}

Histogram locfreq_distribution(std::span<const Trajectory> trajs) {
  if (trajs.empty()) fail(ErrorCode::kEmptyRun, "no trajectories");
  Histogram h;
  const int cells = kGridCells * kGridCells;
  for (int i = 0; i <= cells; ++i) h.edges.push_back(i);
  h.mass.assign(cells, 0.0);
  for (const auto& t : trajs) {
    for (const auto& a : t.activities) h.mass[cell_index(located(a))] += 1.0;
  }
  h.normalize();
  return h;
}

std::map<OdPair, double> od_distribution(std::span<const Trajectory> trajs) {
  std::map<OdPair, double> out;
  for (const auto& t : trajs) {
    for (std::size_t i = 1; i < t.activities.size(); ++i) {
      out[{cell_index(located(t.activities[i - 1])),
           cell_index(located(t.activities[i]))}] += 1.0;
    }
  }
  return out;
}

double od_similarity(std::span<const Trajectory> a,
                     std::span<const Trajectory> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::kEmptyRun, "no trajectories");
  return jsd_sparse(od_distribution(a), od_distribution(b));
}

std::vector<CoverageCell> top_k_coverage(std::span<const Trajectory> reference,
                                         std::span<const Trajectory> generated,
                                         std::size_t k) {
  if (reference.empty() || generated.empty()) {
    fail(ErrorCode::kEmptyRun, "no trajectories");
  }
  const int cells = kGridCells * kGridCells;
  std::vector<long long> ref(cells, 0);
  std::vector<long long> gen(cells, 0);
  for (const auto& t : reference) {
    for (const auto& a : t.activities) ++ref[cell_index(located(a))];
  }
  for (const auto& t : generated) {
    for (const auto& a : t.activities) ++gen[cell_index(located(a))];
  }
  std::vector<int> order(cells);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return ref[x] > ref[y]; });
  std::vector<CoverageCell> out;
  for (std::size_t i = 0; i < std::min<std::size_t>(k, order.size()); ++i) {
    const int c = order[i];
    out.push_back({c, ref[c], gen[c]});
  }
  return out;
}

namespace {

template <typename F>
std::vector<double> pooled(std::span<const Trajectory> trajs, F per_traj) {
  std::vector<double> out;
  for (const auto& t : trajs) {
    const auto v = per_traj(t);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace

QualityReport compare_quality(std::span<const Trajectory> reference,
                              std::span<const Trajectory> generated) {
  if (reference.empty() || generated.empty()) {
    fail(ErrorCode::kEmptyRun, "no trajectories");
  }
  QualityReport r;
  auto radii = [](std::span<const Trajectory> ts) {
    std::vector<double> out;
    for (const auto& t : ts) out.push_back(radius_of_gyration(t));
    return out;
  };
  r.distance_jsd = jsd(make_histogram(pooled(reference, jump_lengths), jump_edges()),
                       make_histogram(pooled(generated, jump_lengths), jump_edges()));
  r.radius_jsd = jsd(make_histogram(radii(reference), radius_edges()),
                     make_histogram(radii(generated), radius_edges()));
  r.duration_jsd =
      jsd(make_histogram(pooled(reference, stay_durations), duration_edges()),
          make_histogram(pooled(generated, stay_durations), duration_edges()));
  auto means = [](std::span<const Trajectory> ts) {
    std::vector<double> out;
    for (const auto& t : ts) out.push_back(mean_stay_duration(t));
    return out;
  };
  r.mean_duration_jsd = jsd(make_histogram(means(reference), duration_edges()),
                            make_histogram(means(generated), duration_edges()));
  r.locfreq_jsd = jsd(locfreq_distribution(reference), locfreq_distribution(generated));
  r.od_jsd = od_similarity(reference, generated);
  return r;
}

void write_quality_csv(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, QualityReport>>& rows,
                       const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << "# config_hash=" << config_hash << " histogram_layout="
      << kHistogramLayoutVersion << "\n";
  out << "method,distance_jsd,radius_jsd,duration_jsd,mean_duration_jsd,locfreq_jsd,od_jsd\n";
  out << std::setprecision(6);
  for (const auto& [name, r] : rows) {
    out << name << ',' << r.distance_jsd << ',' << r.radius_jsd << ','
        << r.duration_jsd << ',' << r.mean_duration_jsd << ',' << r.locfreq_jsd << ',' << r.od_jsd << "\n";
  }
}

std::string_view violation_name(Violation v) {
  switch (v) {
    case Violation::kMonotonicity: return "MonotonicityViolation";
    case Violation::kFirstActivity: return "FirstActivityViolation";
    case Violation::kWeekendWork: return "WeekendWorkViolation";
    case Violation::kRepeat: return "RepeatViolation";
    case Violation::kJump: return "JumpViolation";
  }
  return "?";
}

bool AuditResult::has(Violation v) const {
  return std::find(violations.begin(), violations.end(), v) != violations.end();
}

AuditResult plausibility_audit(const Trajectory& traj) {
  AuditResult r;
  const auto& acts = traj.activities;
  if (!times_strictly_increasing(acts)) r.violations.push_back(Violation::kMonotonicity);
  if (!acts.empty() && acts.front().kind != ActivityKind::kHome) {
    const bool near_home =
        acts.front().location &&
        euclid_km(*acts.front().location, traj.context.profile.home) <= 2.0;
    if (!near_home) r.violations.push_back(Violation::kFirstActivity);
  }
  if (traj.context.is_weekend &&
      std::any_of(acts.begin(), acts.end(),
                  [](const Activity& a) { return a.kind == ActivityKind::kWork; })) {
    r.violations.push_back(Violation::kWeekendWork);
  }
  for (std::size_t i = 1; i < acts.size(); ++i) {
    if (acts[i].kind == acts[i - 1].kind && acts[i].location == acts[i - 1].location) {
      r.violations.push_back(Violation::kRepeat);
      break;
    }
  }
  for (std::size_t i = 1; i < acts.size(); ++i) {
    if (acts[i].location && acts[i - 1].location &&
        euclid_km(*acts[i].location, *acts[i - 1].location) > kMaxTravelKm) {
      r.violations.push_back(Violation::kJump);
      break;
    }
  }
  return r;
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kFollowed: return "followed";
    case Strategy::kExplored: return "explored";
    case Strategy::kGenerated: return "generated";
  }
  return "?";
}

Strategy strategy_from_name(std::string_view name) {
  if (name == "followed") return Strategy::kFollowed;
  if (name == "explored") return Strategy::kExplored;
  if (name == "generated") return Strategy::kGenerated;
  fail(ErrorCode::kInvalidArgument, "unknown strategy " + std::string(name));
}

void write_efficiency_csv(const std::filesystem::path& path,
                          std::span<const EfficiencyRecord> records) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << "user_id,strategy,wall_ms,simulated_backend_s,output_tokens,charged_steps\n";
  out << std::setprecision(17);
  for (const auto& r : records) {
    out << r.user_id << ',' << strategy_name(r.strategy) << ',' << r.wall_ms << ','
        << r.simulated_backend_s << ',' << r.output_tokens << ','
        << r.charged_steps << "\n";
  }
}

std::vector<EfficiencyRecord> read_efficiency_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoFailure, "cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<EfficiencyRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[6];
    for (auto& field : f) std::getline(ss, field, ',');
    EfficiencyRecord r;
    r.user_id = f[0];
    r.strategy = strategy_from_name(f[1]);
    r.wall_ms = std::stod(f[2]);
    r.simulated_backend_s = std::stod(f[3]);
    r.output_tokens = std::stoll(f[4]);
    r.charged_steps = std::stoll(f[5]);
    out.push_back(std::move(r));
  }
  return out;
}

EfficiencyReport measure_efficiency(std::span<const EfficiencyRecord> sequential,
                                    const BackendCostModel& cost,
                                    std::size_t batch_trajectories,
                                    double batch_elapsed_s) {
  if (sequential.empty()) fail(ErrorCode::kEmptyRun, "no efficiency records");
  EfficiencyReport rep;
  double seconds = 0.0;
  long long tokens = 0;
  long long charged_tokens = 0;
  for (const auto& r : sequential) {
    seconds += r.wall_ms / 1000.0 + r.simulated_backend_s;
    tokens += r.output_tokens;
    charged_tokens += r.charged_steps * cost.tokens_per_activity;
    switch (r.strategy) {
      case Strategy::kFollowed: ++rep.followed; break;
      case Strategy::kExplored: ++rep.explored; break;
      case Strategy::kGenerated: ++rep.generated; break;
    }
  }
  const double n = static_cast<double>(sequential.size());
  rep.inference_time_s_per_traj = seconds / n;
  rep.tokens_per_s = seconds > 0.0 ? static_cast<double>(tokens) / seconds : 0.0;
  if (batch_trajectories > 0 && batch_elapsed_s > 0.0) {
    rep.throughput_traj_per_s = static_cast<double>(batch_trajectories) / batch_elapsed_s;
  } else if (seconds > 0.0) {
    rep.throughput_traj_per_s = n / seconds;
  }
  rep.cost_gpu_usd_per_traj = rep.inference_time_s_per_traj * cost.gpu_usd_per_hour / 3600.0;
  rep.cost_api_usd_per_traj = static_cast<double>(charged_tokens) *
                              (cost.api_usd_per_1m_output_tokens / 1e6) / n;
  rep.hit_rate = static_cast<double>(rep.followed + rep.explored) / n;
  return rep;
}

namespace {

double feature_distance(const ContextFeatures& a, const ContextFeatures& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

std::vector<std::size_t> k_medoids(std::span<const ContextFeatures> points,
                                   std::size_t k, std::uint64_t seed,
                                   std::vector<std::size_t>* assignment) {
  if (k == 0) fail(ErrorCode::kInvalidArgument, "archetype_count must be >= 1");
  if (points.empty()) fail(ErrorCode::kEmptyRun, "no points to cluster");
  k = std::min(k, points.size());
  Rng rng(hash_all({seed, 0x3ed0ULL}));
  // k-means++ style seeding with squared distances.
  std::vector<std::size_t> medoids{
      static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(points.size()) - 1))};
  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  while (medoids.size() < k) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = feature_distance(points[i], points[medoids.back()]);
      nearest[i] = std::min(nearest[i], d * d);
    }
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    if (!(total > 0.0)) break;  // fewer distinct points than k
    medoids.push_back(rng.categorical(nearest));
  }
  std::vector<std::size_t> assign(points.size(), 0);
  for (int iter = 0; iter < 20; ++iter) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < medoids.size(); ++m) {
        const double d = feature_distance(points[i], points[medoids[m]]);
        if (d < best) {
          best = d;
          assign[i] = m;
        }
      }
    }
    bool changed = false;
    for (std::size_t m = 0; m < medoids.size(); ++m) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (assign[i] == m) members.push_back(i);
      }
      std::size_t best_i = medoids[m];
      double best_cost = std::numeric_limits<double>::infinity();
      for (std::size_t c : members) {
        double cost = 0.0;
        for (std::size_t o : members) cost += feature_distance(points[c], points[o]);
        if (cost < best_cost) {
          best_cost = cost;
          best_i = c;
        }
      }
      if (best_i != medoids[m]) {
        medoids[m] = best_i;
        changed = true;
      }
    }
    if (!changed) break;
  }
  if (assignment) *assignment = std::move(assign);
  return medoids;
}

std::vector<Trajectory> group_baseline(std::span<const SimulationContext> users,
                                       std::size_t archetype_count,
                                       std::size_t samples_per_group,
                                       std::uint64_t seed,
                                       const SyntheticTeacher& teacher,
                                       const City& city,
                                       const GravityParams& gravity) {
  if (samples_per_group == 0) {
    fail(ErrorCode::kInvalidArgument, "samples_per_group must be >= 1");
  }
  std::vector<ContextFeatures> feats;
  for (const auto& u : users) feats.push_back(context_features(u));
  std::vector<std::size_t> assign;
  const auto medoids = k_medoids(feats, archetype_count, seed, &assign);

  std::vector<std::vector<Trajectory>> pools(medoids.size());
  for (std::size_t g = 0; g < medoids.size(); ++g) {
    const SimulationContext& ctx = users[medoids[g]];
    for (std::size_t s = 0; s < samples_per_group; ++s) {
      const std::uint64_t chain_seed = hash_all({seed, 0x9001ULL, g, s});
      const auto gen = teacher.generate_chain(ctx, chain_seed);
      Rng geo_rng(hash_all({chain_seed, 0x6e0ULL}));
      pools[g].push_back(materialize(ctx, gen.tokens, city, gravity, geo_rng));
    }
  }
  std::vector<Trajectory> out;
  out.reserve(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    Rng pick(hash_all({seed, 0x91c4ULL, hash_string(users[i].profile.user_id)}));
    const auto& pool = pools[assign[i]];
    Trajectory t = pool[static_cast<std::size_t>(
        pick.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
    t.context = users[i];
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace trailcache

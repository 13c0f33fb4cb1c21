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

#include "trailcache/inference.hpp"

#include <chrono>
#include <cstring>
#include <exception>
#include <thread>

#include "trailcache/errors.hpp"
#include "trailcache/jsonio.hpp"
#include "trailcache/rng.hpp"

namespace trailcache {

namespace {

// Stream tags under a user's seed.
constexpr std::uint64_t kExploreStream = 1;
constexpr std::uint64_t kRetryStream = 2;
constexpr std::uint64_t kRegenerateStream = 3;
constexpr std::uint64_t kGeoStream = 4;
constexpr std::uint64_t kGenerateStream = 5;

std::uint64_t bits_of(double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

long long chain_len(const std::vector<LatentStep>& steps) {
  return static_cast<long long>(steps.size());
}

}  // namespace

std::string_view branch_query_name(BranchQuery q) {
  return q == BranchQuery::kBranchNode ? "branch-node" : "replaced-step";
}

BranchQuery branch_query_from_name(std::string_view name) {
  if (name == "branch-node") return BranchQuery::kBranchNode;
  if (name == "replaced-step") return BranchQuery::kReplacedStep;
  fail(ErrorCode::kInvalidArgument, "unknown branch query " + std::string(name));
}

void validate(const InferenceConfig& cfg) {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(cfg.exploration_rate)) fail(ErrorCode::kOutOfRange, "exploration_rate");
  if (!in01(cfg.context_threshold)) fail(ErrorCode::kOutOfRange, "context_threshold");
  if (!(cfg.score_threshold > 0.0 && cfg.score_threshold < 1.0)) {
    fail(ErrorCode::kOutOfRange, "score_threshold must be in (0, 1)");
  }
  if (cfg.candidate_k == 0) fail(ErrorCode::kOutOfRange, "candidate_k");
  if (cfg.min_rounds < 1 || cfg.max_rounds < cfg.min_rounds) {
    fail(ErrorCode::kOutOfRange, "rounds");
  }
  if (cfg.depth_window < 0) fail(ErrorCode::kOutOfRange, "depth_window");
  if (cfg.commit_window == 0) fail(ErrorCode::kOutOfRange, "commit_window");
}

double RawCosineScorer::score(const ContextFeatures&,
                              std::span<const LatentStep> prefix,
                              const LatentStep& candidate) const {
  if (prefix.empty()) return 0.5;
  return 0.5 * (1.0 + cosine(prefix.back().v, candidate.v));
}

double RandomScorer::score(const ContextFeatures&,
                           std::span<const LatentStep> prefix,
                           const LatentStep& candidate) const {
  std::uint64_t h = hash_all({seed_, prefix.size()});
  for (double v : candidate.v) h = hash_combine(h, bits_of(v));
  if (!prefix.empty()) h = hash_combine(h, bits_of(prefix.back().v[0]));
  return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

TokenSequence ReferenceDecoder::decode(std::span<const LatentStep> chain) const {
  std::vector<ActivityTokens> acts;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const StepSemantics s = decode_step_reference(chain[i]);
    acts.push_back({static_cast<int>(kind_index(s.kind)), time_bucket(s.start_minute),
                    distance_bin(i == 0 ? 0.0 : s.travel_km)});
  }
  return assemble_tokens(acts);
}

std::string_view repair_name(Repair r) {
  switch (r) {
    case Repair::kNone: return "none";
    case Repair::kRetried: return "retried";
    case Repair::kRegenerated: return "regenerated";
  }
  return "?";
}

void commit(CacheIndex& cache, const CacheDelta& delta) {
  if (delta.chain) {
    cache.insert_chain(delta.chain->context, delta.chain->steps,
                       delta.chain->teacher_seed);
  }
  std::vector<NodeId> created;
  created.reserve(delta.nodes.size());
  for (const DeltaNode& n : delta.nodes) {
    NodeId parent = n.parent.index;
    if (n.parent.in_delta) {
      if (n.parent.index >= created.size()) {
        fail(ErrorCode::kUnknownNode, "delta parent refers forward");
      }
      parent = created[n.parent.index];
    }
    created.push_back(cache.splice(parent, n.step, n.origin));
  }
}

std::uint64_t user_seed(std::uint64_t global_seed, const std::string& user_id) {
  return hash_all({global_seed, hash_string(user_id)});
}

ExploreResult explore_chain(const SimulationContext& ctx, ChainId base,
                            const CacheIndex& cache, const Models& models,
                            const InferenceConfig& cfg, Rng& rng) {
  ExploreResult r;
  std::vector<ParentRef> refs;
  for (NodeId id : cache.chain_path(base)) {
    r.steps.push_back(cache.embedding(id));
    r.provenance.push_back({StepSource::Kind::kCached, id});
    refs.push_back({false, id});
  }
  const ContextFeatures feats = context_features(ctx);
  std::vector<ChainId> excluded{base};
  r.rounds = static_cast<int>(rng.uniform_int(cfg.min_rounds, cfg.max_rounds));
  for (int round = 0; round < r.rounds; ++round) {
    const int length = static_cast<int>(r.steps.size());
    const int t = static_cast<int>(rng.uniform_int(1, length - 1));
    const std::size_t q = cfg.branch_query == BranchQuery::kBranchNode
                              ? static_cast<std::size_t>(t - 1)
                              : static_cast<std::size_t>(t);
    const auto candidates = cache.retrieve_similar(r.steps[q].v, t, cfg.candidate_k,
                                                   cfg.depth_window, excluded);
    const std::span<const LatentStep> prefix(r.steps.data(), static_cast<std::size_t>(t));
    double best = -1.0;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double s = models.scorer->score(feats, prefix,
                                            cache.embedding(candidates[i].node_id));
      if (s > best) {
        best = s;
        best_i = i;
      }
    }
    const ParentRef parent = refs[static_cast<std::size_t>(t - 1)];
    r.steps.resize(static_cast<std::size_t>(t));
    r.provenance.resize(static_cast<std::size_t>(t));
    refs.resize(static_cast<std::size_t>(t));
    if (!candidates.empty() && best >= cfg.score_threshold) {
      const NodeId donor = candidates[best_i].node_id;
      excluded.push_back(cache.node(donor).chain_id);
      r.delta.nodes.push_back({parent, cache.embedding(donor), donor});
      r.steps.push_back(cache.embedding(donor));
      r.provenance.push_back({StepSource::Kind::kSpliced, donor});
      refs.push_back({true, r.delta.nodes.size() - 1});
      for (NodeId n : cache.continuation(donor)) {
        if (r.steps.size() >= static_cast<std::size_t>(kMaxActivities)) break;
        r.steps.push_back(cache.embedding(n));
        r.provenance.push_back({StepSource::Kind::kCached, n});
        refs.push_back({false, n});
      }
      r.splice_points.push_back({t, donor});
    } else {
      // No acceptable branch: the backend writes the rest of the chain.
      const std::uint64_t seed = rng.next_u64();
      for (int s = t; s < length; ++s) {
        const LatentStep step = models.backend->next_step(ctx, r.steps, seed);
        r.delta.nodes.push_back({refs.back(), step, std::nullopt});
        r.steps.push_back(step);
        r.provenance.push_back({StepSource::Kind::kGenerated, 0});
        refs.push_back({true, r.delta.nodes.size() - 1});
      }
      r.charged += length - t;
      ++r.fallbacks;
    }
  }
  return r;
}

namespace {

struct Decoded {
  TokenSequence tokens;
  bool monotone = false;
};

Decoded decode_with(const ChainDecoder& decoder, const std::vector<LatentStep>& steps) {
  Decoded d;
  d.tokens = decoder.decode(steps);
  d.monotone = times_strictly_increasing(decode_tokens(d.tokens));
  return d;
}

}  // namespace

UserResult simulate_user(const SimulationContext& ctx, const CacheIndex& snapshot,
                         const Models& models, const InferenceConfig& cfg) {
  if (!models.backend || !models.scorer || !models.decoder || !models.city) {
    fail(ErrorCode::kInvalidArgument, "models not loaded");
  }
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t useed = user_seed(cfg.global_seed, ctx.profile.user_id);
  Rng rng(useed);
  const double coin = rng.uniform();

  UserResult res;
  StrategyOutcome& out = res.outcome;
  out.chain.context = ctx;
  long long charged = 0;
  const auto decode_charge = [&](const std::vector<LatentStep>& steps) {
    if (models.decoder_is_backend) charged += chain_len(steps);
    return decode_with(*models.decoder, steps);
  };

  Decoded dec;
  const auto match = snapshot.entry_count() > 0
                         ? snapshot.match_context(ctx, cfg.context_threshold)
                         : std::nullopt;
  if (!match) {
    out.strategy = Strategy::kGenerated;
    const std::uint64_t seed = hash_all({useed, kGenerateStream});
    GeneratedChain gen = models.backend->generate_chain(ctx, seed);
    out.chain.steps = std::move(gen.chain.steps);
    out.chain.provenance = std::move(gen.chain.provenance);
    charged += chain_len(out.chain.steps);
    res.delta.chain = NewChain{ctx, out.chain.steps, seed};
    dec = decode_charge(out.chain.steps);
  } else if (coin >= cfg.exploration_rate) {
    out.strategy = Strategy::kFollowed;
    out.matched_chain = match->chain_id;
    ReasoningChain base = snapshot.chain(match->chain_id);
    out.chain.steps = std::move(base.steps);
    out.chain.provenance = std::move(base.provenance);
    dec = decode_charge(out.chain.steps);
  } else {
    out.strategy = Strategy::kExplored;
    out.matched_chain = match->chain_id;
    Rng explore_rng(hash_all({useed, kExploreStream}));
    ExploreResult ex =
        explore_chain(ctx, match->chain_id, snapshot, models, cfg, explore_rng);
    charged += ex.charged;
    dec = decode_charge(ex.steps);
    out.pre_repair_monotone = dec.monotone;
    if (!dec.monotone) {
      Rng retry_rng(hash_all({useed, kRetryStream}));
      ExploreResult again =
          explore_chain(ctx, match->chain_id, snapshot, models, cfg, retry_rng);
      charged += again.charged;
      dec = decode_charge(again.steps);
      ex = std::move(again);
      out.repair = Repair::kRetried;
    }
    if (dec.monotone) {
      out.chain.steps = std::move(ex.steps);
      out.chain.provenance = std::move(ex.provenance);
      out.splice_points = std::move(ex.splice_points);
      out.rounds = ex.rounds;
      out.fallbacks = ex.fallbacks;
      res.delta = std::move(ex.delta);
    } else {
      out.repair = Repair::kRegenerated;
      GeneratedChain gen = models.backend->generate_chain(
          ctx, hash_all({useed, kRegenerateStream}));
      out.chain.steps = std::move(gen.chain.steps);
      out.chain.provenance = std::move(gen.chain.provenance);
      charged += chain_len(out.chain.steps);
      dec = decode_charge(out.chain.steps);
    }
  }
  if (!dec.monotone) {
    // Last resort for a student slip on an intact chain: decode with the
    // backend's own reading of the steps.
    dec = decode_with(ReferenceDecoder{}, out.chain.steps);
    if (!models.decoder_is_backend) charged += chain_len(out.chain.steps);
    out.reference_decoded = true;
  }
  res.tokens = dec.tokens;
  out.backend_steps_charged = charged;

  Rng geo_rng(hash_all({useed, kGeoStream}));
  res.trajectory = materialize(ctx, res.tokens, *models.city, cfg.gravity, geo_rng);
  validate(res.trajectory);

  res.record.user_id = ctx.profile.user_id;
  res.record.strategy = out.strategy;
  res.record.charged_steps = charged;
  res.record.simulated_backend_s =
      simulate_backend_cost(charged, charged * cfg.cost.tokens_per_activity, cfg.cost)
          .latency_s;
  res.record.output_tokens = static_cast<long long>(res.tokens.tokens.size());
  res.record.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
  return res;
}

UserResult simulate_user(const SimulationContext& ctx, CacheIndex& cache,
                         const Models& models, const InferenceConfig& cfg) {
  UserResult res = simulate_user(ctx, std::as_const(cache), models, cfg);
  commit(cache, res.delta);
  return res;
}

std::vector<EfficiencyRecord> BatchResult::records() const {
  std::vector<EfficiencyRecord> out;
  for (const auto& u : users) out.push_back(u.record);
  return out;
}

std::vector<Trajectory> BatchResult::trajectories() const {
  std::vector<Trajectory> out;
  for (const auto& u : users) out.push_back(u.trajectory);
  return out;
}

BatchResult batch_simulate(std::span<const SimulationContext> contexts,
                           CacheIndex& cache, const Models& models,
                           const InferenceConfig& cfg, std::size_t batch_size) {
  if (batch_size == 0) fail(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  validate(cfg);
  BatchResult out;
  out.users.resize(contexts.size());
  const auto run_start = std::chrono::steady_clock::now();
  for (std::size_t begin = 0; begin < contexts.size(); begin += cfg.commit_window) {
    const std::size_t end = std::min(contexts.size(), begin + cfg.commit_window);
    const std::size_t workers = std::min(batch_size, end - begin);
    const CacheIndex& snapshot = cache;
    const auto window_start = std::chrono::steady_clock::now();
    // User begin + i goes to worker i % workers.
    auto work = [&](std::size_t w) {
      for (std::size_t i = begin + w; i < end; i += workers) {
        out.users[i] = simulate_user(contexts[i], snapshot, models, cfg);
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> threads;
      for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
          try {
            work(w);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& th : threads) th.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    const double wall = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - window_start)
                            .count();
    double slowest = 0.0;
    for (std::size_t w = 0; w < workers; ++w) {
      double sim = 0.0;
      for (std::size_t i = begin + w; i < end; i += workers) {
        sim += out.users[i].record.simulated_backend_s;
      }
      slowest = std::max(slowest, sim);
    }
    out.elapsed_s += wall + slowest;
    for (std::size_t i = begin; i < end; ++i) commit(cache, out.users[i].delta);
  }
  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             run_start)
                   .count();
  return out;
}

void write_trajectories(const std::filesystem::path& path,
                        std::span<const Trajectory> trajectories) {
  std::vector<nlohmann::json> records;
  records.reserve(trajectories.size());
  for (const auto& t : trajectories) records.emplace_back(t);
  write_jsonl(path, records);
}

std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
  return read_records<Trajectory>(path);
}

}  // namespace trailcache

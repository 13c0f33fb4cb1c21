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

#include "trailcache/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "trailcache/errors.hpp"
#include "trailcache/jsonio.hpp"
#include "trailcache/rng.hpp"

namespace trailcache {

nlohmann::json to_json(const ExperimentConfig& cfg) {
  const InferenceConfig& in = cfg.inference;
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["city"] = {{"pois_per_category", cfg.pois_per_category}};
  j["population"] = {{"cache_users", cfg.cache_users},
                     {"query_users", cfg.query_users},
                     {"reference_users", cfg.reference_users}};
  j["evaluator"] = {{"examples", cfg.evaluator_examples},
                    {"hidden", cfg.evaluator_hidden},
                    {"epochs", cfg.evaluator.epochs},
                    {"learning_rate", cfg.evaluator.learning_rate},
                    {"batch_size", cfg.evaluator.batch_size}};
  j["decoder"] = {{"examples", cfg.decoder_examples},
                  {"heldout", cfg.decoder_heldout},
                  {"hidden", cfg.decoder_hidden},
                  {"epochs", cfg.decoder.epochs},
                  {"learning_rate", cfg.decoder.learning_rate},
                  {"lambda", cfg.decoder.lambda},
                  {"batch_size", cfg.decoder.batch_size},
                  {"final_lr_fraction", cfg.decoder.final_lr_fraction}};
  j["inference"] = {{"branch_query", branch_query_name(in.branch_query)},
                    {"exploration_rate", in.exploration_rate},
                    {"context_threshold", in.context_threshold},
                    {"candidate_k", in.candidate_k},
                    {"score_threshold", in.score_threshold},
                    {"min_rounds", in.min_rounds},
                    {"max_rounds", in.max_rounds},
                    {"depth_window", in.depth_window},
                    {"global_seed", in.global_seed},
                    {"commit_window", in.commit_window},
                    {"batch_size", cfg.batch_size},
                    {"per_step_latency_s", in.cost.per_step_latency_s},
                    {"gravity_beta", in.gravity.beta},
                    {"band_tolerance_km", in.gravity.band_tolerance_km
                                              ? nlohmann::json(*in.gravity.band_tolerance_km)
                                              : nlohmann::json(nullptr)}};
  j["baseline"] = {{"archetypes", cfg.archetypes},
                   {"samples_per_archetype", cfg.samples_per_archetype}};
  j["policy"] = cfg.policy_path ? nlohmann::json(cfg.policy_path->string())
                                : nlohmann::json(nullptr);
  return j;
}

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* section, const char* key, T& out) {
  if (!j.contains(section)) return;
  const auto& s = j.at(section);
  if (s.contains(key)) out = s.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c) {
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    take(j, "city", "pois_per_category", c.pois_per_category);
    take(j, "population", "cache_users", c.cache_users);
    take(j, "population", "query_users", c.query_users);
    take(j, "population", "reference_users", c.reference_users);
    take(j, "evaluator", "examples", c.evaluator_examples);
    take(j, "evaluator", "hidden", c.evaluator_hidden);
    take(j, "evaluator", "epochs", c.evaluator.epochs);
    take(j, "evaluator", "learning_rate", c.evaluator.learning_rate);
    take(j, "evaluator", "batch_size", c.evaluator.batch_size);
    take(j, "decoder", "examples", c.decoder_examples);
    take(j, "decoder", "heldout", c.decoder_heldout);
    take(j, "decoder", "hidden", c.decoder_hidden);
    take(j, "decoder", "epochs", c.decoder.epochs);
    take(j, "decoder", "learning_rate", c.decoder.learning_rate);
    take(j, "decoder", "lambda", c.decoder.lambda);
    take(j, "decoder", "batch_size", c.decoder.batch_size);
    take(j, "decoder", "final_lr_fraction", c.decoder.final_lr_fraction);
    InferenceConfig& in = c.inference;
    if (j.contains("inference") && j["inference"].contains("branch_query")) {
      in.branch_query = branch_query_from_name(j["inference"]["branch_query"].get<std::string>());
    }
    take(j, "inference", "exploration_rate", in.exploration_rate);
    take(j, "inference", "context_threshold", in.context_threshold);
    take(j, "inference", "candidate_k", in.candidate_k);
    take(j, "inference", "score_threshold", in.score_threshold);
    take(j, "inference", "min_rounds", in.min_rounds);
    take(j, "inference", "max_rounds", in.max_rounds);
    take(j, "inference", "depth_window", in.depth_window);
    take(j, "inference", "global_seed", in.global_seed);
    take(j, "inference", "commit_window", in.commit_window);
    take(j, "inference", "batch_size", c.batch_size);
    take(j, "inference", "per_step_latency_s", in.cost.per_step_latency_s);
    take(j, "inference", "gravity_beta", in.gravity.beta);
    if (j.contains("inference") && j["inference"].contains("band_tolerance_km")) {
      const auto& b = j["inference"]["band_tolerance_km"];
      in.gravity.band_tolerance_km =
          b.is_null() ? std::nullopt : std::optional<double>(b.get<double>());
    }
    take(j, "baseline", "archetypes", c.archetypes);
    take(j, "baseline", "samples_per_archetype", c.samples_per_archetype);
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      c.policy_path = p.is_null() ? std::nullopt
                                  : std::optional<std::filesystem::path>(
                                        p.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  try {
    validate(c.inference);
  } catch (const Error& e) {
    fail(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  if (!(c.decoder.lambda >= 0.0)) fail(ErrorCode::kInvalidArgument, "decoder lambda < 0");
  if (c.decoder.epochs < 0 || c.evaluator.epochs < 0) {
    fail(ErrorCode::kInvalidArgument, "negative epoch count");
  }
  if (c.decoder.batch_size == 0 || c.evaluator.batch_size == 0) {
    fail(ErrorCode::kInvalidArgument, "batch size must be at least 1");
  }
  if (c.batch_size == 0) fail(ErrorCode::kInvalidArgument, "batch_size must be at least 1");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoFailure, "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_string(to_json(cfg).dump())));
  return buf;
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, Stage stage) {
  return hash_all({cfg.seed, static_cast<std::uint64_t>(stage)});
}

TeacherPolicy load_policy(const ExperimentConfig& cfg) {
  if (!cfg.policy_path) return TeacherPolicy::defaults();
  std::ifstream in(*cfg.policy_path);
  if (!in) fail(ErrorCode::kIoFailure, "cannot read " + cfg.policy_path->string());
  TeacherPolicy p = nlohmann::json::parse(in).get<TeacherPolicy>();
  validate(p);
  return p;
}

City build_city(const ExperimentConfig& cfg) {
  return generate_city(stage_seed(cfg, Stage::kCity), cfg.pois_per_category);
}

std::vector<SimulationContext> population(const ExperimentConfig& cfg, Stage stage,
                                          std::size_t n, const City& city) {
  return generate_population(n, stage_seed(cfg, stage), city);
}

CacheIndex build_cache(const ExperimentConfig& cfg, const SyntheticTeacher& teacher,
                       const City& city) {
  const auto users = population(cfg, Stage::kCachePopulation, cfg.cache_users, city);
  return build_cache(cfg, teacher, users);
}

CacheIndex build_cache(const ExperimentConfig& cfg, const SyntheticTeacher& teacher,
                       std::span<const SimulationContext> users) {
  const std::uint64_t base = stage_seed(cfg, Stage::kCacheChains);
  CacheIndex cache;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const std::uint64_t seed = hash_all({base, i});
    const GeneratedChain gen = teacher.generate_chain(users[i], seed);
    cache.insert_chain(users[i], gen.chain.steps, seed);
  }
  return cache;
}

TeacherRollouts teacher_rollouts(std::span<const SimulationContext> users,
                                 std::uint64_t seed, const SyntheticTeacher& teacher,
                                 const City& city, const GravityParams& gravity) {
  TeacherRollouts out;
  for (std::size_t i = 0; i < users.size(); ++i) {
    const std::uint64_t s = hash_all({seed, i});
    GeneratedChain gen = teacher.generate_chain(users[i], s);
    Rng geo(hash_all({s, 0x6e0ULL}));
    out.trajectories.push_back(materialize(users[i], gen.tokens, city, gravity, geo));
    out.chains.push_back(std::move(gen));
  }
  return out;
}

std::vector<DistillationExample> distillation_corpus(
    std::span<const GeneratedChain> chains) {
  std::vector<DistillationExample> out;
  out.reserve(chains.size());
  for (const auto& c : chains) {
    out.push_back(make_distillation_example(c.chain.steps, c.tokens));
  }
  return out;
}

TrainedEvaluator train_evaluator(const ExperimentConfig& cfg, const CacheIndex& cache,
                                 const SyntheticTeacher& teacher) {
  const auto examples = build_labels(cache, teacher, cfg.evaluator_examples,
                                     stage_seed(cfg, Stage::kEvaluatorLabels));
  TrainedEvaluator out{EvaluatorModel(stage_seed(cfg, Stage::kEvaluatorInit),
                                      cfg.evaluator_hidden),
                       {}};
  EvaluatorTrainOptions opt = cfg.evaluator;
  opt.seed = stage_seed(cfg, Stage::kEvaluatorInit);
  out.report = train(out.model, examples, opt);
  return out;
}

namespace {

std::vector<DistillationExample> corpus_for(const ExperimentConfig& cfg, Stage users_stage,
                                            Stage chains_stage, std::size_t n,
                                            const SyntheticTeacher& teacher,
                                            const City& city) {
  const auto users = population(cfg, users_stage, n, city);
  const std::uint64_t base = stage_seed(cfg, chains_stage);
  std::vector<GeneratedChain> chains;
  chains.reserve(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    chains.push_back(teacher.generate_chain(users[i], hash_all({base, i})));
  }
  return distillation_corpus(chains);
}

}  // namespace

std::vector<DistillationExample> decoder_heldout(const ExperimentConfig& cfg,
                                                 const SyntheticTeacher& teacher,
                                                 const City& city) {
  return corpus_for(cfg, Stage::kDecoderHeldoutPopulation, Stage::kDecoderChains,
                    cfg.decoder_heldout, teacher, city);
}

TrainedDecoder train_decoder(const ExperimentConfig& cfg, const SyntheticTeacher& teacher,
                             const City& city, std::optional<double> lambda) {
  const auto examples = corpus_for(cfg, Stage::kDecoderPopulation, Stage::kDecoderChains,
                                   cfg.decoder_examples, teacher, city);
  DecoderTrainOptions opt = cfg.decoder;
  if (lambda) opt.lambda = *lambda;
  opt.seed = stage_seed(cfg, Stage::kDecoderInit);
  TrainedDecoder out{StudentDecoder(stage_seed(cfg, Stage::kDecoderInit), cfg.decoder_hidden),
                     {}, {}};
  out.report = train(out.model, examples, opt);
  out.heldout = evaluate_decoder(out.model, decoder_heldout(cfg, teacher, city));
  return out;
}

BatchResult generate_all(std::span<const SimulationContext> users,
                         const ExperimentConfig& cfg, const ReasoningBackend& teacher,
                         const City& city) {
  BatchResult out;
  const std::uint64_t base = stage_seed(cfg, Stage::kGenerateAll);
  const auto run_start = std::chrono::steady_clock::now();
  for (const auto& ctx : users) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t s = hash_all({base, hash_string(ctx.profile.user_id)});
    GeneratedChain gen = teacher.generate_chain(ctx, s);
    Rng geo(hash_all({s, 0x6e0ULL}));
    UserResult u;
    u.trajectory = materialize(ctx, gen.tokens, city, cfg.inference.gravity, geo);
    u.tokens = gen.tokens;
    u.outcome.strategy = Strategy::kGenerated;
    u.outcome.backend_steps_charged = static_cast<long long>(gen.chain.steps.size());
    u.outcome.chain = std::move(gen.chain);
    u.record.user_id = ctx.profile.user_id;
    u.record.strategy = Strategy::kGenerated;
    u.record.charged_steps = u.outcome.backend_steps_charged;
    u.record.simulated_backend_s =
        static_cast<double>(u.record.charged_steps) * cfg.inference.cost.per_step_latency_s;
    u.record.output_tokens = static_cast<long long>(u.tokens.tokens.size());
    u.record.wall_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    out.elapsed_s += u.record.wall_ms / 1000.0 + u.record.simulated_backend_s;
    out.users.push_back(std::move(u));
  }
  out.wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();
  return out;
}

}  // namespace trailcache

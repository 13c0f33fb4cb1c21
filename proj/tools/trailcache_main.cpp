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

// trailcache command-line tool. Every command reads the experiment config
// (defaults, then --config FILE, then flag overrides) and stamps its outputs
// with the config hash.

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <thread>
#include <string>

#include "trailcache/errors.hpp"
#include "trailcache/experiment.hpp"
#include "trailcache/jsonio.hpp"
#include "trailcache/remote.hpp"

namespace tc = trailcache;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code_for(tc::ErrorCode code) {
  switch (code) {
    case tc::ErrorCode::kInvalidArgument:
      return kExitConfig;
    case tc::ErrorCode::kNonFiniteLoss:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

// Flag overrides applied on top of the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> exploration_rate;
  std::optional<double> context_threshold;
  std::optional<double> score_threshold;
  std::optional<std::size_t> candidate_k;
  std::optional<std::uint64_t> global_seed;
  std::optional<std::size_t> batch_size;
  std::optional<double> lambda;
  std::optional<double> latency;
  std::optional<std::string> branch_query;
};

struct Common {
  std::string config_path;
  Overrides o;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON experiment config");
  cmd->add_option("--seed", c.o.seed, "experiment seed [chosen: 7]");
  cmd->add_option("--exploration-rate", c.o.exploration_rate,
                  "probability of exploring on a cache hit [paper: 0.5]")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--context-threshold", c.o.context_threshold,
                  "context similarity needed for a hit [chosen: 0.85]")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--score-threshold", c.o.score_threshold,
                  "evaluator score needed to splice [chosen: 0.6]");
  cmd->add_option("--candidate-k", c.o.candidate_k, "candidates per branch point [chosen: 8]");
  cmd->add_option("--global-seed", c.o.global_seed, "simulation seed [chosen: 0]");
  cmd->add_option("--batch-size", c.o.batch_size, "concurrent workers [paper: 8]");
  cmd->add_option("--lambda", c.o.lambda, "mobility-law loss weight [paper: 0.05]");
  cmd->add_option("--latency", c.o.latency,
                  "simulated backend seconds per step [chosen: 0.33]");
  cmd->add_option("--branch-query", c.o.branch_query,
                  "replaced-step | branch-node [chosen: replaced-step]");
}

tc::ExperimentConfig resolve(const Common& c) {
  tc::ExperimentConfig cfg =
      c.config_path.empty() ? tc::ExperimentConfig{} : tc::load_config(c.config_path);
  const Overrides& o = c.o;
  if (o.seed) cfg.seed = *o.seed;
  if (o.exploration_rate) cfg.inference.exploration_rate = *o.exploration_rate;
  if (o.context_threshold) cfg.inference.context_threshold = *o.context_threshold;
  if (o.score_threshold) cfg.inference.score_threshold = *o.score_threshold;
  if (o.candidate_k) cfg.inference.candidate_k = *o.candidate_k;
  if (o.global_seed) cfg.inference.global_seed = *o.global_seed;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.lambda) cfg.decoder.lambda = *o.lambda;
  if (o.latency) cfg.inference.cost.per_step_latency_s = *o.latency;
  if (o.branch_query) cfg.inference.branch_query = tc::branch_query_from_name(*o.branch_query);
  try {
    tc::validate(cfg.inference);
  } catch (const tc::Error& e) {
    tc::fail(tc::ErrorCode::kInvalidArgument, e.what());
  }
  if (cfg.batch_size == 0) tc::fail(tc::ErrorCode::kInvalidArgument, "batch size 0");
  return cfg;
}

// JSONL outputs get a sidecar with the resolved config and its hash.
void write_meta(const std::filesystem::path& out, const tc::ExperimentConfig& cfg,
                const std::string& command) {
  std::ofstream meta(out.string() + ".meta.json");
  if (!meta) tc::fail(tc::ErrorCode::kIoFailure, "cannot write sidecar for " + out.string());
  meta << nlohmann::json{{"command", command},
                         {"config_hash", tc::config_hash(cfg)},
                         {"config", tc::to_json(cfg)}}
              .dump(2)
       << "\n";
}

tc::City load_city(const std::string& path, const tc::ExperimentConfig& cfg) {
  return path.empty() ? tc::build_city(cfg) : tc::read_city(path);
}

tc::Stage stage_for_role(const std::string& role) {
  if (role == "cache") return tc::Stage::kCachePopulation;
  if (role == "query") return tc::Stage::kQueryPopulation;
  if (role == "reference") return tc::Stage::kReferencePopulation;
  tc::fail(tc::ErrorCode::kInvalidArgument, "role must be cache, query or reference");
}

std::size_t default_size(const std::string& role, const tc::ExperimentConfig& cfg) {
  if (role == "cache") return cfg.cache_users;
  if (role == "query") return cfg.query_users;
  return cfg.reference_users;
}

std::vector<tc::SimulationContext> load_users(const std::string& path,
                                              const std::string& role,
                                              const tc::ExperimentConfig& cfg,
                                              const tc::City& city) {
  if (!path.empty()) return tc::read_records<tc::SimulationContext>(path);
  return tc::population(cfg, stage_for_role(role), default_size(role, cfg), city);
}

// Everything needed to run the pipeline, owned in one place.
struct Pipeline {
  std::unique_ptr<tc::ReasoningBackend> backend;
  tc::City city;
  tc::CacheIndex cache;
  tc::EvaluatorModel evaluator;
  tc::StudentDecoder student;
  tc::ReferenceDecoder reference;
  std::unique_ptr<tc::BranchScorer> scorer;

  tc::Models models(bool reference_decoder = false) const {
    return {backend.get(), scorer.get(),
            reference_decoder ? static_cast<const tc::ChainDecoder*>(&reference)
                              : static_cast<const tc::ChainDecoder*>(&student),
            &city, reference_decoder};
  }
};

struct PipelinePaths {
  std::string city, cache, evaluator, decoder, scorer = "evaluator", backend_url;
};

void add_pipeline_paths(CLI::App* cmd, PipelinePaths& p) {
  cmd->add_option("--city", p.city, "city JSONL (default: generated from the seed)");
  cmd->add_option("--cache", p.cache, "cache file from build-cache")->required();
  cmd->add_option("--evaluator", p.evaluator, "evaluator checkpoint");
  cmd->add_option("--decoder", p.decoder, "decoder checkpoint")->required();
  cmd->add_option("--scorer", p.scorer, "evaluator | cosine | random");
  cmd->add_option("--backend-url", p.backend_url,
                  "host:port of a served backend (default: in-process teacher)");
}

std::unique_ptr<tc::ReasoningBackend> make_backend(const std::string& url,
                                                   const tc::ExperimentConfig& cfg) {
  if (url.empty()) return std::make_unique<tc::SyntheticTeacher>(tc::load_policy(cfg));
  const auto colon = url.rfind(':');
  if (colon == std::string::npos) {
    tc::fail(tc::ErrorCode::kInvalidArgument, "--backend-url must be host:port");
  }
  return std::make_unique<tc::RemoteBackend>(url.substr(0, colon),
                                             std::stoi(url.substr(colon + 1)));
}

std::unique_ptr<tc::BranchScorer> make_scorer(const std::string& kind,
                                              const tc::EvaluatorModel& model,
                                              const tc::ExperimentConfig& cfg) {
  if (kind == "evaluator") return std::make_unique<tc::EvaluatorScorer>(model);
  if (kind == "cosine") return std::make_unique<tc::RawCosineScorer>();
  if (kind == "random") return std::make_unique<tc::RandomScorer>(cfg.inference.global_seed);
  tc::fail(tc::ErrorCode::kInvalidArgument, "unknown scorer " + kind);
}

std::unique_ptr<Pipeline> load_pipeline(const PipelinePaths& p,
                                        const tc::ExperimentConfig& cfg) {
  auto pl = std::make_unique<Pipeline>();
  pl->backend = make_backend(p.backend_url, cfg);
  pl->city = load_city(p.city, cfg);
  pl->cache = tc::CacheIndex::load(p.cache);
  if (p.scorer == "evaluator") {
    if (p.evaluator.empty()) {
      tc::fail(tc::ErrorCode::kInvalidArgument, "--evaluator is required for the evaluator scorer");
    }
    pl->evaluator = tc::EvaluatorModel(0, cfg.evaluator_hidden);
    pl->evaluator.load(p.evaluator);
  }
  pl->student = tc::StudentDecoder(0, cfg.decoder_hidden);
  pl->student.load(p.decoder);
  pl->scorer = make_scorer(p.scorer, pl->evaluator, cfg);
  return pl;
}

void print_efficiency(const char* label, const tc::EfficiencyReport& r) {
  std::printf(
      "%-14s time %.4f s/traj  tokens/s %.1f  throughput %.2f traj/s  "
      "api $%.3g/traj  gpu $%.3g/traj  hit %.3f  (F/E/G %zu/%zu/%zu)\n",
      label, r.inference_time_s_per_traj, r.tokens_per_s, r.throughput_traj_per_s,
      r.cost_api_usd_per_traj, r.cost_gpu_usd_per_traj, r.hit_rate, r.followed,
      r.explored, r.generated);
}

double monotone_rate(const tc::BatchResult& run) {
  std::size_t explored = 0;
  std::size_t ok = 0;
  for (const auto& u : run.users) {
    if (u.outcome.strategy != tc::Strategy::kExplored) continue;
    ++explored;
    ok += u.outcome.pre_repair_monotone ? 1 : 0;
  }
  return explored ? static_cast<double>(ok) / static_cast<double>(explored) : 1.0;
}

volatile std::sig_atomic_t g_stop = 0;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trailcache: cached latent reasoning chains for mobility simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "trailcache 0.1.0");

  // gen-city
  Common c_city;
  std::string city_out;
  auto* gen_city = app.add_subcommand("gen-city", "generate a synthetic city");
  add_common(gen_city, c_city);
  gen_city->add_option("--out", city_out, "output JSONL")->required();

  // gen-population
  Common c_pop;
  std::string pop_city, pop_out, pop_role = "query";
  std::optional<std::size_t> pop_n;
  auto* gen_pop = app.add_subcommand("gen-population", "generate synthetic users");
  add_common(gen_pop, c_pop);
  gen_pop->add_option("--city", pop_city, "city JSONL (default: generated from the seed)");
  gen_pop->add_option("--role", pop_role, "cache | query | reference (selects the seed stream)");
  gen_pop->add_option("-n,--count", pop_n, "number of users");
  gen_pop->add_option("--out", pop_out, "output JSONL")->required();

  // build-cache
  Common c_cache;
  std::string cache_city, cache_users, cache_out;
  auto* build = app.add_subcommand("build-cache", "teacher rollouts into a cache file");
  add_common(build, c_cache);
  build->add_option("--city", cache_city, "city JSONL");
  build->add_option("--users", cache_users, "population JSONL (default: cache population)");
  build->add_option("--out", cache_out, "cache file")->required();

  // train-evaluator
  Common c_ev;
  std::string ev_cache, ev_out, ev_curve;
  auto* train_ev = app.add_subcommand("train-evaluator", "train the branch evaluator");
  add_common(train_ev, c_ev);
  train_ev->add_option("--cache", ev_cache, "cache file")->required();
  train_ev->add_option("--out", ev_out, "checkpoint")->required();
  train_ev->add_option("--curve", ev_curve, "loss curve CSV");

  // train-decoder
  Common c_dec;
  std::string dec_city, dec_out, dec_curve;
  auto* train_dec = app.add_subcommand("train-decoder", "distill the student decoder");
  add_common(train_dec, c_dec);
  train_dec->add_option("--city", dec_city, "city JSONL");
  train_dec->add_option("--out", dec_out, "checkpoint")->required();
  train_dec->add_option("--curve", dec_curve, "loss curve CSV");

  // grad-check
  Common c_gc;
  double gc_eps = 1e-5;
  auto* grad = app.add_subcommand("grad-check", "finite-difference gradient checks");
  add_common(grad, c_gc);
  grad->add_option("--epsilon", gc_eps, "central-difference step");

  // teacher-rollout
  Common c_ref;
  std::string ref_city, ref_users, ref_out;
  auto* rollout = app.add_subcommand("teacher-rollout",
                                     "teacher trajectories for a population (reference sets)");
  add_common(rollout, c_ref);
  rollout->add_option("--city", ref_city, "city JSONL");
  rollout->add_option("--users", ref_users, "population JSONL (default: reference population)");
  rollout->add_option("--out", ref_out, "trajectory JSONL")->required();

  // simulate
  Common c_sim;
  PipelinePaths sim_paths;
  std::string sim_users, sim_out, sim_eff, sim_cache_out;
  bool sim_sequential = false;
  bool sim_refdec = false;
  auto* simulate = app.add_subcommand("simulate", "run inference over a query population");
  add_common(simulate, c_sim);
  add_pipeline_paths(simulate, sim_paths);
  simulate->add_option("--users", sim_users, "population JSONL (default: query population)");
  simulate->add_option("--out", sim_out, "trajectory JSONL")->required();
  simulate->add_option("--efficiency", sim_eff, "efficiency CSV");
  simulate->add_option("--cache-out", sim_cache_out, "write the grown cache here");
  simulate->add_flag("--sequential", sim_sequential, "force batch size 1");
  simulate->add_flag("--reference-decoder", sim_refdec,
                     "decode with the backend instead of the student");

  // evaluate
  Common c_eval;
  std::string eval_ref, eval_gen, eval_out, eval_cov;
  auto* evaluate = app.add_subcommand("evaluate", "quality metrics against a reference set");
  add_common(evaluate, c_eval);
  evaluate->add_option("--reference", eval_ref, "reference trajectory JSONL")->required();
  evaluate->add_option("--generated", eval_gen, "generated trajectory JSONL")->required();
  evaluate->add_option("--out", eval_out, "metrics CSV");
  evaluate->add_option("--coverage", eval_cov, "top-15 coverage plot data (cell,ref,gen)");

  // bench
  Common c_bench;
  PipelinePaths bench_paths;
  std::string bench_users, bench_out;
  auto* bench = app.add_subcommand("bench", "efficiency: cached pipeline vs all-generate");
  add_common(bench, c_bench);
  add_pipeline_paths(bench, bench_paths);
  bench->add_option("--users", bench_users, "population JSONL (default: query population)");
  bench->add_option("--out", bench_out, "efficiency report CSV");

  // ablate
  Common c_abl;
  PipelinePaths abl_paths;
  std::string abl_users, abl_ref, abl_out, abl_dec_nomd;
  auto* ablate = app.add_subcommand("ablate", "full model vs w/o LE, w/o MD, w/o LD");
  add_common(ablate, c_abl);
  add_pipeline_paths(ablate, abl_paths);
  ablate->add_option("--decoder-no-law", abl_dec_nomd, "decoder trained with lambda 0")
      ->required();
  ablate->add_option("--users", abl_users, "population JSONL (default: query population)");
  ablate->add_option("--reference", abl_ref, "reference trajectory JSONL")->required();
  ablate->add_option("--out", abl_out, "ablation CSV")->required();

  // serve-backend
  Common c_srv;
  std::string srv_host = "127.0.0.1";
  int srv_port = 8717;
  auto* serve = app.add_subcommand("serve-backend", "serve the synthetic teacher over HTTP");
  add_common(serve, c_srv);
  serve->add_option("--host", srv_host, "bind address");
  serve->add_option("--port", srv_port, "port (0 picks a free one)");

  // export-cache
  Common c_exp;
  std::string exp_cache, exp_out;
  auto* export_cache = app.add_subcommand("export-cache", "cache file to JSONL");
  add_common(export_cache, c_exp);
  export_cache->add_option("--cache", exp_cache, "cache file")->required();
  export_cache->add_option("--out", exp_out, "output JSONL")->required();

  // dump-policy
  Common c_pol;
  std::string pol_out;
  auto* dump_policy = app.add_subcommand("dump-policy", "write the teacher policy as JSON");
  add_common(dump_policy, c_pol);
  dump_policy->add_option("--out", pol_out, "output JSON (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen_city) {
      const auto cfg = resolve(c_city);
      const tc::City city = tc::build_city(cfg);
      tc::write_city(city_out, city);
      write_meta(city_out, cfg, "gen-city");
      std::printf("city %s: %zu POIs\n", city.city_id.c_str(), city.pois.size());
    } else if (*gen_pop) {
      const auto cfg = resolve(c_pop);
      const tc::City city = load_city(pop_city, cfg);
      const auto users = tc::generate_population(
          pop_n.value_or(default_size(pop_role, cfg)),
          tc::stage_seed(cfg, stage_for_role(pop_role)), city);
      tc::write_records(pop_out, users);
      write_meta(pop_out, cfg, "gen-population");
      std::printf("%zu users\n", users.size());
    } else if (*build) {
      const auto cfg = resolve(c_cache);
      const tc::City city = load_city(cache_city, cfg);
      const tc::SyntheticTeacher teacher(tc::load_policy(cfg));
      const auto users = load_users(cache_users, "cache", cfg, city);
      const tc::CacheIndex cache = tc::build_cache(cfg, teacher, users);
      cache.save(cache_out, tc::config_hash(cfg));
      std::printf("cache: %zu chains, %zu nodes\n", cache.entry_count(), cache.node_count());
    } else if (*train_ev) {
      const auto cfg = resolve(c_ev);
      const tc::SyntheticTeacher teacher(tc::load_policy(cfg));
      const auto cache = tc::CacheIndex::load(ev_cache);
      const auto trained = tc::train_evaluator(cfg, cache, teacher);
      trained.model.save(ev_out, tc::config_hash(cfg));
      if (!ev_curve.empty()) trained.report.write_csv(ev_curve, tc::config_hash(cfg));
      std::printf("evaluator MSE %.5f -> %.5f\n", trained.report.mse.front(),
                  trained.report.mse.back());
    } else if (*train_dec) {
      const auto cfg = resolve(c_dec);
      const tc::SyntheticTeacher teacher(tc::load_policy(cfg));
      const tc::City city = load_city(dec_city, cfg);
      const auto trained = tc::train_decoder(cfg, teacher, city);
      trained.model.save(dec_out, tc::config_hash(cfg));
      if (!dec_curve.empty()) trained.report.write_csv(dec_curve, tc::config_hash(cfg));
      std::printf("decoder L_total %.5f -> %.5f; held-out token accuracy %.4f, law KL %.5f\n",
                  trained.report.curve.front().total, trained.report.curve.back().total,
                  trained.heldout.token_accuracy, trained.heldout.mean_law_kl);
    } else if (*grad) {
      const auto cfg = resolve(c_gc);
      const tc::SyntheticTeacher teacher(tc::load_policy(cfg));
      tc::ExperimentConfig small = cfg;
      small.cache_users = 20;
      const tc::City city = tc::build_city(small);
      const auto cache = tc::build_cache(small, teacher, city);
      const auto labels = tc::build_labels(cache, teacher, 4, cfg.seed);
      const tc::EvaluatorModel ev(cfg.seed, cfg.evaluator_hidden);
      double worst_ev = 0.0;
      for (const auto& ex : labels) worst_ev = std::max(worst_ev, tc::gradient_check(ev, ex, gc_eps));
      const auto users = tc::population(small, tc::Stage::kDecoderPopulation, 2, city);
      const tc::StudentDecoder dec(cfg.seed, cfg.decoder_hidden);
      double worst_dec = 0.0;
      for (std::size_t i = 0; i < users.size(); ++i) {
        const auto gen = teacher.generate_chain(users[i], i + 1);
        const auto ex = tc::make_distillation_example(gen.chain.steps, gen.tokens);
        worst_dec = std::max(worst_dec,
                             tc::gradient_check_decoder(dec, ex, cfg.decoder.lambda, gc_eps));
      }
      const bool ok = worst_ev < 1e-3 && worst_dec < 1e-3;
      std::printf("evaluator max relative error %.3e\ndecoder max relative error %.3e\n%s\n",
                  worst_ev, worst_dec, ok ? "PASS" : "FAIL");
      return ok ? 0 : kExitNumeric;
    } else if (*rollout) {
      const auto cfg = resolve(c_ref);
      const tc::City city = load_city(ref_city, cfg);
      const tc::SyntheticTeacher teacher(tc::load_policy(cfg));
      const auto users = load_users(ref_users, "reference", cfg, city);
      const auto r = tc::teacher_rollouts(users, tc::stage_seed(cfg, tc::Stage::kReferenceChains),
                                          teacher, city, cfg.inference.gravity);
      tc::write_trajectories(ref_out, r.trajectories);
      write_meta(ref_out, cfg, "teacher-rollout");
      std::printf("%zu teacher trajectories\n", r.trajectories.size());
    } else if (*simulate) {
      const auto cfg = resolve(c_sim);
      auto pl = load_pipeline(sim_paths, cfg);
      const auto users = load_users(sim_users, "query", cfg, pl->city);
      const auto run = tc::batch_simulate(users, pl->cache, pl->models(sim_refdec),
                                          cfg.inference, sim_sequential ? 1 : cfg.batch_size);
      tc::write_trajectories(sim_out, run.trajectories());
      write_meta(sim_out, cfg, "simulate");
      const auto records = run.records();
      if (!sim_eff.empty()) tc::write_efficiency_csv(sim_eff, records);
      if (!sim_cache_out.empty()) pl->cache.save(sim_cache_out, tc::config_hash(cfg));
      print_efficiency("pipeline",
                       tc::measure_efficiency(records, cfg.inference.cost, users.size(),
                                              run.elapsed_s));
      std::printf("explored pre-repair monotone rate %.4f\n", monotone_rate(run));
    } else if (*evaluate) {
      const auto cfg = resolve(c_eval);
      const auto ref = tc::read_trajectories(eval_ref);
      const auto gen = tc::read_trajectories(eval_gen);
      const auto q = tc::compare_quality(ref, gen);
      std::size_t pass = 0;
      for (const auto& t : gen) pass += tc::plausibility_audit(t).passed() ? 1 : 0;
      std::printf("distance %.4f  radius %.4f  duration %.4f (per-traj mean %.4f)  "
                  "locfreq %.4f  od %.4f  audit pass %.4f\n",
                  q.distance_jsd, q.radius_jsd, q.duration_jsd, q.mean_duration_jsd,
                  q.locfreq_jsd, q.od_jsd,
                  static_cast<double>(pass) / static_cast<double>(gen.size()));
      if (!eval_out.empty()) tc::write_quality_csv(eval_out, {{"generated", q}}, tc::config_hash(cfg));
      if (!eval_cov.empty()) {
        std::ofstream cov(eval_cov);
        cov << "# config_hash=" << tc::config_hash(cfg) << "\n# cell reference generated\n";
        for (const auto& c : tc::top_k_coverage(ref, gen)) {
          cov << c.cell << ' ' << c.reference_count << ' ' << c.generated_count << "\n";
        }
      }
    } else if (*bench) {
      const auto cfg = resolve(c_bench);
      auto pl = load_pipeline(bench_paths, cfg);
      const auto users = load_users(bench_users, "query", cfg, pl->city);
      const tc::CacheIndex pristine = pl->cache;
      const auto seq = tc::batch_simulate(users, pl->cache, pl->models(), cfg.inference, 1);
      pl->cache = pristine;
      const auto batched =
          tc::batch_simulate(users, pl->cache, pl->models(), cfg.inference, cfg.batch_size);
      const auto seq_records = seq.records();
      const auto rep = tc::measure_efficiency(seq_records, cfg.inference.cost, users.size(),
                                              batched.elapsed_s);
      const auto base = tc::generate_all(users, cfg, *pl->backend, pl->city);
      const auto base_records = base.records();
      const auto brep = tc::measure_efficiency(base_records, cfg.inference.cost);
      print_efficiency("pipeline", rep);
      print_efficiency("all-generate", brep);
      std::printf("time reduction %.2f%%  api cost reduction %.2f%%  batch speedup %.2fx\n",
                  100.0 * (1.0 - rep.inference_time_s_per_traj / brep.inference_time_s_per_traj),
                  100.0 * (1.0 - rep.cost_api_usd_per_traj / brep.cost_api_usd_per_traj),
                  rep.throughput_traj_per_s * rep.inference_time_s_per_traj);
      if (!bench_out.empty()) {
        std::ofstream out(bench_out);
        out << "# config_hash=" << tc::config_hash(cfg) << "\n";
        out << "method,inference_time_s_per_traj,tokens_per_s,throughput_traj_per_s,"
               "cost_api_usd_per_traj,cost_gpu_usd_per_traj,hit_rate\n";
        out << std::setprecision(8);
        for (const auto& [name, r] : {std::pair{"pipeline", rep}, std::pair{"all-generate", brep}}) {
          out << name << ',' << r.inference_time_s_per_traj << ',' << r.tokens_per_s << ','
              << r.throughput_traj_per_s << ',' << r.cost_api_usd_per_traj << ','
              << r.cost_gpu_usd_per_traj << ',' << r.hit_rate << "\n";
        }
      }
    } else if (*ablate) {
      const auto cfg = resolve(c_abl);
      auto pl = load_pipeline(abl_paths, cfg);
      tc::StudentDecoder no_law(0, cfg.decoder_hidden);
      no_law.load(abl_dec_nomd);
      const auto users = load_users(abl_users, "query", cfg, pl->city);
      const auto ref = tc::read_trajectories(abl_ref);
      const tc::CacheIndex pristine = pl->cache;
      const tc::RawCosineScorer cosine;
      struct Variant {
        std::string name;
        tc::Models models;
        double lambda;
      };
      tc::Models full = pl->models();
      tc::Models wo_le = full;
      wo_le.scorer = &cosine;
      tc::Models wo_md = full;
      wo_md.decoder = &no_law;
      const std::vector<Variant> variants = {{"full", full, cfg.decoder.lambda},
                                             {"w/o LE", wo_le, cfg.decoder.lambda},
                                             {"w/o MD", wo_md, 0.0},
                                             {"w/o LD", pl->models(true), cfg.decoder.lambda}};
      std::ofstream out(abl_out);
      if (!out) tc::fail(tc::ErrorCode::kIoFailure, "cannot write " + abl_out);
      out << "# config_hash=" << tc::config_hash(cfg) << "\n";
      out << "variant,lambda,distance_jsd,radius_jsd,duration_jsd,mean_duration_jsd,"
             "locfreq_jsd,od_jsd,"
             "explored_monotone_rate,inference_time_s_per_traj\n";
      out << std::setprecision(6);
      for (const auto& v : variants) {
        pl->cache = pristine;
        const auto run = tc::batch_simulate(users, pl->cache, v.models, cfg.inference,
                                            cfg.batch_size);
        const auto q = tc::compare_quality(ref, run.trajectories());
        const auto recs = run.records();
        const auto eff = tc::measure_efficiency(recs, cfg.inference.cost);
        out << v.name << ',' << v.lambda << ',' << q.distance_jsd << ',' << q.radius_jsd << ','
            << q.duration_jsd << ',' << q.mean_duration_jsd << ',' << q.locfreq_jsd << ','
            << q.od_jsd << ',' << monotone_rate(run) << ',' << eff.inference_time_s_per_traj << "\n";
        std::printf("%-8s duration %.4f locfreq %.4f od %.4f monotone %.4f time %.4f\n",
                    v.name.c_str(), q.duration_jsd, q.locfreq_jsd, q.od_jsd, monotone_rate(run),
                    eff.inference_time_s_per_traj);
      }
    } else if (*serve) {
      const auto cfg = resolve(c_srv);
      const tc::SyntheticTeacher teacher(tc::load_policy(cfg));
      tc::BackendServer server(teacher);
      const int port = server.start(srv_host, srv_port);
      std::printf("serving on %s:%d (config %s)\n", srv_host.c_str(), port,
                  tc::config_hash(cfg).c_str());
      std::fflush(stdout);
      std::signal(SIGINT, [](int) { g_stop = 1; });
      std::signal(SIGTERM, [](int) { g_stop = 1; });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
    } else if (*export_cache) {
      tc::CacheIndex::load(exp_cache).export_jsonl(exp_out);
    } else if (*dump_policy) {
      const auto cfg = resolve(c_pol);
      const std::string text = nlohmann::json(tc::load_policy(cfg)).dump(2);
      if (pol_out.empty()) {
        std::cout << text << "\n";
      } else {
        std::ofstream(pol_out) << text << "\n";
      }
    }
  } catch (const tc::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(tc::error_code_name(e.code())).c_str(),
                 e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return 0;
}

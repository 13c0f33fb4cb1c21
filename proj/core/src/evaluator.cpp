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

#include "trailcache/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "trailcache/errors.hpp"
#include "trailcache/rng.hpp"

namespace trailcache {

namespace {

// Block order inside the parameter set.
enum Block : std::size_t {
  kWc, kBc, kWs, kBs, kWo, kBo, kW1, kB1, kW2, kB2,
};

constexpr double kPositionScale = 1.0 / kMaxActivities;
constexpr char kCheckpointKind[] = "evaluator";

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Map<const VectorXd> as_vector(const LatentStep& s) {
  return Map<const VectorXd>(s.v.data(), kLatentDim);
}

struct Forward {
  VectorXd f;       // context features
  MatrixXd r;       // D x n prefix
  MatrixXd k;       // (H+1) x n keys
  VectorXd c;       // candidate
  VectorXd q;       // H+1 query
  VectorXd alpha;   // n
  VectorXd a;       // H+1 attended
  VectorXd u;       // H head input
  VectorXd g;       // H hidden
  double sigma = 0.0;
};

Forward run_forward(const ParameterSet& p, int hidden,
                    const ContextFeatures& context,
                    std::span<const LatentStep> prefix,
                    const LatentStep& candidate) {
  if (prefix.empty()) {
    fail(ErrorCode::kDimensionMismatch, "evaluator prefix must be non-empty");
  }
  const Eigen::Index h = hidden;
  const auto n = static_cast<Eigen::Index>(prefix.size());
  Forward fw;
  fw.f = Map<const VectorXd>(context.data(), kContextFeatureDim);
  fw.r.resize(kLatentDim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    fw.r.col(i) = as_vector(prefix[static_cast<std::size_t>(i)]);
  }
  fw.k.resize(h + 1, n);
  fw.k.topRows(h) = (p[kWs] * fw.r).colwise() + p[kBs].col(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    fw.k(h, i) = static_cast<double>(i) * kPositionScale;
  }
  fw.c = as_vector(candidate);
  fw.q.resize(h + 1);
  fw.q.head(h) = p[kWs] * fw.c + p[kBs].col(0);
  fw.q(h) = static_cast<double>(n) * kPositionScale;

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(h + 1));
  VectorXd e = (fw.k.transpose() * fw.q) * inv_sqrt;
  const double m = e.maxCoeff();
  fw.alpha = (e.array() - m).exp();
  fw.alpha /= fw.alpha.sum();
  fw.a = fw.k * fw.alpha;

  fw.u = p[kWc] * fw.f + p[kBc].col(0) + p[kWo] * fw.a + p[kBo].col(0) +
         fw.q.head(h);
  fw.g = (p[kW1] * fw.u + p[kB1].col(0)).array().tanh();
  const double z = (p[kW2] * fw.g)(0, 0) + p[kB2](0, 0);
  fw.sigma = 1.0 / (1.0 + std::exp(-z));
  return fw;
}

}  // namespace

EvaluatorModel::EvaluatorModel(std::uint64_t seed, int hidden)
    : hidden_(hidden) {
  const Eigen::Index h = hidden;
  params_.add("context_proj.weight", h, kContextFeatureDim);
  params_.add("context_proj.bias", h, 1);
  params_.add("step_proj.weight", h, kLatentDim);
  params_.add("step_proj.bias", h, 1);
  params_.add("attention_out.weight", h, h + 1);
  params_.add("attention_out.bias", h, 1);
  params_.add("head.hidden.weight", h, h);
  params_.add("head.hidden.bias", h, 1);
  params_.add("head.out.weight", 1, h);
  params_.add("head.out.bias", 1, 1);
  params_.init_uniform(0.1, seed);
}

double EvaluatorModel::score(const ContextFeatures& context,
                             std::span<const LatentStep> prefix,
                             const LatentStep& candidate) const {
  return run_forward(params_, hidden_, context, prefix, candidate).sigma;
}

double EvaluatorModel::score(const EvaluatorExample& example) const {
  return score(example.context, example.prefix, example.candidate);
}

double EvaluatorModel::loss(const EvaluatorExample& example) const {
  const double d = score(example) - example.label;
  return d * d;
}

double EvaluatorModel::accumulate_gradient(const EvaluatorExample& ex,
                                           ParameterSet& grad) const {
  const ParameterSet& p = params_;
  const Eigen::Index h = hidden_;
  const Forward fw = run_forward(p, hidden_, ex.context, ex.prefix, ex.candidate);
  const double diff = fw.sigma - ex.label;

  const double dz = 2.0 * diff * fw.sigma * (1.0 - fw.sigma);
  grad[kW2].noalias() += dz * fw.g.transpose();
  grad[kB2](0, 0) += dz;

  const VectorXd dpre1 =
      (dz * p[kW2].transpose()).array() * (1.0 - fw.g.array().square());
  grad[kW1].noalias() += dpre1 * fw.u.transpose();
  grad[kB1].col(0) += dpre1;
  const VectorXd du = p[kW1].transpose() * dpre1;

  grad[kWc].noalias() += du * fw.f.transpose();
  grad[kBc].col(0) += du;
  grad[kWo].noalias() += du * fw.a.transpose();
  grad[kBo].col(0) += du;
  const VectorXd da = p[kWo].transpose() * du;

  // a = K alpha
  MatrixXd dk = da * fw.alpha.transpose();
  const VectorXd dalpha = fw.k.transpose() * da;
  const double mean = fw.alpha.dot(dalpha);
  const VectorXd de = fw.alpha.array() * (dalpha.array() - mean);
  // e = K^T q / sqrt(H + 1)
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(h + 1));
  VectorXd dq = (fw.k * de) * inv_sqrt;
  dk.noalias() += (fw.q * de.transpose()) * inv_sqrt;

  VectorXd dsq = du + dq.head(h);
  const MatrixXd ds = dk.topRows(h);
  grad[kWs].noalias() += ds * fw.r.transpose();
  grad[kWs].noalias() += dsq * fw.c.transpose();
  grad[kBs].col(0) += ds.rowwise().sum() + dsq;
  return diff * diff;
}

void EvaluatorModel::save(const std::filesystem::path& path,
                          const std::string& config_hash) const {
  params_.save(path, kCheckpointKind, config_hash);
}

void EvaluatorModel::load(const std::filesystem::path& path) {
  params_.load(path, kCheckpointKind);
}

std::vector<EvaluatorExample> build_labels(const CacheIndex& cache,
                                           const ReasoningBackend& backend,
                                           std::size_t n_examples,
                                           std::uint64_t seed) {
  if (cache.entry_count() < 2) {
    fail(ErrorCode::kEmptyCache, "label construction needs at least 2 chains");
  }
  Rng rng(hash_all({seed, 0x1abe1ULL}));
  std::vector<EvaluatorExample> out;
  out.reserve(n_examples);
  const auto n_nodes = static_cast<std::int64_t>(cache.node_count());
  for (std::size_t i = 0; i < n_examples; ++i) {
    const auto chain_id = static_cast<ChainId>(
        rng.uniform_int(0, static_cast<std::int64_t>(cache.entry_count()) - 1));
    const CacheEntry& e = cache.entry(chain_id);
    const std::vector<NodeId> path = cache.chain_path(chain_id);
    const auto t = static_cast<std::size_t>(rng.uniform_int(1, e.length - 1));

    EvaluatorExample ex;
    ex.context = cache.features(chain_id);
    for (std::size_t j = 0; j < t; ++j) ex.prefix.push_back(cache.embedding(path[j]));
    const LatentStep r_hat = backend.next_step(e.context, ex.prefix, e.teacher_seed);

    ex.positive = (i % 2 == 0);
    if (ex.positive) {
      ex.candidate = cache.embedding(path[t]);
    } else {
      NodeId other;
      do {
        other = static_cast<NodeId>(rng.uniform_int(0, n_nodes - 1));
      } while (cache.node(other).chain_id == chain_id);
      ex.candidate = cache.embedding(other);
    }
    ex.label = (1.0 + cosine(ex.candidate.v, r_hat.v)) / 2.0;
    out.push_back(std::move(ex));
  }
  return out;
}

double mean_squared_error(const EvaluatorModel& model,
                          std::span<const EvaluatorExample> examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : examples) total += model.loss(ex);
  return total / static_cast<double>(examples.size());
}

EvaluatorTrainingReport train(EvaluatorModel& model,
                              std::span<const EvaluatorExample> examples,
                              const EvaluatorTrainOptions& options) {
  if (examples.size() < 100) {
    fail(ErrorCode::kInvalidArgument, "training needs at least 100 examples");
  }
  if (options.batch_size == 0) fail(ErrorCode::kInvalidArgument, "batch size 0");
  EvaluatorTrainingReport report;
  report.mse.push_back(mean_squared_error(model, examples));

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(hash_all({options.seed, 0x7a1eULL}));
  ParameterSet grad = model.params().zeros_like();

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      grad.set_zero();
      for (std::size_t b = start; b < end; ++b) {
        model.accumulate_gradient(examples[order[b]], grad);
      }
      model.params().axpy(-options.learning_rate / static_cast<double>(end - start),
                          grad);
    }
    const double mse = mean_squared_error(model, examples);
    if (!std::isfinite(mse) || !model.params().all_finite()) {
      fail(ErrorCode::kNonFiniteLoss,
           "evaluator training diverged at epoch " + std::to_string(epoch) +
               " (mse " + std::to_string(mse) + ", lr " +
               std::to_string(options.learning_rate) + ")");
    }
    report.mse.push_back(mse);
  }
  return report;
}

void EvaluatorTrainingReport::write_csv(const std::filesystem::path& path,
                                        const std::string& config_hash) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIoFailure, "cannot open " + path.string());
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << '\n';
  out << "epoch,mse\n";
  out.precision(17);
  for (std::size_t e = 0; e < mse.size(); ++e) out << e << ',' << mse[e] << '\n';
}

ParameterSet analytic_gradient(const EvaluatorModel& model,
                               const EvaluatorExample& example) {
  ParameterSet grad = model.params().zeros_like();
  model.accumulate_gradient(example, grad);
  return grad;
}

ParameterSet numeric_gradient(const EvaluatorModel& model,
                              const EvaluatorExample& example, double epsilon) {
  EvaluatorModel probe = model;
  ParameterSet grad = model.params().zeros_like();
  const std::size_t n = probe.params().scalar_count();
  for (std::size_t i = 0; i < n; ++i) {
    double& w = probe.params().scalar(i);
    const double saved = w;
    w = saved + epsilon;
    const double up = probe.loss(example);
    w = saved - epsilon;
    const double down = probe.loss(example);
    w = saved;
    grad.scalar(i) = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

double gradient_check(const EvaluatorModel& model,
                      const EvaluatorExample& example, double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    fail(ErrorCode::kInvalidArgument, "epsilon outside [1e-7, 1e-3]");
  }
  return max_relative_error(analytic_gradient(model, example),
                            numeric_gradient(model, example, epsilon));
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) {
    fail(ErrorCode::kDimensionMismatch, "scores and labels differ in length");
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with average ranks for ties.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (positive[idx[k]]) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = idx.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorCode::kInvalidArgument, "AUC needs both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

}  // namespace trailcache

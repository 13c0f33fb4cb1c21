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

// Branch scorer g(q, R_{1:t-1}, r_t) and its training loop.
//
// Architecture: context projection, step projection, one attention block
// with the projected candidate as query over the projected prefix (each
// key tagged with depth / 9), an output projection, and a tanh/sigmoid
// feed-forward head. Gradients are derived by hand.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trailcache/cache.hpp"
#include "trailcache/domain.hpp"
#include "trailcache/params.hpp"
#include "trailcache/teacher.hpp"

namespace trailcache {

struct EvaluatorExample {
  ContextFeatures context{};
  std::vector<LatentStep> prefix;  // R_{1:t-1}, at least one step
  LatentStep candidate;            // r_t
  double label = 0.0;              // b_t in [0, 1]
  bool positive = false;           // candidate is the chain's true next step
};

class EvaluatorModel {
 public:
  static constexpr int kDefaultHidden = 64;

  explicit EvaluatorModel(std::uint64_t seed = 0, int hidden = kDefaultHidden);

  double score(const ContextFeatures& context,
               std::span<const LatentStep> prefix,
               const LatentStep& candidate) const;
  double score(const EvaluatorExample& example) const;

  // Squared error (sigma - b)^2 of one example.
  double loss(const EvaluatorExample& example) const;
  // Returns the loss and adds its gradient into `grad`.
  double accumulate_gradient(const EvaluatorExample& example,
                             ParameterSet& grad) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  int hidden() const { return hidden_; }

  void save(const std::filesystem::path& path,
            const std::string& config_hash = {}) const;
  void load(const std::filesystem::path& path);

 private:
  int hidden_;
  ParameterSet params_;
};

// Samples (chain, t) pairs from the cache; half the candidates are the true
// next node, half are random nodes of other chains. The label is
// (1 + cos(candidate, r_hat)) / 2 with r_hat from the backend, continuing
// the prefix under the chain's own rollout seed.
std::vector<EvaluatorExample> build_labels(const CacheIndex& cache,
                                           const ReasoningBackend& backend,
                                           std::size_t n_examples,
                                           std::uint64_t seed);

struct EvaluatorTrainOptions {
  int epochs = 50;
  double learning_rate = 1e-2;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct EvaluatorTrainingReport {
  // mse[0] is the loss before training, mse[e] after epoch e.
  std::vector<double> mse;
  void write_csv(const std::filesystem::path& path,
                 const std::string& config_hash = {}) const;
};

double mean_squared_error(const EvaluatorModel& model,
                          std::span<const EvaluatorExample> examples);

EvaluatorTrainingReport train(EvaluatorModel& model,
                              std::span<const EvaluatorExample> examples,
                              const EvaluatorTrainOptions& options);

ParameterSet analytic_gradient(const EvaluatorModel& model,
                               const EvaluatorExample& example);
ParameterSet numeric_gradient(const EvaluatorModel& model,
                              const EvaluatorExample& example, double epsilon);
double gradient_check(const EvaluatorModel& model,
                      const EvaluatorExample& example, double epsilon = 1e-5);

// Area under the ROC curve, ties counted as one half.
double roc_auc(std::span<const double> scores, const std::vector<bool>& positive);

}  // namespace trailcache

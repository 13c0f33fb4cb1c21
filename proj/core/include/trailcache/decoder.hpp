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

// Lightweight student decoder distilled from the backend's reference
// decoding, with a jump-length law head trained through a KL constraint.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "trailcache/domain.hpp"
#include "trailcache/params.hpp"
#include "trailcache/tokens.hpp"

namespace trailcache {

inline constexpr double kLawSmoothing = 1e-3;
using LawDistribution = std::array<double, kDistanceBins>;

// Histogram of distance-bin tokens, add-epsilon smoothed and renormalised.
LawDistribution teacher_law_distribution(const TokenSequence& tokens);

struct DistillationExample {
  std::vector<LatentStep> chain;
  TokenSequence teacher_tokens;
  LawDistribution p_teacher{};
};

DistillationExample make_distillation_example(std::vector<LatentStep> chain,
                                              TokenSequence teacher_tokens);

// Anything that maps a latent chain to activity tokens.
class ChainDecoder {
 public:
  virtual ~ChainDecoder() = default;
  virtual TokenSequence decode(std::span<const LatentStep> chain) const = 0;
};

struct DecoderLosses {
  double distill = 0.0;
  double law = 0.0;
  double total = 0.0;
};

class StudentDecoder : public ChainDecoder {
 public:
  static constexpr int kDefaultHidden = 64;

  explicit StudentDecoder(std::uint64_t seed = 0, int hidden = kDefaultHidden);

  TokenSequence decode(std::span<const LatentStep> chain) const override;
  // z_tau(h_light) for a chain, h_light being the mean hidden state.
  LawDistribution law(std::span<const LatentStep> chain) const;

  DecoderLosses losses(const DistillationExample& example, double lambda) const;
  // Returns the example's losses and adds the gradient of L_total.
  DecoderLosses accumulate_gradient(const DistillationExample& example,
                                    double lambda, ParameterSet& grad) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  int hidden() const { return hidden_; }
  // Index range of the law-head blocks inside params().
  static constexpr std::size_t kLawBlockBegin = 13;

  void save(const std::filesystem::path& path,
            const std::string& config_hash = {}) const;
  void load(const std::filesystem::path& path);

 private:
  int hidden_;
  ParameterSet params_;
};

// One gradient-descent update on the batch mean of L_total.
DecoderLosses train_step(StudentDecoder& model,
                         std::span<const DistillationExample> batch,
                         double lambda, double learning_rate);

struct DecoderTrainOptions {
  int epochs = 60;
  double learning_rate = 1e-2;
  double lambda = 0.05;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  // Cosine schedule from learning_rate down to learning_rate * this value.
  double final_lr_fraction = 1.0;
};

struct DecoderTrainingReport {
  std::vector<DecoderLosses> curve;  // curve[0] before training
  void write_csv(const std::filesystem::path& path,
                 const std::string& config_hash = {}) const;
};

DecoderLosses mean_losses(const StudentDecoder& model,
                          std::span<const DistillationExample> examples,
                          double lambda);

DecoderTrainingReport train(StudentDecoder& model,
                            std::span<const DistillationExample> examples,
                            const DecoderTrainOptions& options);

struct DecoderEvaluation {
  double token_accuracy = 0.0;  // over content tokens
  double kind_accuracy = 0.0;
  double time_accuracy = 0.0;
  double distance_accuracy = 0.0;
  double mean_law_kl = 0.0;     // KL(z || p_teacher)
};

DecoderEvaluation evaluate_decoder(const StudentDecoder& model,
                                   std::span<const DistillationExample> examples);

ParameterSet analytic_gradient(const StudentDecoder& model,
                               const DistillationExample& example, double lambda);
ParameterSet numeric_gradient(const StudentDecoder& model,
                              const DistillationExample& example, double lambda,
                              double epsilon);
double gradient_check_decoder(const StudentDecoder& model,
                              const DistillationExample& example, double lambda,
                              double epsilon = 1e-5);

double kl_divergence(std::span<const double> p, std::span<const double> q);

}  // namespace trailcache

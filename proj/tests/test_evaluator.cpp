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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "test_util.hpp"
#include "trailcache/errors.hpp"
#include "trailcache/evaluator.hpp"

namespace trailcache {
namespace {

CacheIndex teacher_cache(const SyntheticTeacher& teacher, int chains, std::uint64_t seed) {
  CacheIndex cache;
  Rng rng(seed);
  for (int i = 0; i < chains; ++i) {
    const auto ctx = testing::random_context(rng, i);
    const std::uint64_t s = rng.next_u64();
    cache.insert_chain(ctx, teacher.generate_chain(ctx, s).chain.steps, s);
  }
  return cache;
}

EvaluatorExample random_example(Rng& rng, int prefix_len) {
  EvaluatorExample ex;
  ex.context = context_features(testing::random_context(rng, 0));
  for (int i = 0; i < prefix_len; ++i) ex.prefix.push_back(testing::random_step(rng));
  ex.candidate = testing::random_step(rng);
  ex.label = rng.uniform();
  return ex;
}

TEST(Labels, ExtremesAndStatistics) {
  const SyntheticTeacher teacher;
  const auto cache = teacher_cache(teacher, 300, 1);
  const auto examples = build_labels(cache, teacher, 1000, 5);
  ASSERT_EQ(examples.size(), 1000u);
  double pos = 0, neg = 0;
  int n_pos = 0;
  for (const auto& ex : examples) {
    ASSERT_GE(ex.label, 0.0);
    ASSERT_LE(ex.label, 1.0);
    ASSERT_GE(ex.prefix.size(), 1u);
    if (ex.positive) {
      pos += ex.label;
      ++n_pos;
    } else {
      neg += ex.label;
    }
  }
  const double frac = n_pos / 1000.0;
  EXPECT_GE(frac, 0.4);
  EXPECT_LE(frac, 0.6);
  EXPECT_GE(pos / n_pos - neg / (1000 - n_pos), 0.2);

  // The label map sends identical vectors to 1 and antipodal ones to 0.
  Rng rng(3);
  const LatentStep v = testing::random_step(rng);
  LatentStep flipped = v;
  for (double& x : flipped.v) x = -x;
  EXPECT_DOUBLE_EQ((1.0 + cosine(v.v, v.v)) / 2.0, 1.0);
  EXPECT_DOUBLE_EQ((1.0 + cosine(v.v, flipped.v)) / 2.0, 0.0);
  EXPECT_EQ(build_labels(cache, teacher, 50, 5).size(), 50u);
  EXPECT_EQ(build_labels(cache, teacher, 50, 5)[7].label, examples[7].label);
}

TEST(Labels, MatchIndependentTeacherRollout) {
  const SyntheticTeacher teacher;
  const auto cache = teacher_cache(teacher, 50, 2);
  for (const auto& ex : build_labels(cache, teacher, 200, 9)) {
    if (!ex.positive) continue;
    // A positive candidate is the chain's own next step, which the teacher
    // regenerates exactly from the same rollout seed: label 1.
    EXPECT_NEAR(ex.label, 1.0, 1e-12);
  }
}

TEST(Labels, EmptyCacheRejected) {
  const SyntheticTeacher teacher;
  try {
    build_labels(CacheIndex{}, teacher, 10, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyCache);
  }
}

TEST(Score, RangeDeterminismAndOrderSensitivity) {
  Rng rng(4);
  const EvaluatorModel model(1);
  for (int i = 0; i < 100; ++i) {
    const auto ex = random_example(rng, 1 + i % 8);
    const double s = model.score(ex);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    EXPECT_EQ(s, model.score(ex));
  }
  auto ex = random_example(rng, 3);
  auto swapped = ex;
  std::swap(swapped.prefix[0], swapped.prefix[2]);
  EXPECT_NE(model.score(ex), model.score(swapped));
  EXPECT_THROW(model.score(ex.context, {}, ex.candidate), Error);
}

TEST(Gradient, MatchesFiniteDifferences) {
  Rng rng(5);
  const EvaluatorModel model(2, 16);
  for (int i = 0; i < 4; ++i) {
    const auto ex = random_example(rng, 1 + 2 * i);
    EXPECT_LT(gradient_check(model, ex, 1e-5), 1e-3);
  }
}

TEST(Gradient, VanishesAtTheLabel) {
  Rng rng(6);
  const EvaluatorModel model(3, 16);
  auto ex = random_example(rng, 3);
  ex.label = model.score(ex);
  const auto g = analytic_gradient(model, ex);
  double sq = 0;
  for (std::size_t b = 0; b < g.size(); ++b) sq += g[b].squaredNorm();
  EXPECT_LT(std::sqrt(sq), 1e-9);
}

TEST(Gradient, CheckDetectsCorruption) {
  Rng rng(7);
  const EvaluatorModel model(4, 16);
  const auto ex = random_example(rng, 4);
  auto analytic = analytic_gradient(model, ex);
  const auto numeric = numeric_gradient(model, ex, 1e-5);
  EXPECT_LT(max_relative_error(analytic, numeric), 1e-3);
  // Corrupt the largest entry of the first block by 10%.
  Eigen::Index r, c;
  analytic[0].cwiseAbs().maxCoeff(&r, &c);
  analytic[0](r, c) *= 1.1;
  EXPECT_GT(max_relative_error(analytic, numeric), 1e-3);
}

std::vector<EvaluatorExample> constant_examples(double label, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EvaluatorExample> out;
  for (int i = 0; i < n; ++i) {
    auto ex = random_example(rng, 1 + i % 6);
    ex.label = label;
    out.push_back(ex);
  }
  return out;
}

TEST(Train, ConstantLabelFit) {
  EvaluatorModel model(5, 16);
  const auto ex = constant_examples(0.7, 300, 8);
  train(model, ex, {60, 0.1, 32, 1});
  double mean = 0;
  for (const auto& e : ex) mean += model.score(e);
  mean /= static_cast<double>(ex.size());
  EXPECT_GE(mean, 0.65);
  EXPECT_LE(mean, 0.75);
}

TEST(Train, ZeroLearningRateChangesNothing) {
  EvaluatorModel model(6, 16);
  const auto before = model.params();
  const auto ex = constant_examples(0.3, 120, 9);
  const auto report = train(model, ex, {3, 0.0, 32, 1});
  EXPECT_TRUE(model.params() == before);
  for (double m : report.mse) EXPECT_EQ(m, report.mse.front());
}

TEST(Train, TwoThousandExamplesHalveTheError) {
  const SyntheticTeacher teacher;
  const auto cache = teacher_cache(teacher, 400, 10);
  const auto ex = build_labels(cache, teacher, 2000, 11);
  EvaluatorModel model(7);
  const auto report = train(model, ex, {50, 1e-2, 32, 2});
  ASSERT_EQ(report.mse.size(), 51u);
  EXPECT_LT(report.mse.back(), report.mse.front());
  EXPECT_LE(report.mse.back(), 0.5 * report.mse.front())
      << "initial " << report.mse.front() << " final " << report.mse.back();
}

TEST(Train, TooFewExamplesRejected) {
  EvaluatorModel model(8, 8);
  EXPECT_THROW(train(model, constant_examples(0.5, 99, 1), {}), Error);
}

// Pairwise definition: P(score_pos > score_neg) + 0.5 P(equal).
double oracle_auc(const std::vector<double>& s, const std::vector<bool>& pos) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (pos[j]) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

TEST(Auc, MatchesPairwiseOracle) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s;
    std::vector<bool> p;
    for (int i = 0; i < 300; ++i) {
      const bool is_pos = rng.uniform() < 0.5;
      p.push_back(is_pos);
      // Coarse values force ties.
      s.push_back(std::round((rng.uniform() + (is_pos ? 0.3 : 0.0)) * 10) / 10);
    }
    EXPECT_NEAR(roc_auc(s, p), oracle_auc(s, p), 1e-12);
  }
  EXPECT_DOUBLE_EQ(roc_auc(std::vector<double>{0.1, 0.9}, {false, true}), 1.0);
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(13);
  const EvaluatorModel model(9, 16);
  const auto path = std::filesystem::temp_directory_path() / "trailcache_eval.ckpt";
  model.save(path, "h1");
  EvaluatorModel loaded(0, 16);
  loaded.load(path);
  EXPECT_TRUE(loaded.params() == model.params());
  const auto ex = random_example(rng, 3);
  EXPECT_EQ(loaded.score(ex), model.score(ex));
  EvaluatorModel wrong(0, 8);
  EXPECT_THROW(wrong.load(path), Error);
}

}  // namespace
}  // namespace trailcache

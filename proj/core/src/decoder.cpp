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

#include "trailcache/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "trailcache/errors.hpp"
#include "trailcache/rng.hpp"

namespace trailcache {

namespace {

enum Block : std::size_t {
  kP1, kC1, kP2, kC2, kWx, kWh, kBh, kKk, kBk, kKt, kBt, kKd, kBd, kZ, kBz,
};

constexpr char kCheckpointKind[] = "student_decoder";

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Forward {
  MatrixXd r;      // D x T
  MatrixXd a;      // H x T projector hidden
  MatrixXd x;      // H x T projected steps
  MatrixXd h;      // H x T recurrent states
  MatrixXd pk;     // 8 x T
  MatrixXd pt;     // 48 x T
  MatrixXd pd;     // 10 x T
  VectorXd hbar;   // H
  VectorXd z;      // 10
};

void softmax_columns(MatrixXd& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double mx = m.col(c).maxCoeff();
    m.col(c) = (m.col(c).array() - mx).exp();
    m.col(c) /= m.col(c).sum();
  }
}

Forward run_forward(const ParameterSet& p, std::span<const LatentStep> chain) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  if (n < kMinActivities || n > kMaxActivities) {
    fail(ErrorCode::kDimensionMismatch,
         "decoder expects 2-9 latent steps, got " + std::to_string(n));
  }
  Forward fw;
  fw.r.resize(kLatentDim, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    fw.r.col(t) = Eigen::Map<const VectorXd>(
        chain[static_cast<std::size_t>(t)].v.data(), kLatentDim);
  }
  fw.a = ((p[kP1] * fw.r).colwise() + p[kC1].col(0)).array().tanh();
  fw.x = (p[kP2] * fw.a).colwise() + p[kC2].col(0);
  const Eigen::Index hdim = p[kWh].rows();
  fw.h.resize(hdim, n);
  const MatrixXd wx_x = (p[kWx] * fw.x).colwise() + p[kBh].col(0);
  VectorXd prev = VectorXd::Zero(hdim);
  for (Eigen::Index t = 0; t < n; ++t) {
    fw.h.col(t) = (p[kWh] * prev + wx_x.col(t)).array().tanh();
    prev = fw.h.col(t);
  }
  fw.pk = (p[kKk] * fw.h).colwise() + p[kBk].col(0);
  fw.pt = (p[kKt] * fw.h).colwise() + p[kBt].col(0);
  fw.pd = (p[kKd] * fw.h).colwise() + p[kBd].col(0);
  softmax_columns(fw.pk);
  softmax_columns(fw.pt);
  softmax_columns(fw.pd);
  fw.hbar = fw.h.rowwise().mean();
  MatrixXd zl = p[kZ] * fw.hbar + p[kBz].col(0);
  softmax_columns(zl);
  fw.z = zl.col(0);
  return fw;
}

DecoderLosses compute_losses(const Forward& fw, const DistillationExample& ex,
                             double lambda) {
  const auto targets = content_tokens(ex.teacher_tokens);
  const auto n = static_cast<Eigen::Index>(targets.size());
  if (n != fw.h.cols()) {
    fail(ErrorCode::kDimensionMismatch, "teacher tokens do not match chain length");
  }
  double ce = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& y = targets[static_cast<std::size_t>(t)];
    ce -= std::log(fw.pk(y.kind, t)) + std::log(fw.pt(y.time, t)) +
          std::log(fw.pd(y.dist, t));
  }
  DecoderLosses l;
  l.distill = ce / (3.0 * static_cast<double>(n));
  l.law = kl_divergence({fw.z.data(), kDistanceBins}, ex.p_teacher);
  l.total = l.distill + lambda * l.law;
  return l;
}

}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) fail(ErrorCode::kDimensionMismatch, "KL lengths");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return kl;
}

LawDistribution teacher_law_distribution(const TokenSequence& tokens) {
  const auto acts = content_tokens(tokens);
  LawDistribution p{};
  for (const auto& a : acts) p[static_cast<std::size_t>(a.dist)] += 1.0;
  double total = 0.0;
  for (auto& v : p) {
    v = v / static_cast<double>(acts.size()) + kLawSmoothing;
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

DistillationExample make_distillation_example(std::vector<LatentStep> chain,
                                              TokenSequence teacher_tokens) {
  DistillationExample ex;
  ex.p_teacher = teacher_law_distribution(teacher_tokens);
  if (activity_count(teacher_tokens) != chain.size()) {
    fail(ErrorCode::kDimensionMismatch, "token count inconsistent with chain");
  }
  ex.chain = std::move(chain);
  ex.teacher_tokens = std::move(teacher_tokens);
  return ex;
}

StudentDecoder::StudentDecoder(std::uint64_t seed, int hidden) : hidden_(hidden) {
  const Eigen::Index h = hidden;
  params_.add("projector.l1.weight", h, kLatentDim);
  params_.add("projector.l1.bias", h, 1);
  params_.add("projector.l2.weight", h, h);
  params_.add("projector.l2.bias", h, 1);
  params_.add("rnn.input.weight", h, h);
  params_.add("rnn.recurrent.weight", h, h);
  params_.add("rnn.bias", h, 1);
  params_.add("head.kind.weight", kKindCount, h);
  params_.add("head.kind.bias", kKindCount, 1);
  params_.add("head.time.weight", kTimeBuckets, h);
  params_.add("head.time.bias", kTimeBuckets, 1);
  params_.add("head.distance.weight", kDistanceBins, h);
  params_.add("head.distance.bias", kDistanceBins, 1);
  params_.add("law.weight", kDistanceBins, h);
  params_.add("law.bias", kDistanceBins, 1);
  // Glorot-uniform weights, zero biases.
  Rng rng(hash_all({seed, 0xdec0deULL}));
  for (auto& b : params_.blocks()) {
    if (b.value.cols() == 1) continue;
    const double limit =
        std::sqrt(6.0 / static_cast<double>(b.value.rows() + b.value.cols()));
    for (Eigen::Index i = 0; i < b.value.size(); ++i) {
      b.value.data()[i] = rng.uniform(-limit, limit);
    }
  }
}

TokenSequence StudentDecoder::decode(std::span<const LatentStep> chain) const {
  const Forward fw = run_forward(params_, chain);
  std::vector<ActivityTokens> acts(chain.size());
  for (std::size_t t = 0; t < chain.size(); ++t) {
    const auto c = static_cast<Eigen::Index>(t);
    Eigen::Index i;
    fw.pk.col(c).maxCoeff(&i);
    acts[t].kind = static_cast<int>(i);
    fw.pt.col(c).maxCoeff(&i);
    acts[t].time = static_cast<int>(i);
    fw.pd.col(c).maxCoeff(&i);
    acts[t].dist = static_cast<int>(i);
  }
  return assemble_tokens(acts);
}

LawDistribution StudentDecoder::law(std::span<const LatentStep> chain) const {
  const Forward fw = run_forward(params_, chain);
  LawDistribution z{};
  for (std::size_t i = 0; i < kDistanceBins; ++i) {
    z[i] = fw.z(static_cast<Eigen::Index>(i));
  }
  return z;
}

DecoderLosses StudentDecoder::losses(const DistillationExample& example,
                                     double lambda) const {
  return compute_losses(run_forward(params_, example.chain), example, lambda);
}

DecoderLosses StudentDecoder::accumulate_gradient(const DistillationExample& ex,
                                                  double lambda,
                                                  ParameterSet& grad) const {
  const ParameterSet& p = params_;
  const Forward fw = run_forward(p, ex.chain);
  const DecoderLosses l = compute_losses(fw, ex, lambda);
  const auto targets = content_tokens(ex.teacher_tokens);
  const Eigen::Index n = fw.h.cols();
  const double scale = 1.0 / (3.0 * static_cast<double>(n));

  // Cross-entropy heads: d logits = (p - onehot) * scale.
  MatrixXd dk = fw.pk * scale;
  MatrixXd dt = fw.pt * scale;
  MatrixXd dd = fw.pd * scale;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& y = targets[static_cast<std::size_t>(t)];
    dk(y.kind, t) -= scale;
    dt(y.time, t) -= scale;
    dd(y.dist, t) -= scale;
  }
  grad[kKk].noalias() += dk * fw.h.transpose();
  grad[kBk].col(0) += dk.rowwise().sum();
  grad[kKt].noalias() += dt * fw.h.transpose();
  grad[kBt].col(0) += dt.rowwise().sum();
  grad[kKd].noalias() += dd * fw.h.transpose();
  grad[kBd].col(0) += dd.rowwise().sum();
  MatrixXd dh = p[kKk].transpose() * dk + p[kKt].transpose() * dt +
                p[kKd].transpose() * dd;

  // Law head: d/dz of lambda * sum z (log z - log p), through the softmax.
  if (lambda != 0.0) {
    VectorXd dz(kDistanceBins);
    for (Eigen::Index i = 0; i < dz.size(); ++i) {
      dz(i) = lambda * (std::log(fw.z(i)) -
                        std::log(ex.p_teacher[static_cast<std::size_t>(i)]) + 1.0);
    }
    const VectorXd dlogit = fw.z.array() * (dz.array() - fw.z.dot(dz));
    grad[kZ].noalias() += dlogit * fw.hbar.transpose();
    grad[kBz].col(0) += dlogit;
    const VectorXd dhbar = p[kZ].transpose() * dlogit;
    dh.colwise() += dhbar / static_cast<double>(n);
  }

  // Back-propagation through time.
  MatrixXd dpre(fw.h.rows(), n);
  VectorXd carry = VectorXd::Zero(fw.h.rows());
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const VectorXd total = dh.col(t) + carry;
    dpre.col(t) = total.array() * (1.0 - fw.h.col(t).array().square());
    carry = p[kWh].transpose() * dpre.col(t);
    if (t > 0) grad[kWh].noalias() += dpre.col(t) * fw.h.col(t - 1).transpose();
  }
  grad[kWx].noalias() += dpre * fw.x.transpose();
  grad[kBh].col(0) += dpre.rowwise().sum();

  const MatrixXd dx = p[kWx].transpose() * dpre;
  grad[kP2].noalias() += dx * fw.a.transpose();
  grad[kC2].col(0) += dx.rowwise().sum();
  const MatrixXd da =
      (p[kP2].transpose() * dx).array() * (1.0 - fw.a.array().square());
  grad[kP1].noalias() += da * fw.r.transpose();
  grad[kC1].col(0) += da.rowwise().sum();
  return l;
}

void StudentDecoder::save(const std::filesystem::path& path,
                          const std::string& config_hash) const {
  params_.save(path, kCheckpointKind, config_hash);
}

void StudentDecoder::load(const std::filesystem::path& path) {
  params_.load(path, kCheckpointKind);
}

DecoderLosses train_step(StudentDecoder& model,
                         std::span<const DistillationExample> batch,
                         double lambda, double learning_rate) {
  if (lambda < 0.0) fail(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  if (batch.empty()) fail(ErrorCode::kInvalidArgument, "empty batch");
  ParameterSet grad = model.params().zeros_like();
  DecoderLosses sum;
  for (const auto& ex : batch) {
    const DecoderLosses l = model.accumulate_gradient(ex, lambda, grad);
    sum.distill += l.distill;
    sum.law += l.law;
    sum.total += l.total;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  sum.distill *= inv;
  sum.law *= inv;
  sum.total *= inv;
  if (!std::isfinite(sum.total)) {
    fail(ErrorCode::kNonFiniteLoss, "decoder loss is not finite (lr " +
                                        std::to_string(learning_rate) + ")");
  }
  model.params().axpy(-learning_rate * inv, grad);
  return sum;
}

DecoderLosses mean_losses(const StudentDecoder& model,
                          std::span<const DistillationExample> examples,
                          double lambda) {
  DecoderLosses sum;
  for (const auto& ex : examples) {
    const DecoderLosses l = model.losses(ex, lambda);
    sum.distill += l.distill;
    sum.law += l.law;
    sum.total += l.total;
  }
  if (!examples.empty()) {
    const double inv = 1.0 / static_cast<double>(examples.size());
    sum.distill *= inv;
    sum.law *= inv;
    sum.total *= inv;
  }
  return sum;
}

DecoderTrainingReport train(StudentDecoder& model,
                            std::span<const DistillationExample> examples,
                            const DecoderTrainOptions& options) {
  if (examples.empty()) fail(ErrorCode::kInvalidArgument, "no examples");
  if (options.batch_size == 0) fail(ErrorCode::kInvalidArgument, "batch size 0");
  DecoderTrainingReport report;
  report.curve.push_back(mean_losses(model, examples, options.lambda));
  std::vector<DistillationExample> shuffled(examples.begin(), examples.end());
  Rng rng(hash_all({options.seed, 0xd15711ULL}));
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    const double progress =
        static_cast<double>(epoch - 1) / std::max(1, options.epochs - 1);
    const double f = options.final_lr_fraction;
    const double lr = options.learning_rate *
                      (f + (1.0 - f) * 0.5 * (1.0 + std::cos(M_PI * progress)));
    for (std::size_t i = shuffled.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(shuffled[i - 1], shuffled[j]);
    }
    for (std::size_t start = 0; start < shuffled.size(); start += options.batch_size) {
      const std::size_t end = std::min(shuffled.size(), start + options.batch_size);
      train_step(model, std::span(shuffled).subspan(start, end - start),
                 options.lambda, lr);
    }
    const DecoderLosses l = mean_losses(model, examples, options.lambda);
    if (!std::isfinite(l.total) || !model.params().all_finite()) {
      fail(ErrorCode::kNonFiniteLoss,
           "decoder training diverged at epoch " + std::to_string(epoch));
    }
    report.curve.push_back(l);
  }
  return report;
}

void DecoderTrainingReport::write_csv(const std::filesystem::path& path,
                                      const std::string& config_hash) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIoFailure, "cannot open " + path.string());
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << '\n';
  out << "epoch,L_distill,L_law,L_total\n";
  out.precision(17);
  for (std::size_t e = 0; e < curve.size(); ++e) {
    out << e << ',' << curve[e].distill << ',' << curve[e].law << ','
        << curve[e].total << '\n';
  }
}

DecoderEvaluation evaluate_decoder(const StudentDecoder& model,
                                   std::span<const DistillationExample> examples) {
  DecoderEvaluation ev;
  std::size_t acts = 0;
  std::size_t kind_ok = 0, time_ok = 0, dist_ok = 0;
  for (const auto& ex : examples) {
    const auto got = content_tokens(model.decode(ex.chain));
    const auto want = content_tokens(ex.teacher_tokens);
    for (std::size_t i = 0; i < want.size(); ++i) {
      kind_ok += got[i].kind == want[i].kind;
      time_ok += got[i].time == want[i].time;
      dist_ok += got[i].dist == want[i].dist;
    }
    acts += want.size();
    const LawDistribution z = model.law(ex.chain);
    ev.mean_law_kl += kl_divergence(z, ex.p_teacher);
  }
  if (acts == 0) return ev;
  const double n = static_cast<double>(acts);
  ev.kind_accuracy = static_cast<double>(kind_ok) / n;
  ev.time_accuracy = static_cast<double>(time_ok) / n;
  ev.distance_accuracy = static_cast<double>(dist_ok) / n;
  ev.token_accuracy = static_cast<double>(kind_ok + time_ok + dist_ok) / (3.0 * n);
  ev.mean_law_kl /= static_cast<double>(examples.size());
  return ev;
}

ParameterSet analytic_gradient(const StudentDecoder& model,
                               const DistillationExample& example, double lambda) {
  ParameterSet grad = model.params().zeros_like();
  model.accumulate_gradient(example, lambda, grad);
  return grad;
}

ParameterSet numeric_gradient(const StudentDecoder& model,
                              const DistillationExample& example, double lambda,
                              double epsilon) {
  StudentDecoder probe = model;
  ParameterSet grad = model.params().zeros_like();
  const std::size_t n = probe.params().scalar_count();
  for (std::size_t i = 0; i < n; ++i) {
    double& w = probe.params().scalar(i);
    const double saved = w;
    w = saved + epsilon;
    const double up = probe.losses(example, lambda).total;
    w = saved - epsilon;
    const double down = probe.losses(example, lambda).total;
    w = saved;
    grad.scalar(i) = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

double gradient_check_decoder(const StudentDecoder& model,
                              const DistillationExample& example, double lambda,
                              double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    fail(ErrorCode::kInvalidArgument, "epsilon outside [1e-7, 1e-3]");
  }
  return max_relative_error(analytic_gradient(model, example, lambda),
                            numeric_gradient(model, example, lambda, epsilon));
}

}  // namespace trailcache

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

#include "trailcache/params.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "trailcache/errors.hpp"
#include "trailcache/rng.hpp"

namespace trailcache {

namespace {
constexpr char kMagic[4] = {'T', 'C', 'K', 'P'};
}  // namespace

Eigen::MatrixXd& ParameterSet::add(const std::string& name, Eigen::Index rows,
                                   Eigen::Index cols) {
  blocks_.push_back({name, Eigen::MatrixXd::Zero(rows, cols)});
  return blocks_.back().value;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks_) n += static_cast<std::size_t>(b.value.size());
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& b : blocks_) out.add(b.name, b.value.rows(), b.value.cols());
  return out;
}

void ParameterSet::set_zero() {
  for (auto& b : blocks_) b.value.setZero();
}

void ParameterSet::init_uniform(double limit, std::uint64_t seed) {
  Rng rng(seed);
  // Column-major fill order is part of the reproducibility contract.
  for (auto& b : blocks_) {
    for (Eigen::Index i = 0; i < b.value.size(); ++i) {
      b.value.data()[i] = rng.uniform(-limit, limit);
    }
  }
}

void ParameterSet::axpy(double scale, const ParameterSet& other) {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].value.noalias() += scale * other.blocks_[i].value;
  }
}

bool ParameterSet::all_finite() const {
  return std::all_of(blocks_.begin(), blocks_.end(),
                     [](const ParameterBlock& b) { return b.value.allFinite(); });
}

double& ParameterSet::scalar(std::size_t flat_index) {
  for (auto& b : blocks_) {
    const auto n = static_cast<std::size_t>(b.value.size());
    if (flat_index < n) return b.value.data()[flat_index];
    flat_index -= n;
  }
  fail(ErrorCode::kOutOfRange, "parameter index");
}

void ParameterSet::save(const std::filesystem::path& path,
                        const std::string& kind,
                        const std::string& config_hash) const {
  detail::ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(kind);
  w.str(config_hash);
  w.u32(static_cast<std::uint32_t>(blocks_.size()));
  for (const auto& b : blocks_) {
    w.str(b.name);
    w.u32(static_cast<std::uint32_t>(b.value.rows()));
    w.u32(static_cast<std::uint32_t>(b.value.cols()));
    for (Eigen::Index i = 0; i < b.value.size(); ++i) w.f64(b.value.data()[i]);
  }
  w.u32(detail::crc32_of(w.bytes().data(), w.bytes().size()));
  detail::write_file(path, w.bytes());
}

void ParameterSet::load(const std::filesystem::path& path,
                        const std::string& kind) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < 12 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    fail(ErrorCode::kIoFailure, path.string() + " is not a checkpoint");
  }
  detail::ByteReader r(bytes.data() + 4, bytes.size() - 8);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kFormatVersionMismatch,
         "checkpoint version " + std::to_string(version));
  }
  detail::ByteReader tail(bytes.data() + bytes.size() - 4, 4);
  if (tail.u32() != detail::crc32_of(bytes.data(), bytes.size() - 4)) {
    fail(ErrorCode::kChecksumMismatch, path.string());
  }
  if (r.str() != kind) {
    fail(ErrorCode::kIoFailure, path.string() + " holds a different model kind");
  }
  r.str();  // config hash, informational
  const std::uint32_t n = r.u32();
  if (n != blocks_.size()) fail(ErrorCode::kDimensionMismatch, "block count");
  for (auto& b : blocks_) {
    if (r.str() != b.name) fail(ErrorCode::kDimensionMismatch, "block name");
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (rows != b.value.rows() || cols != b.value.cols()) {
      fail(ErrorCode::kDimensionMismatch, "shape of block " + b.name);
    }
    for (Eigen::Index i = 0; i < b.value.size(); ++i) b.value.data()[i] = r.f64();
  }
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& a = blocks_[i];
    const auto& b = other.blocks_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() ||
        a.value.cols() != b.value.cols() || a.value != b.value) {
      return false;
    }
  }
  return true;
}

double max_relative_error(const ParameterSet& analytic,
                          const ParameterSet& numeric, double floor) {
  double worst = 0.0;
  for (std::size_t b = 0; b < analytic.size(); ++b) {
    const auto& a = analytic[b];
    const auto& n = numeric[b];
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double x = a.data()[i];
      const double y = n.data()[i];
      const double denom = std::max({std::abs(x), std::abs(y), floor});
      worst = std::max(worst, std::abs(x - y) / denom);
    }
  }
  return worst;
}

}  // namespace trailcache

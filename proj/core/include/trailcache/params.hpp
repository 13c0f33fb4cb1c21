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

// Named parameter blocks shared by the evaluator and the student decoder,
// plus the checkpoint format: a versioned header followed by named blocks
// of little-endian f64 values.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace trailcache {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ParameterBlock {
  std::string name;
  Eigen::MatrixXd value;
};

class ParameterSet {
 public:
  Eigen::MatrixXd& add(const std::string& name, Eigen::Index rows,
                       Eigen::Index cols);

  std::vector<ParameterBlock>& blocks() { return blocks_; }
  const std::vector<ParameterBlock>& blocks() const { return blocks_; }
  Eigen::MatrixXd& operator[](std::size_t i) { return blocks_[i].value; }
  const Eigen::MatrixXd& operator[](std::size_t i) const {
    return blocks_[i].value;
  }
  std::size_t size() const { return blocks_.size(); }
  std::size_t scalar_count() const;

  // A zero-valued set with the same names and shapes.
  ParameterSet zeros_like() const;
  void set_zero();
  void init_uniform(double limit, std::uint64_t seed);
  // this += scale * other
  void axpy(double scale, const ParameterSet& other);
  bool all_finite() const;

  double& scalar(std::size_t flat_index);

  void save(const std::filesystem::path& path, const std::string& kind,
            const std::string& config_hash = {}) const;
  // Loads into an existing layout; names and shapes must match.
  void load(const std::filesystem::path& path, const std::string& kind);

  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<ParameterBlock> blocks_;
};

// |a - n| / max(|a|, |n|, floor), maximised over all scalars.
double max_relative_error(const ParameterSet& analytic,
                          const ParameterSet& numeric, double floor = 1e-7);

}  // namespace trailcache

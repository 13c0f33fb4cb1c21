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

// Tree-structured store of reasoning chains with exact similarity search.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trailcache/domain.hpp"

namespace trailcache {

inline constexpr std::uint32_t kCacheFormatVersion = 1;

struct CacheNode {
  NodeId node_id = 0;
  ChainId chain_id = 0;
  int depth = 0;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;  // children[0] continues the stored chain
  // For spliced nodes: the donor node the embedding was copied from. Its
  // continuation is what follows the splice.
  std::optional<NodeId> origin;
  bool operator==(const CacheNode&) const = default;
};

struct CacheEntry {
  ChainId chain_id = 0;
  SimulationContext context;
  NodeId root = 0;
  int length = 0;
  std::uint64_t teacher_seed = 0;  // seed of the rollout that produced it
  bool operator==(const CacheEntry&) const = default;
};

struct ContextMatch {
  ChainId chain_id = 0;
  double similarity = 0.0;
};

struct Candidate {
  NodeId node_id = 0;
  double cosine = 0.0;
  bool operator==(const Candidate&) const = default;
};

class CacheIndex {
 public:
  CacheIndex() = default;

  ChainId insert_chain(const SimulationContext& context,
                       std::span<const LatentStep> steps,
                       std::uint64_t teacher_seed = 0);

  std::optional<ContextMatch> match_context(const SimulationContext& query,
                                            double threshold) const;

  // Top-k over nodes of other chains at depth at.depth + 1 +- window.
  std::vector<Candidate> retrieve_candidates(NodeId at, std::size_t k,
                                             int depth_window) const;

  // Same scan with an explicit query vector and depth centre. Nodes of the
  // listed chains are skipped.
  std::vector<Candidate> retrieve_similar(
      std::span<const double> query, int center_depth, std::size_t k,
      int depth_window, std::span<const ChainId> excluded_chains) const;

  NodeId splice(NodeId at, const LatentStep& new_step,
                std::optional<NodeId> origin = std::nullopt);

  const CacheNode& node(NodeId id) const;
  const CacheEntry& entry(ChainId id) const;
  LatentStep embedding(NodeId id) const;
  std::span<const double> embedding_view(NodeId id) const;

  // Node ids on the stored path root -> leaf of a chain.
  std::vector<NodeId> chain_path(ChainId id) const;
  ReasoningChain chain(ChainId id) const;
  // Nodes that follow `id` along first children. For a spliced node
  // without children, the walk continues from its origin.
  std::vector<NodeId> continuation(NodeId id) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t entry_count() const { return entries_.size(); }
  std::span<const double> node_matrix() const { return matrix_; }
  const std::vector<CacheEntry>& entries() const { return entries_; }
  const ContextFeatures& features(ChainId id) const;

  // Structural self-check: no dangling ids, depth consistency, single root.
  std::string integrity_problem() const;

  void save(const std::filesystem::path& path,
            const std::string& config_hash = {}) const;
  static CacheIndex load(const std::filesystem::path& path);
  void export_jsonl(const std::filesystem::path& path) const;

  const std::string& config_hash() const { return config_hash_; }

  bool operator==(const CacheIndex& other) const;

 private:
  NodeId add_node(ChainId chain, int depth, std::optional<NodeId> parent,
                  const LatentStep& step, std::optional<NodeId> origin);

  std::vector<CacheEntry> entries_;            // indexed by chain_id
  std::vector<ContextFeatures> features_;      // indexed by chain_id
  std::vector<CacheNode> nodes_;               // indexed by node_id
  std::vector<double> matrix_;                 // node_count x kLatentDim
  std::vector<double> norms_;                  // per node
  std::string config_hash_;
};

}  // namespace trailcache

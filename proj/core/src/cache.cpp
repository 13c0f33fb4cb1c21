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

#include "trailcache/cache.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "trailcache/errors.hpp"
#include "trailcache/jsonio.hpp"

namespace trailcache {

namespace {

constexpr char kMagic[4] = {'M', 'O', 'B', 'C'};

enum SectionTag : std::uint32_t {
  kSectionMeta = 1,
  kSectionContexts = 2,
  kSectionEntries = 3,
  kSectionNodes = 4,
};

bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.cosine != b.cosine) return a.cosine > b.cosine;
  return a.node_id < b.node_id;
}

void write_context(detail::ByteWriter& w, const SimulationContext& c) {
  const Profile& p = c.profile;
  w.str(p.user_id);
  w.i32(p.age);
  w.i32(p.income_level);
  w.i32(p.occupation);
  w.f64(p.home.x);
  w.f64(p.home.y);
  w.f64(p.workplace.x);
  w.f64(p.workplace.y);
  w.i32(static_cast<int>(c.date.year()));
  w.u32(static_cast<unsigned>(c.date.month()));
  w.u32(static_cast<unsigned>(c.date.day()));
  w.u8(c.is_weekend ? 1 : 0);
  w.str(c.city_id);
}

SimulationContext read_context(detail::ByteReader& r) {
  SimulationContext c;
  Profile& p = c.profile;
  p.user_id = r.str();
  p.age = r.i32();
  p.income_level = r.i32();
  p.occupation = r.i32();
  p.home.x = r.f64();
  p.home.y = r.f64();
  p.workplace.x = r.f64();
  p.workplace.y = r.f64();
  const int y = r.i32();
  const unsigned m = r.u32();
  const unsigned d = r.u32();
  c.date = Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  c.is_weekend = r.u8() != 0;
  c.city_id = r.str();
  return c;
}

void write_section(detail::ByteWriter& out, SectionTag tag,
                   const detail::ByteWriter& body) {
  out.u32(tag);
  out.u64(body.bytes().size());
  out.append(body.bytes());
}

}  // namespace

NodeId CacheIndex::add_node(ChainId chain, int depth,
                            std::optional<NodeId> parent,
                            const LatentStep& step,
                            std::optional<NodeId> origin) {
  const NodeId id = nodes_.size();
  CacheNode n;
  n.node_id = id;
  n.chain_id = chain;
  n.depth = depth;
  n.parent = parent;
  n.origin = origin;
  nodes_.push_back(n);
  if (parent) nodes_[*parent].children.push_back(id);
  matrix_.insert(matrix_.end(), step.v.begin(), step.v.end());
  double sq = 0.0;
  for (double x : step.v) sq += x * x;
  norms_.push_back(sq);
  return id;
}

ChainId CacheIndex::insert_chain(const SimulationContext& context,
                                 std::span<const LatentStep> steps,
                                 std::uint64_t teacher_seed) {
  const auto n = static_cast<int>(steps.size());
  if (n < kMinActivities) {
    fail(ErrorCode::kChainTooShort, std::to_string(n) + " steps");
  }
  if (n > kMaxActivities) {
    fail(ErrorCode::kChainTooLong, std::to_string(n) + " steps");
  }
  for (const auto& s : steps) validate(s);
  const ChainId id = entries_.size();
  std::optional<NodeId> parent;
  NodeId root = 0;
  for (int t = 0; t < n; ++t) {
    const NodeId node =
        add_node(id, t, parent, steps[static_cast<std::size_t>(t)], std::nullopt);
    if (t == 0) root = node;
    parent = node;
  }
  CacheEntry e;
  e.chain_id = id;
  e.context = context;
  e.root = root;
  e.length = n;
  e.teacher_seed = teacher_seed;
  entries_.push_back(e);
  features_.push_back(context_features(context));
  return id;
}

std::optional<ContextMatch> CacheIndex::match_context(
    const SimulationContext& query, double threshold) const {
  if (entries_.empty()) return std::nullopt;
  const ContextFeatures q = context_features(query);
  ContextMatch best{0, -1.0};
  for (ChainId id = 0; id < entries_.size(); ++id) {
    const double s = feature_similarity(q, features_[id]);
    if (s > best.similarity) best = {id, s};
  }
  if (best.similarity >= threshold) return best;
  return std::nullopt;
}

std::vector<Candidate> CacheIndex::retrieve_candidates(NodeId at,
                                                       std::size_t k,
                                                       int depth_window) const {
  const CacheNode& n = node(at);
  const ChainId excluded[] = {n.chain_id};
  return retrieve_similar(embedding_view(at), n.depth + 1, k, depth_window,
                          excluded);
}

std::vector<Candidate> CacheIndex::retrieve_similar(
    std::span<const double> query, int center_depth, std::size_t k,
    int depth_window, std::span<const ChainId> excluded_chains) const {
  if (query.size() != kLatentDim) {
    fail(ErrorCode::kDimensionMismatch, "query dimension");
  }
  if (k == 0) fail(ErrorCode::kInvalidArgument, "k must be at least 1");
  double qn = 0.0;
  for (double x : query) qn += x * x;
  std::vector<Candidate> pool;
  const int lo = center_depth - depth_window;
  const int hi = center_depth + depth_window;
  for (const CacheNode& n : nodes_) {
    if (n.depth < lo || n.depth > hi) continue;
    if (std::find(excluded_chains.begin(), excluded_chains.end(), n.chain_id) !=
        excluded_chains.end()) {
      continue;
    }
    const double* row = matrix_.data() + n.node_id * kLatentDim;
    double dot = 0.0;
    for (std::size_t i = 0; i < kLatentDim; ++i) dot += query[i] * row[i];
    const double denom = std::sqrt(qn * norms_[n.node_id]);
    const double c = denom == 0.0 ? 0.0 : std::clamp(dot / denom, -1.0, 1.0);
    pool.push_back({n.node_id, c});
  }
  const std::size_t take = std::min(k, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<long>(take),
                    pool.end(), candidate_before);
  pool.resize(take);
  return pool;
}

NodeId CacheIndex::splice(NodeId at, const LatentStep& new_step,
                          std::optional<NodeId> origin) {
  const CacheNode& parent = node(at);
  if (origin && *origin >= nodes_.size()) {
    fail(ErrorCode::kUnknownNode, "origin " + std::to_string(*origin));
  }
  validate(new_step);
  return add_node(parent.chain_id, parent.depth + 1, at, new_step, origin);
}

const CacheNode& CacheIndex::node(NodeId id) const {
  if (id >= nodes_.size()) {
    fail(ErrorCode::kUnknownNode, "node " + std::to_string(id));
  }
  return nodes_[id];
}

const CacheEntry& CacheIndex::entry(ChainId id) const {
  if (id >= entries_.size()) {
    fail(ErrorCode::kUnknownNode, "chain " + std::to_string(id));
  }
  return entries_[id];
}

const ContextFeatures& CacheIndex::features(ChainId id) const {
  entry(id);
  return features_[id];
}

std::span<const double> CacheIndex::embedding_view(NodeId id) const {
  node(id);
  return {matrix_.data() + id * kLatentDim, kLatentDim};
}

LatentStep CacheIndex::embedding(NodeId id) const {
  LatentStep s;
  const auto view = embedding_view(id);
  std::copy(view.begin(), view.end(), s.v.begin());
  return s;
}

std::vector<NodeId> CacheIndex::chain_path(ChainId id) const {
  const CacheEntry& e = entry(id);
  std::vector<NodeId> path{e.root};
  while (static_cast<int>(path.size()) < e.length) {
    path.push_back(nodes_[path.back()].children.front());
  }
  return path;
}

ReasoningChain CacheIndex::chain(ChainId id) const {
  ReasoningChain c;
  c.context = entry(id).context;
  for (NodeId n : chain_path(id)) {
    c.steps.push_back(embedding(n));
    c.provenance.push_back({StepSource::Kind::kCached, n});
  }
  return c;
}

std::vector<NodeId> CacheIndex::continuation(NodeId id) const {
  std::vector<NodeId> out;
  NodeId cur = node(id).node_id;
  while (out.size() < static_cast<std::size_t>(kMaxActivities)) {
    const CacheNode* n = &nodes_[cur];
    while (n->children.empty() && n->origin) n = &nodes_[*n->origin];
    if (n->children.empty()) break;
    cur = n->children.front();
    out.push_back(cur);
  }
  return out;
}

std::string CacheIndex::integrity_problem() const {
  if (matrix_.size() != nodes_.size() * kLatentDim) return "matrix size";
  std::size_t main_nodes = 0;
  for (const CacheEntry& e : entries_) {
    if (e.root >= nodes_.size()) return "dangling root";
    if (nodes_[e.root].parent) return "root with a parent";
    if (nodes_[e.root].depth != 0) return "root depth";
    NodeId cur = e.root;
    for (int t = 1; t < e.length; ++t) {
      if (nodes_[cur].children.empty()) return "chain shorter than length";
      cur = nodes_[cur].children.front();
    }
    main_nodes += static_cast<std::size_t>(e.length);
  }
  std::size_t roots = 0;
  for (const CacheNode& n : nodes_) {
    if (n.chain_id >= entries_.size()) return "dangling chain id";
    if (n.parent) {
      if (*n.parent >= nodes_.size()) return "dangling parent";
      const CacheNode& p = nodes_[*n.parent];
      if (n.depth != p.depth + 1) return "depth inconsistency";
      if (p.chain_id != n.chain_id) return "chain mismatch with parent";
      if (std::count(p.children.begin(), p.children.end(), n.node_id) != 1) {
        return "parent does not list child exactly once";
      }
    } else {
      ++roots;
      if (entries_[n.chain_id].root != n.node_id) return "orphan root";
    }
    for (NodeId c : n.children) {
      if (c >= nodes_.size() || nodes_[c].parent != n.node_id) {
        return "child link broken";
      }
    }
    if (n.origin && *n.origin >= nodes_.size()) return "dangling origin";
  }
  if (roots != entries_.size()) return "root count";
  if (main_nodes > nodes_.size()) return "node count below entry lengths";
  return {};
}

void CacheIndex::save(const std::filesystem::path& path,
                      const std::string& config_hash) const {
  detail::ByteWriter out;
  out.raw(kMagic, 4);
  out.u32(kCacheFormatVersion);

  detail::ByteWriter meta;
  meta.str(config_hash.empty() ? config_hash_ : config_hash);
  write_section(out, kSectionMeta, meta);

  detail::ByteWriter contexts;
  contexts.u64(entries_.size());
  for (const auto& e : entries_) write_context(contexts, e.context);
  write_section(out, kSectionContexts, contexts);

  detail::ByteWriter entries;
  entries.u64(entries_.size());
  for (const auto& e : entries_) {
    entries.u64(e.chain_id);
    entries.u64(e.root);
    entries.i32(e.length);
    entries.u64(e.teacher_seed);
  }
  write_section(out, kSectionEntries, entries);

  detail::ByteWriter nodes;
  nodes.u64(nodes_.size());
  for (const auto& n : nodes_) {
    nodes.u64(n.node_id);
    nodes.u64(n.chain_id);
    nodes.i32(n.depth);
    nodes.u8(n.parent ? 1 : 0);
    nodes.u64(n.parent.value_or(0));
    nodes.u8(n.origin ? 1 : 0);
    nodes.u64(n.origin.value_or(0));
    nodes.u32(static_cast<std::uint32_t>(n.children.size()));
    for (NodeId c : n.children) nodes.u64(c);
    for (std::size_t i = 0; i < kLatentDim; ++i) {
      nodes.f64(matrix_[n.node_id * kLatentDim + i]);
    }
  }
  write_section(out, kSectionNodes, nodes);

  out.u32(detail::crc32_of(out.bytes().data(), out.bytes().size()));
  detail::write_file(path, out.bytes());
}

CacheIndex CacheIndex::load(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file(path);
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    if (bytes.size() < 4) fail(ErrorCode::kChecksumMismatch, "file truncated");
    fail(ErrorCode::kIoFailure, path.string() + " is not a cache file");
  }
  if (bytes.size() < 12) fail(ErrorCode::kChecksumMismatch, "file truncated");
  detail::ByteReader header(bytes.data() + 4, 4);
  const std::uint32_t version = header.u32();
  if (version != kCacheFormatVersion) {
    fail(ErrorCode::kFormatVersionMismatch,
         "cache format version " + std::to_string(version));
  }
  const std::size_t body = bytes.size() - 4;
  detail::ByteReader tail(bytes.data() + body, 4);
  if (tail.u32() != detail::crc32_of(bytes.data(), body)) {
    fail(ErrorCode::kChecksumMismatch, path.string());
  }

  CacheIndex c;
  std::vector<SimulationContext> contexts;
  detail::ByteReader r(bytes.data() + 8, body - 8);
  try {
    while (!r.done()) {
      const std::uint32_t tag = r.u32();
      const std::uint64_t len = r.u64();
      if (len > r.remaining()) fail(ErrorCode::kIoFailure, "section overflow");
      const std::uint8_t* start = bytes.data() + 8 + r.position();
      detail::ByteReader s(start, len);
      for (std::uint64_t i = 0; i < len; ++i) r.u8();
      switch (tag) {
        case kSectionMeta:
          c.config_hash_ = s.str();
          break;
        case kSectionContexts: {
          const std::uint64_t n = s.u64();
          for (std::uint64_t i = 0; i < n; ++i) contexts.push_back(read_context(s));
          break;
        }
        case kSectionEntries: {
          const std::uint64_t n = s.u64();
          for (std::uint64_t i = 0; i < n; ++i) {
            CacheEntry e;
            e.chain_id = s.u64();
            e.root = s.u64();
            e.length = s.i32();
            e.teacher_seed = s.u64();
            if (e.chain_id != i || i >= contexts.size()) {
              fail(ErrorCode::kIoFailure, "entry table inconsistent");
            }
            e.context = contexts[i];
            c.entries_.push_back(e);
            c.features_.push_back(context_features(e.context));
          }
          break;
        }
        case kSectionNodes: {
          const std::uint64_t n = s.u64();
          c.nodes_.reserve(n);
          c.matrix_.reserve(n * kLatentDim);
          for (std::uint64_t i = 0; i < n; ++i) {
            CacheNode node;
            node.node_id = s.u64();
            node.chain_id = s.u64();
            node.depth = s.i32();
            const bool has_parent = s.u8() != 0;
            const NodeId parent = s.u64();
            if (has_parent) node.parent = parent;
            const bool has_origin = s.u8() != 0;
            const NodeId origin = s.u64();
            if (has_origin) node.origin = origin;
            const std::uint32_t nc = s.u32();
            for (std::uint32_t k = 0; k < nc; ++k) node.children.push_back(s.u64());
            if (node.node_id != i) fail(ErrorCode::kIoFailure, "node ids out of order");
            double sq = 0.0;
            for (std::size_t d = 0; d < kLatentDim; ++d) {
              const double x = s.f64();
              c.matrix_.push_back(x);
              sq += x * x;
            }
            c.norms_.push_back(sq);
            c.nodes_.push_back(std::move(node));
          }
          break;
        }
        default:
          break;  // unknown sections are skipped
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIoFailure) throw;
    fail(ErrorCode::kIoFailure, e.what());
  }
  const std::string problem = c.integrity_problem();
  if (!problem.empty()) fail(ErrorCode::kIoFailure, "corrupt cache: " + problem);
  return c;
}

void CacheIndex::export_jsonl(const std::filesystem::path& path) const {
  std::vector<nlohmann::json> records;
  for (const CacheEntry& e : entries_) {
    nlohmann::json steps = nlohmann::json::array();
    for (NodeId n : chain_path(e.chain_id)) {
      const auto v = embedding_view(n);
      steps.push_back({{"node_id", n},
                       {"embedding", std::vector<double>(v.begin(), v.end())}});
    }
    records.push_back({{"chain_id", e.chain_id},
                       {"context", e.context},
                       {"length", e.length},
                       {"teacher_seed", e.teacher_seed},
                       {"steps", steps}});
  }
  write_jsonl(path, records);
}

bool CacheIndex::operator==(const CacheIndex& other) const {
  return entries_ == other.entries_ && nodes_ == other.nodes_ &&
         matrix_ == other.matrix_ && config_hash_ == other.config_hash_;
}

}  // namespace trailcache

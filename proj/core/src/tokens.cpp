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

#include "trailcache/tokens.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trailcache/errors.hpp"

namespace trailcache {

namespace {

const double kLogMaxKm = std::log1p(kMaxTravelKm);

bool is_kind(TokenId t) { return t < kTimeTokenBase; }
bool is_time(TokenId t) { return t >= kTimeTokenBase && t < kDistanceTokenBase; }
bool is_dist(TokenId t) { return t >= kDistanceTokenBase && t < kSep; }

}  // namespace

int time_bucket(int start_minute) { return start_minute / 30; }

int bucket_center_minute(int bucket) { return bucket * 30 + 15; }

int distance_bin(double travel_km) {
  const double scaled = std::log1p(travel_km) / kLogMaxKm * 10.0;
  return std::clamp(static_cast<int>(std::floor(scaled)), 0, 9);
}

std::pair<double, double> distance_bin_bounds(int bin) {
  const double lo = std::expm1(bin * kLogMaxKm / 10.0);
  const double hi =
      bin == 9 ? kMaxTravelKm : std::expm1((bin + 1) * kLogMaxKm / 10.0);
  return {lo, hi};
}

double distance_bin_center(int bin) {
  const auto [lo, hi] = distance_bin_bounds(bin);
  return 0.5 * (lo + hi);
}

TokenSequence encode_tokens(std::span<const Activity> activities) {
  const auto n = static_cast<int>(activities.size());
  if (n < kMinActivities || n > kMaxActivities) {
    fail(ErrorCode::kOutOfRange, "activity count " + std::to_string(n));
  }
  TokenSequence seq;
  seq.tokens.reserve(static_cast<std::size_t>(n) * kTokensPerActivity + 2);
  seq.tokens.push_back(kBos);
  for (const Activity& a : activities) {
    validate(a);
    seq.tokens.push_back(static_cast<TokenId>(kKindTokenBase + kind_index(a.kind)));
    seq.tokens.push_back(
        static_cast<TokenId>(kTimeTokenBase + time_bucket(a.start_minute)));
    seq.tokens.push_back(
        static_cast<TokenId>(kDistanceTokenBase + distance_bin(a.travel_km)));
    seq.tokens.push_back(kSep);
  }
  seq.tokens.push_back(kEos);
  return seq;
}

void check_grammar(const TokenSequence& seq) {
  const auto& t = seq.tokens;
  if (t.empty() || t[0] != kBos) throw GrammarViolation(0, "expected BOS");
  std::size_t pos = 1;
  std::size_t count = 0;
  while (true) {
    if (pos >= t.size()) throw GrammarViolation(pos, "missing EOS");
    if (t[pos] == kEos) break;
    if (count == static_cast<std::size_t>(kMaxActivities)) {
      throw GrammarViolation(pos, "more than 9 activities");
    }
    if (!is_kind(t[pos])) throw GrammarViolation(pos, "expected kind token");
    if (pos + 1 >= t.size()) throw GrammarViolation(pos + 1, "missing EOS");
    if (!is_time(t[pos + 1])) {
      throw GrammarViolation(pos + 1, "expected time token");
    }
    if (pos + 2 >= t.size()) throw GrammarViolation(pos + 2, "missing EOS");
    if (!is_dist(t[pos + 2])) {
      throw GrammarViolation(pos + 2, "expected distance token");
    }
    if (pos + 3 >= t.size()) throw GrammarViolation(pos + 3, "missing EOS");
    if (t[pos + 3] != kSep) throw GrammarViolation(pos + 3, "expected SEP");
    pos += 4;
    ++count;
  }
  if (count < static_cast<std::size_t>(kMinActivities)) {
    throw GrammarViolation(pos, "fewer than 2 activities");
  }
  if (pos + 1 != t.size()) throw GrammarViolation(pos + 1, "tokens after EOS");
}

std::size_t activity_count(const TokenSequence& seq) {
  check_grammar(seq);
  return (seq.tokens.size() - 2) / kTokensPerActivity;
}

std::vector<ActivityTokens> content_tokens(const TokenSequence& seq) {
  check_grammar(seq);
  const std::size_t n = (seq.tokens.size() - 2) / kTokensPerActivity;
  std::vector<ActivityTokens> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = 1 + i * kTokensPerActivity;
    out[i].kind = seq.tokens[p] - kKindTokenBase;
    out[i].time = seq.tokens[p + 1] - kTimeTokenBase;
    out[i].dist = seq.tokens[p + 2] - kDistanceTokenBase;
  }
  return out;
}

TokenSequence assemble_tokens(std::span<const ActivityTokens> acts) {
  TokenSequence seq;
  seq.tokens.push_back(kBos);
  for (const auto& a : acts) {
    seq.tokens.push_back(static_cast<TokenId>(kKindTokenBase + a.kind));
    seq.tokens.push_back(static_cast<TokenId>(kTimeTokenBase + a.time));
    seq.tokens.push_back(static_cast<TokenId>(kDistanceTokenBase + a.dist));
    seq.tokens.push_back(kSep);
  }
  seq.tokens.push_back(kEos);
  check_grammar(seq);
  return seq;
}

std::vector<Activity> decode_tokens(const TokenSequence& seq) {
  std::vector<Activity> out;
  for (const auto& a : content_tokens(seq)) {
    Activity act;
    act.kind = kind_from_index(static_cast<std::size_t>(a.kind));
    act.start_minute = bucket_center_minute(a.time);
    act.travel_km = distance_bin_center(a.dist);
    out.push_back(act);
  }
  return out;
}

}  // namespace trailcache

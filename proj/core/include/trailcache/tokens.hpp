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

// Activity token grammar: BOS (kind time dist SEP)^T EOS, 2 <= T <= 9.

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "trailcache/domain.hpp"

namespace trailcache {

using TokenId = std::uint8_t;

inline constexpr TokenId kKindTokenBase = 0;
inline constexpr std::size_t kTimeBuckets = 48;
inline constexpr TokenId kTimeTokenBase = 8;
inline constexpr std::size_t kDistanceBins = 10;
inline constexpr TokenId kDistanceTokenBase = 56;
inline constexpr TokenId kSep = 66;
inline constexpr TokenId kBos = 67;
inline constexpr TokenId kEos = 68;
inline constexpr std::size_t kVocabularySize = 69;
inline constexpr int kTokensPerActivity = 4;  // 3 content + SEP

struct TokenSequence {
  std::vector<TokenId> tokens;
  bool operator==(const TokenSequence&) const = default;
};

int time_bucket(int start_minute);
int bucket_center_minute(int bucket);
int distance_bin(double travel_km);
// [lower, upper] travel km covered by a distance bin.
std::pair<double, double> distance_bin_bounds(int bin);
double distance_bin_center(int bin);

TokenSequence encode_tokens(std::span<const Activity> activities);
std::vector<Activity> decode_tokens(const TokenSequence& seq);
// Throws GrammarViolation naming the first offending position.
void check_grammar(const TokenSequence& seq);
std::size_t activity_count(const TokenSequence& seq);

// Content tokens of one activity, used by the decoder heads.
struct ActivityTokens {
  int kind = 0;
  int time = 0;
  int dist = 0;
};
std::vector<ActivityTokens> content_tokens(const TokenSequence& seq);
TokenSequence assemble_tokens(std::span<const ActivityTokens> acts);

}  // namespace trailcache

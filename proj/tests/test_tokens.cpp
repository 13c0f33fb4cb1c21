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

#include "test_util.hpp"
#include "trailcache/errors.hpp"
#include "trailcache/tokens.hpp"

namespace trailcache {
namespace {

std::vector<Activity> acts(std::initializer_list<std::pair<int, double>> spec) {
  std::vector<Activity> out;
  std::size_t k = 0;
  for (auto [minute, km] : spec) {
    Activity a;
    a.start_minute = minute;
    a.travel_km = km;
    a.kind = kind_from_index(k++ % kKindCount);
    out.push_back(a);
  }
  return out;
}

TEST(Tokens, LengthIsFourPerActivityPlusTwo) {
  const auto seq = encode_tokens(acts({{0, 0.0}, {300, 2.0}, {600, 50.0}}));
  EXPECT_EQ(seq.tokens.size(), 14u);
  EXPECT_EQ(seq.tokens.front(), kBos);
  EXPECT_EQ(seq.tokens.back(), kEos);
}

TEST(Tokens, Boundaries) {
  const auto seq = encode_tokens(acts({{0, 0.0}, {1439, 50.0}}));
  EXPECT_EQ(seq.tokens[2], kTimeTokenBase + 0);
  EXPECT_EQ(seq.tokens[3], kDistanceTokenBase + 0);
  EXPECT_EQ(seq.tokens[6], kTimeTokenBase + 47);
  EXPECT_EQ(seq.tokens[7], kDistanceTokenBase + 9);
}

TEST(Tokens, OutOfRangeFieldsRejected) {
  EXPECT_THROW(encode_tokens(acts({{0, 0.0}})), Error);
  EXPECT_THROW(encode_tokens(acts({{0, 0.0}, {1440, 1.0}})), Error);
  EXPECT_THROW(encode_tokens(acts({{0, 0.0}, {10, 50.5}})), Error);
  EXPECT_THROW(encode_tokens(acts({{0, -1.0}, {10, 1.0}})), Error);
}

// Bin formula restated from the documented definition.
int oracle_bin(double km) {
  const double v = std::floor(std::log1p(km) / std::log1p(50.0) * 10.0);
  return static_cast<int>(std::min(9.0, std::max(0.0, v)));
}

TEST(Tokens, RandomRoundTripKeepsBucketContainment) {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 9));
    std::vector<Activity> in;
    for (int i = 0; i < n; ++i) {
      Activity a;
      a.start_minute = static_cast<int>(rng.uniform_int(0, 1439));
      a.travel_km = rng.uniform(0.0, 50.0);
      a.kind = kind_from_index(static_cast<std::size_t>(rng.uniform_int(0, 7)));
      in.push_back(a);
    }
    const auto seq = encode_tokens(in);
    ASSERT_NO_THROW(check_grammar(seq));
    const auto out = decode_tokens(seq);
    ASSERT_EQ(out.size(), in.size());
    for (int i = 0; i < n; ++i) {
      EXPECT_EQ(out[i].kind, in[i].kind);
      EXPECT_LE(std::abs(out[i].start_minute - (in[i].start_minute / 30 * 30 + 15)), 0);
      EXPECT_LE(std::abs(out[i].start_minute - in[i].start_minute), 15);
      const int bin = oracle_bin(in[i].travel_km);
      EXPECT_EQ(seq.tokens[1 + 4 * i + 2], kDistanceTokenBase + bin);
      const double lo = std::expm1(bin * std::log1p(50.0) / 10.0);
      const double hi = std::expm1((bin + 1) * std::log1p(50.0) / 10.0);
      EXPECT_GE(out[i].travel_km, lo - 1e-9);
      EXPECT_LE(out[i].travel_km, hi + 1e-9);
    }
    // Encoding the decoded list reproduces the sequence exactly.
    EXPECT_EQ(encode_tokens(out), seq);
  }
}

TEST(Grammar, ErrorsNameFirstOffendingPosition) {
  const auto good = encode_tokens(acts({{0, 0.0}, {300, 2.0}}));
  auto expect_at = [](TokenSequence seq, std::size_t pos) {
    try {
      check_grammar(seq);
      ADD_FAILURE() << "no violation";
    } catch (const GrammarViolation& e) {
      EXPECT_EQ(e.position(), pos) << e.what();
      EXPECT_EQ(e.code(), ErrorCode::kGrammarViolation);
    }
  };
  auto missing_eos = good;
  missing_eos.tokens.pop_back();
  expect_at(missing_eos, 9);
  auto no_bos = good;
  no_bos.tokens[0] = kSep;
  expect_at(no_bos, 0);
  auto bad_time = good;
  bad_time.tokens[6] = kKindTokenBase + 1;
  expect_at(bad_time, 6);
  auto bad_sep = good;
  bad_sep.tokens[4] = kEos;
  expect_at(bad_sep, 4);
  auto trailing = good;
  trailing.tokens.push_back(kSep);
  expect_at(trailing, 10);
  TokenSequence single{{kBos, 0, kTimeTokenBase, kDistanceTokenBase, kSep, kEos}};
  expect_at(single, 5);
  EXPECT_THROW(decode_tokens(missing_eos), GrammarViolation);
}

TEST(Grammar, DecodeOfEncodeIsIdentityOnValidSequences) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 9));
    std::vector<ActivityTokens> at;
    for (int i = 0; i < n; ++i) {
      at.push_back({static_cast<int>(rng.uniform_int(0, 7)),
                    static_cast<int>(rng.uniform_int(0, 47)),
                    static_cast<int>(rng.uniform_int(0, 9))});
    }
    const auto seq = assemble_tokens(at);
    EXPECT_EQ(encode_tokens(decode_tokens(seq)), seq);
  }
}

}  // namespace
}  // namespace trailcache

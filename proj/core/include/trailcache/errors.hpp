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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace trailcache {

enum class ErrorCode {
  kOutOfRange,
  kGrammarViolation,
  kUndecodable,
  kChainTooShort,
  kChainTooLong,
  kUnknownNode,
  kEmptyCache,
  kIoFailure,
  kFormatVersionMismatch,
  kChecksumMismatch,
  kDimensionMismatch,
  kNonFiniteLoss,
  kEdgeMismatch,
  kTooFewActivities,
  kNoPoiOfKind,
  kGeolocationFailure,
  kEmptyRun,
  kInvalidArgument,
  kBackendFailure,
};

std::string_view error_code_name(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (notably the CLI) can map it to an exit status without string
// matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class GrammarViolation : public Error {
 public:
  GrammarViolation(std::size_t position, const std::string& message);
  // Index of the first offending token.
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace trailcache

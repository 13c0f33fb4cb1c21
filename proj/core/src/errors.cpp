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

#include "trailcache/errors.hpp"

namespace trailcache {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kGrammarViolation: return "GrammarViolation";
    case ErrorCode::kUndecodable: return "Undecodable";
    case ErrorCode::kChainTooShort: return "ChainTooShort";
    case ErrorCode::kChainTooLong: return "ChainTooLong";
    case ErrorCode::kUnknownNode: return "UnknownNode";
    case ErrorCode::kEmptyCache: return "EmptyCache";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kEdgeMismatch: return "EdgeMismatch";
    case ErrorCode::kTooFewActivities: return "TooFewActivities";
    case ErrorCode::kNoPoiOfKind: return "NoPoiOfKind";
    case ErrorCode::kGeolocationFailure: return "GeolocationFailure";
    case ErrorCode::kEmptyRun: return "EmptyRun";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kBackendFailure: return "BackendFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
      code_(code) {}

GrammarViolation::GrammarViolation(std::size_t position,
                                   const std::string& message)
    : Error(ErrorCode::kGrammarViolation,
            message + " (token " + std::to_string(position) + ")"),
      position_(position) {}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace trailcache

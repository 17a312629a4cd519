// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace taxon {

enum class ErrorCode {
  kEmptyInput,
  kRowArityMismatch,
  kParentConflict,
  kAmbiguousLabel,
  kUnknownLeaf,
  kLevelOutOfRange,
  kDimMismatch,
  kUnknownKey,
  kDuplicateKey,
  kNotUnitNorm,
  kMissingEmbedding,
  kInsufficientCandidates,
  kDuplicateLeaf,
  kUnresolvablePath,
  kInvalidArgument,
  kParse,
  kTransport,
  kProtocol,
  kAuthRejected,
  kBackendFailure,
  kInvalidQuestionSet,
  kPartialRun,
  kEmptyRecords,
  kIncompleteRecord,
  kGroupTooSmall,
  kZeroProbability,
  kDivergence,
  kConfig,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace taxon

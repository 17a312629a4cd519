// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "taxon/errors.hpp"
#include "taxon/rng.hpp"

namespace taxon {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kRowArityMismatch: return "RowArityMismatch";
    case ErrorCode::kParentConflict: return "ParentConflict";
    case ErrorCode::kAmbiguousLabel: return "AmbiguousLabel";
    case ErrorCode::kUnknownLeaf: return "UnknownLeaf";
    case ErrorCode::kLevelOutOfRange: return "LevelOutOfRange";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kUnknownKey: return "UnknownKey";
    case ErrorCode::kDuplicateKey: return "DuplicateKey";
    case ErrorCode::kNotUnitNorm: return "NotUnitNorm";
    case ErrorCode::kMissingEmbedding: return "MissingEmbedding";
    case ErrorCode::kInsufficientCandidates: return "InsufficientCandidates";
    case ErrorCode::kDuplicateLeaf: return "DuplicateLeaf";
    case ErrorCode::kUnresolvablePath: return "UnresolvablePath";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParse: return "Parse";
    case ErrorCode::kTransport: return "Transport";
    case ErrorCode::kProtocol: return "Protocol";
    case ErrorCode::kAuthRejected: return "AuthRejected";
    case ErrorCode::kBackendFailure: return "BackendFailure";
    case ErrorCode::kInvalidQuestionSet: return "InvalidQuestionSet";
    case ErrorCode::kPartialRun: return "PartialRun";
    case ErrorCode::kEmptyRecords: return "EmptyRecords";
    case ErrorCode::kIncompleteRecord: return "IncompleteRecord";
    case ErrorCode::kGroupTooSmall: return "GroupTooSmall";
    case ErrorCode::kZeroProbability: return "ZeroProbability";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kConfig: return "Config";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  Rng mix(seed ^ fnv1a64(name));
  mix();
  return mix();
}

}  // namespace taxon

// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dytopo {

enum class ErrorCode {
    // run setup / domain values
    kDuplicateAgentId,
    kDuplicateAgentName,
    kNonContiguousIds,
    kInvalidConfig,
    kInvalidValue,
    // semantic matching
    kDimensionMismatch,
    kEmbedderFailure,
    // topology
    kUnknownAgent,
    kCycleDetected,
    // routing
    kMissingOutput,
    // agent runtime
    kPolicyFailure,
    kUnparseableOutput,
    kNoStructuredObject,
    kMissingField,
    kTypeMismatch,
    kUnknownDomain,
    kScriptExhausted,
    // llm client
    kTransientExhausted,
    kAuthFailure,
    kRequestRejected,
    kMalformedProviderResponse,
    kDimensionInconsistent,
    // trace
    kRoundGap,
    kVersionMismatch,
    kCorruptTrace,
    kUnknownRound,
    kEmptyTrace,
    kIoError,
};

/// Stable machine-readable name, e.g. "CycleDetected".
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, std::string detail);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    /// Field name, agent id, round number... whatever the raising site attached.
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

  private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace dytopo

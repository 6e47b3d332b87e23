// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "dytopo/error.hpp"

#include <utility>

namespace dytopo {

std::string_view error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::kDuplicateAgentId: return "DuplicateAgentId";
        case ErrorCode::kDuplicateAgentName: return "DuplicateAgentName";
        case ErrorCode::kNonContiguousIds: return "NonContiguousIds";
        case ErrorCode::kInvalidConfig: return "InvalidConfig";
        case ErrorCode::kInvalidValue: return "InvalidValue";
        case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
        case ErrorCode::kEmbedderFailure: return "EmbedderFailure";
        case ErrorCode::kUnknownAgent: return "UnknownAgent";
        case ErrorCode::kCycleDetected: return "CycleDetected";
        case ErrorCode::kMissingOutput: return "MissingOutput";
        case ErrorCode::kPolicyFailure: return "PolicyFailure";
        case ErrorCode::kUnparseableOutput: return "UnparseableOutput";
        case ErrorCode::kNoStructuredObject: return "NoStructuredObject";
        case ErrorCode::kMissingField: return "MissingField";
        case ErrorCode::kTypeMismatch: return "TypeMismatch";
        case ErrorCode::kUnknownDomain: return "UnknownDomain";
        case ErrorCode::kScriptExhausted: return "ScriptExhausted";
        case ErrorCode::kTransientExhausted: return "TransientExhausted";
        case ErrorCode::kAuthFailure: return "AuthFailure";
        case ErrorCode::kRequestRejected: return "RequestRejected";
        case ErrorCode::kMalformedProviderResponse: return "MalformedProviderResponse";
        case ErrorCode::kDimensionInconsistent: return "DimensionInconsistent";
        case ErrorCode::kRoundGap: return "RoundGap";
        case ErrorCode::kVersionMismatch: return "VersionMismatch";
        case ErrorCode::kCorruptTrace: return "CorruptTrace";
        case ErrorCode::kUnknownRound: return "UnknownRound";
        case ErrorCode::kEmptyTrace: return "EmptyTrace";
        case ErrorCode::kIoError: return "IoError";
    }
    return "Unknown";
}

namespace {

std::string format_message(ErrorCode code, const std::string& detail) {
    std::string msg{error_code_name(code)};
    if (!detail.empty()) {
        msg += ": ";
        msg += detail;
    }
    return msg;
}

}  // namespace

Error::Error(ErrorCode code, std::string detail)
    : std::runtime_error(format_message(code, detail)), code_(code), detail_(std::move(detail)) {}

}  // namespace dytopo

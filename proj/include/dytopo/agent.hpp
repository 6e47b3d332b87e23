// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

// Single-pass agent execution: one policy call per agent per round, parsed
// into a RoundOutput. Parse failures get a bounded number of corrective
// retries, after which a fallback keeps the round moving.

#pragma once

#include <atomic>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dytopo/domain.hpp"
#include "dytopo/llm_client.hpp"

namespace dytopo::agent {

inline constexpr std::string_view kCorrectiveSuffix =
    "\n\nOutput ONLY the required structured object.";
inline constexpr std::size_t kFallbackExcerptChars = 200;

class Policy {
  public:
    virtual ~Policy() = default;
    /// Raw response text for the rendered context.
    virtual std::string step(const std::string& context, RoundIndex round) = 0;
};

/// Replays literal records from a script:
///   {"rounds": {"0": {...}, "2": {...}}, "default": {...}}
/// or a bare array indexed by round. "{round}" inside any string value is
/// replaced with the round number. A round with no record and no default
/// raises kScriptExhausted.
class ScriptedPolicy final : public Policy {
  public:
    explicit ScriptedPolicy(nlohmann::ordered_json script);

    std::string step(const std::string& context, RoundIndex round) override;

    [[nodiscard]] std::size_t invocations() const noexcept { return invocations_.load(); }

  private:
    std::map<RoundIndex, nlohmann::ordered_json> rounds_;
    std::optional<nlohmann::ordered_json> default_;
    std::atomic<std::size_t> invocations_{0};
};

struct GenerationConfig {
    double temperature = 0.3;
    int max_tokens = 4000;
    bool structured_output = true;
};

/// Chat-completion policy; usage is charged to usage_key in the ledger.
class LlmPolicy final : public Policy {
  public:
    LlmPolicy(llm::ChatClient& client, std::string system_prompt, GenerationConfig generation,
              llm::UsageLedger& ledger, AgentId usage_key);

    std::string step(const std::string& context, RoundIndex round) override;

  private:
    llm::ChatClient& client_;
    std::string system_prompt_;
    GenerationConfig generation_;
    llm::UsageLedger& ledger_;
    AgentId usage_key_;
};

/// Fields pulled out of a structured response. Descriptors stay optional
/// here so a fallback can still use the rest of a partial object.
struct ParsedResponse {
    std::string public_content;
    std::string private_content;
    std::vector<PrivateDirective> private_directives;
    std::optional<std::string> query;
    std::optional<std::string> key;
    std::optional<std::string> answer;
    std::optional<bool> is_complete;
    std::optional<std::string> next_goal;

    bool operator==(const ParsedResponse&) const = default;
};

/// First JSON object in the text that parses (code fences and prose around it
/// are skipped). Throws kNoStructuredObject.
nlohmann::ordered_json extract_structured_object(std::string_view raw);

/// Accepts q_vector/q_desc and k_vector/k_desc. Workers need public_content
/// and both descriptors; with expect_manager_fields, is_complete and next_goal
/// are required and the descriptors are optional.
/// Throws kNoStructuredObject, kMissingField(name) or kTypeMismatch(name).
ParsedResponse parse_agent_response(std::string_view raw, bool expect_manager_fields);

/// Same extraction and type checks, but no field is required.
ParsedResponse parse_agent_response_lenient(std::string_view raw);

/// Worker/manager JSON schema text for an output (inverse of parsing).
std::string serialize_round_output(const RoundOutput& output);

struct RoundOptions {
    std::size_t parse_retries = 2;
    bool fallback_enabled = true;
    bool expect_manager_fields = false;
};

struct AgentRoundResult {
    RoundOutput output;
    std::size_t invocations = 0;  // first call plus parse retries
    std::size_t parse_retries = 0;
    bool used_fallback = false;
};

/// Calls the policy, parsing and retrying per options. The output always
/// carries profile.id and round. Throws kPolicyFailure when the policy throws,
/// kUnparseableOutput when parsing never succeeds and fallback is off.
AgentRoundResult run_agent_round(const AgentProfile& profile, const std::string& context, Policy& policy,
                                 RoundIndex round, const RoundOptions& options = {});

/// Builds a RoundOutput, synthesizing "I need: ..." / "I provide: ..."
/// descriptors from the public content where they are missing or blank.
RoundOutput output_with_fallback(AgentId author, RoundIndex round, ParsedResponse parsed);

}  // namespace dytopo::agent

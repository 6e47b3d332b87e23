// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dytopo/domain.hpp"

namespace dytopo::agent {

enum class Domain { kCodeGeneration, kMathReasoning };

std::string_view to_string(Domain domain) noexcept;
/// "code_generation" | "math_reasoning"; anything else throws kUnknownDomain.
Domain parse_domain(std::string_view name);

/// Every template carries this line.
inline constexpr std::string_view kFormatMarker = "STRICT RESPONSE FORMAT - MANDATORY";

struct RolePromptSet {
    Domain domain = Domain::kCodeGeneration;
    std::vector<std::string> worker_templates;  // parallel to the profiles
    std::string manager_template;
};

RolePromptSet build_role_prompts(Domain domain, const std::vector<AgentProfile>& workers,
                                 std::string_view manager_name = "Manager");
RolePromptSet build_role_prompts(std::string_view domain, const std::vector<AgentProfile>& workers,
                                 std::string_view manager_name = "Manager");

/// Standard worker roster for a domain (code: Developer, Researcher, Tester,
/// Designer; math: ProblemParser, Solver, Verifier).
std::vector<AgentProfile> default_roster(Domain domain, AgentKind kind = AgentKind::kScripted);

/// Role whose public content stands in for the final answer.
std::string_view producer_role(Domain domain) noexcept;

}  // namespace dytopo::agent

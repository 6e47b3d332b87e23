// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "dytopo/prompts.hpp"

#include "dytopo/error.hpp"

namespace dytopo::agent {

namespace {

struct RoleRow {
    std::string_view name;
    std::string_view description;
};

constexpr RoleRow kCodeRoles[] = {
    {"Developer",
     "Implement complete, runnable code. If using classes, provide independent functions as entry points."},
    {"Researcher", "Identify standard algorithms and time complexity. Output conclusions without derivation."},
    {"Tester",
     "Provide critical test cases and expected results. Describe testing logic rather than full execution logs."},
    {"Designer", "Design API interfaces and class structures. Only show method signatures and type hints."},
};

constexpr RoleRow kMathRoles[] = {
    {"ProblemParser",
     "Decompose the problem statement. Output must include analysis, known conditions, target, and a "
     "step-by-step plan."},
    {"Solver",
     "Execute mathematical derivation. Provide detailed steps, symbolic reasoning, and the final answer."},
    {"Verifier",
     "Logic and calculation check. Verify the rationality of each step; identify logical loopholes or "
     "calculation errors."},
};

constexpr std::string_view kCodeManager = R"(You are {name}, the Workflow Orchestrator. Decide if the task is COMPLETE.
STRICT RESPONSE FORMAT - MANDATORY
You MUST output ONLY a valid JSON object with these exact fields:
{
  "public_content": "String. Status summary and next directives.",
  "private_content": {}, // No successors for manager
  "q_desc": "String. REQUIRED. What you need next (query descriptor).",
  "k_desc": "String. REQUIRED. What you provide (key descriptor).",
  "is_complete": Boolean,
  "next_goal": "String"
}
CRITICAL RULES:
1. Primary focus: Workflow Orchestrator. Decide if the task is COMPLETE.
2. Strict constraint: Only set is_complete=True if Code exists AND Tests pass.
3. If you see Python code, analyze it from your role's perspective.)";

constexpr std::string_view kGenericWorker = R"(You are {name}, the {role}.
Role Description: {description}
STRICT RESPONSE FORMAT - MANDATORY
You MUST output ONLY a valid JSON object with these exact fields:
{
  "public_content": "String. Your contribution to the task.",
  "private_content": {"TargetRole": "Instruction"},
  "q_vector": "String. REQUIRED. What you need next (Query).",
  "k_vector": "String. REQUIRED. What you provide (Key)."
})";

constexpr std::string_view kProblemParser =
    R"(You are {name}, the Math Problem Analyst. Analyze the problem statement, identify known conditions, define the solving target, and break down the solving steps.
STRICT RESPONSE FORMAT - MANDATORY
You MUST output ONLY a valid JSON object with these exact fields:
{
  "public_content": "String. Analysis, conditions, target, and plan.",
  "private_content": {"Role": "Instruction"},
  "q_vector": "String. REQUIRED. What you need next.",
  "k_vector": "String. REQUIRED. What you provide."
}
CRITICAL RULES:
1. Primary focus: Analyze problem, identify conditions, define target, break down steps.
2. Constraint: MAX 1000 words. Output MUST include clear analysis and plan.
3. Analyze mathematical expressions from your role's perspective.)";

constexpr std::string_view kSolver =
    R"(You are {name}, the Mathematical Solver. Execute specific mathematical calculations, symbolic reasoning, or theorem calls. Can use SymPy for symbolic computations.
STRICT RESPONSE FORMAT - MANDATORY
You MUST output ONLY a valid JSON object with these exact fields:
{
  "public_content": "String. Detailed solutions with derivations.",
  "private_content": {"Role": "Instruction"},
  "answer": "String. The final answer.",
  "q_vector": "String. REQUIRED.",
  "k_vector": "String. REQUIRED."
}
CRITICAL RULES:
1. Primary focus: Calculations, symbolic reasoning, theorem calls.
2. Constraint: MAX 2000 words. Detailed step-by-step solutions required.)";

constexpr std::string_view kVerifier =
    R"(You are {name}, the Logic Verifier. Check the rationality of each derivation step, identify logical loopholes or calculation errors.
STRICT RESPONSE FORMAT - MANDATORY
You MUST output ONLY a valid JSON object with these exact fields:
{
  "public_content": "String. Verification results and conclusion.",
  "private_content": {"Role": "Instruction"},
  "q_vector": "String. REQUIRED.",
  "k_vector": "String. REQUIRED."
}
CRITICAL RULES:
1. Primary focus: Check rationality, find loopholes/errors.
2. Constraint: MAX 1000 words. Output verification for each step.)";

constexpr std::string_view kMathManager = R"(You are {name}, the Workflow Orchestrator. Decide if the task is COMPLETE.
STRICT RESPONSE FORMAT - MANDATORY
You MUST output ONLY a valid JSON object with these exact fields:
{
  "public_content": "String. Status summary.",
  "private_content": {"Role": "Instruction"},
  "q_vector": "String.", "k_vector": "String.",
  "is_complete": Boolean, "next_goal": "String"
}
CRITICAL RULES:
1. Strict constraint: Only set is_complete=True if Solution exists AND Verification passes.)";

std::string fill(std::string_view tmpl, std::string_view key, std::string_view value) {
    std::string out(tmpl);
    const std::string needle = "{" + std::string(key) + "}";
    for (auto pos = out.find(needle); pos != std::string::npos; pos = out.find(needle, pos + value.size()))
        out.replace(pos, needle.size(), value);
    return out;
}

std::string worker_prompt(Domain domain, const AgentProfile& p) {
    if (domain == Domain::kMathReasoning) {
        if (p.name == "ProblemParser") return fill(kProblemParser, "name", p.name);
        if (p.name == "Solver") return fill(kSolver, "name", p.name);
        if (p.name == "Verifier") return fill(kVerifier, "name", p.name);
    }
    return fill(fill(fill(kGenericWorker, "name", p.name), "role", p.name), "description", p.role_description);
}

}  // namespace

std::string_view to_string(Domain domain) noexcept {
    return domain == Domain::kCodeGeneration ? "code_generation" : "math_reasoning";
}

Domain parse_domain(std::string_view name) {
    if (name == "code_generation") return Domain::kCodeGeneration;
    if (name == "math_reasoning") return Domain::kMathReasoning;
    throw Error(ErrorCode::kUnknownDomain, std::string(name));
}

RolePromptSet build_role_prompts(Domain domain, const std::vector<AgentProfile>& workers,
                                 std::string_view manager_name) {
    RolePromptSet set;
    set.domain = domain;
    set.worker_templates.reserve(workers.size());
    for (const auto& p : workers) set.worker_templates.push_back(worker_prompt(domain, p));
    set.manager_template =
        fill(domain == Domain::kCodeGeneration ? kCodeManager : kMathManager, "name", manager_name);
    return set;
}

RolePromptSet build_role_prompts(std::string_view domain, const std::vector<AgentProfile>& workers,
                                 std::string_view manager_name) {
    return build_role_prompts(parse_domain(domain), workers, manager_name);
}

std::vector<AgentProfile> default_roster(Domain domain, AgentKind kind) {
    std::vector<AgentProfile> roster;
    auto add = [&](const auto& rows) {
        for (const RoleRow& r : rows) {
            roster.push_back({static_cast<AgentId>(roster.size()), std::string(r.name),
                              std::string(r.description), kind});
        }
    };
    if (domain == Domain::kCodeGeneration) {
        add(kCodeRoles);
    } else {
        add(kMathRoles);
    }
    return roster;
}

std::string_view producer_role(Domain domain) noexcept {
    return domain == Domain::kCodeGeneration ? "Developer" : "Solver";
}

}  // namespace dytopo::agent

// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

// Meta-control: aggregate the round's public messages in aggregation order,
// ask the manager whether to halt and what the next goal is, and drive the
// round loop that ties the other modules together.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dytopo/agent.hpp"
#include "dytopo/domain.hpp"
#include "dytopo/prompts.hpp"
#include "dytopo/semantic.hpp"
#include "dytopo/trace.hpp"
#include "dytopo/usage.hpp"

namespace dytopo::manager {

/// Public contents of the workers listed in order, with the context's round and goal.
GlobalState aggregate_global_state(const RoundContext& context, const std::vector<RoundOutput>& outputs,
                                   const AggregationOrder& order);

/// Manager-facing text. Earlier digests (oldest first) precede the current one.
std::string render_global_state(const GlobalState& state, const std::string& original_task,
                                const std::vector<AgentProfile>& roster,
                                const std::vector<GlobalState>& history = {});

struct ManagerStep {
    std::optional<RoundOutput> output;  // absent when the response never parsed
    trace::AgentCallStats call;
    HaltDecision decision = HaltDecision::stop(std::nullopt);
};

/// One manager invocation. An unparseable response continues with current_goal,
/// as does a blank next_goal. With halting disabled is_complete is ignored.
/// final_answer is attached to a halt decision. Throws kPolicyFailure.
ManagerStep decide_halt(agent::Policy& manager, const std::string& global_state_text, RoundIndex round,
                        const std::string& current_goal, bool halting_enabled,
                        std::optional<std::string> final_answer, std::size_t parse_retries = 2);

/// Latest non-empty worker "answer" (later rounds first, later aggregation
/// positions first within a round); otherwise the producer role's latest
/// public content; otherwise that of the last agent in the latest order.
std::optional<std::string> extract_final_answer(const std::vector<trace::RoundRecord>& rounds,
                                                const std::vector<AgentProfile>& profiles,
                                                std::string_view producer_role);

struct LoopOptions {
    agent::Domain domain = agent::Domain::kCodeGeneration;
    std::string manager_name = "Manager";
    bool include_history = true;
    std::size_t parse_retries = 2;
    bool fallback_enabled = true;
    /// Phase 1 fan-out across threads; results are keyed by agent id either way.
    bool parallel_agents = true;
    /// Usage source for per-round deltas; may be null (scripted runs).
    const llm::UsageLedger* ledger = nullptr;
    /// Observes every rendered worker context: (agent, round, text).
    std::function<void(AgentId, RoundIndex, const std::string&)> on_context;
    /// Timestamp source for trace metadata; defaults to UTC wall clock.
    std::function<std::string()> clock;
};

struct RunResult {
    std::size_t rounds_executed = 0;
    bool halted_by_manager = false;
    std::optional<std::string> final_answer;

    bool operator==(const RunResult&) const = default;
};

/// Runs rounds until the manager halts or t_max is reached, recording each
/// round into trace. workers[i] is the policy for setup.profiles[i]. On any
/// error the rounds completed so far stay in trace, trace.failure is set, and
/// the error is rethrown.
RunResult run_loop(const RunSetup& setup, const std::string& task, const std::vector<agent::Policy*>& workers,
                   agent::Policy& manager, semantic::Embedder& embedder, trace::CoordinationTrace& trace,
                   const LoopOptions& options = {});

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace dytopo::manager

// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

// Coordination trace: the replayable record of a run. Serialized as UTF-8
// JSON tagged "dytopo-trace/1". Relevance matrices are stored in full at
// full precision so topologies can be recomputed without re-embedding.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dytopo/domain.hpp"
#include "dytopo/routing.hpp"
#include "dytopo/semantic.hpp"
#include "dytopo/usage.hpp"

namespace dytopo::trace {

inline constexpr std::string_view kFormatVersion = "dytopo-trace/1";

struct RunMetadata {
    std::string domain;
    std::string task;
    RoutingConfig config;
    std::vector<AgentProfile> profiles;
    std::string manager_name = "Manager";
    std::string embedder;  // Embedder::identity()
    bool include_history = true;
    /// CLI overrides that replaced spec-file values, flag -> value.
    std::map<std::string, std::string> overrides;
    // Wall-clock timestamps; the only nondeterministic fields.
    std::string started_at;
    std::string finished_at;

    bool operator==(const RunMetadata&) const = default;
};

struct AgentCallStats {
    AgentId agent = 0;
    std::size_t invocations = 0;
    std::size_t parse_retries = 0;
    bool used_fallback = false;

    bool operator==(const AgentCallStats&) const = default;
};

struct UsageRecord {
    AgentId agent = 0;
    llm::UsageCounters usage;

    bool operator==(const UsageRecord&) const = default;
};

/// Everything one round produced, in phase order.
struct RoundRecord {
    RoundIndex round = 0;
    RoundContext context;                      // phase 1 input
    std::vector<RoundOutput> outputs;          // phase 1
    std::vector<AgentCallStats> calls;         // phase 1
    TopologySnapshot topology;                 // phases 2-3
    std::vector<routing::Delivery> deliveries; // phase 4
    GlobalState global_state;                  // phase 5
    std::optional<RoundOutput> manager_output; // phase 5, absent on manager parse failure
    AgentCallStats manager_call;
    std::optional<HaltDecision> decision;      // phase 5
    std::vector<UsageRecord> usage;            // token/latency deltas for this round

    bool operator==(const RoundRecord&) const = default;
};

struct RunSummary {
    std::size_t rounds_executed = 0;
    bool halted_by_manager = false;
    std::optional<std::string> final_answer;

    bool operator==(const RunSummary&) const = default;
};

struct TraceFailure {
    RoundIndex round = 0;
    std::string code;
    std::string message;

    bool operator==(const TraceFailure&) const = default;
};

class CoordinationTrace {
  public:
    RunMetadata metadata;
    std::optional<RunSummary> result;
    std::optional<TraceFailure> failure;

    /// Append-only; record.round must equal the current length (kRoundGap).
    void record_round(RoundRecord record);

    [[nodiscard]] const std::vector<RoundRecord>& rounds() const noexcept { return rounds_; }
    [[nodiscard]] std::size_t size() const noexcept { return rounds_.size(); }
    /// Throws kUnknownRound.
    [[nodiscard]] const RoundRecord& round(RoundIndex t) const;

    bool operator==(const CoordinationTrace&) const = default;

  private:
    std::vector<RoundRecord> rounds_;
};

std::string to_json_text(const CoordinationTrace& trace);
/// Throws kVersionMismatch or kCorruptTrace.
CoordinationTrace from_json_text(std::string_view text);

void export_trace(const CoordinationTrace& trace, const std::filesystem::path& path);
CoordinationTrace import_trace(const std::filesystem::path& path);

/// Blanks started_at/finished_at in serialized trace text, for golden comparisons.
std::string strip_timestamps(std::string_view trace_json);

enum class GraphStyle { kDot, kMermaid };
GraphStyle parse_graph_style(std::string_view name);

/// Directed graph for one round: nodes labeled with agent names and their
/// aggregation-order position, edges labeled with scores to 2 decimals.
std::string export_round_graph(const CoordinationTrace& trace, RoundIndex round,
                               GraphStyle style = GraphStyle::kDot);

struct RunMetrics {
    std::size_t agents = 0;
    std::size_t rounds_executed = 0;
    std::vector<std::size_t> edge_counts;
    /// edges / (N (N - 1)); 0 when N < 2.
    std::vector<double> sparsity;
    std::vector<std::size_t> deliveries;
    /// Fraction of rounds whose graph had a directed cycle.
    double cycle_rate = 0.0;
    std::map<AgentId, llm::UsageCounters> usage_per_agent;
    llm::UsageCounters usage_total;

    [[nodiscard]] double mean_edge_count() const;
    [[nodiscard]] double mean_sparsity() const;

    bool operator==(const RunMetrics&) const = default;
};

/// Throws kEmptyTrace.
RunMetrics compute_metrics(const CoordinationTrace& trace);

/// Per-round table: round, edges, sparsity, acyclic, deliveries, tokens.
std::string metrics_table(const CoordinationTrace& trace, char delimiter = '\t');

struct ReplayMismatch {
    RoundIndex round = 0;
    std::string what;
};

/// Re-embeds every round's recorded descriptors, recomputes the relevance
/// matrix and topology under the recorded config, and lists any round whose
/// recomputed snapshot differs from the recorded one.
std::vector<ReplayMismatch> replay_topologies(const CoordinationTrace& trace, semantic::Embedder& embedder);

/// Recomputes adjacency from each recorded relevance matrix and tau and
/// lists rounds whose recorded edges disagree. Dynamic mode only.
std::vector<ReplayMismatch> check_threshold_consistency(const CoordinationTrace& trace);

}  // namespace dytopo::trace

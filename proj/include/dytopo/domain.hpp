// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

// Core value types shared by every stage of the round loop. All of them
// validate on construction and are immutable afterwards (the structs with
// public members are plain records produced by a validating stage).

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dytopo {

using AgentId = std::uint32_t;
using RoundIndex = std::uint32_t;

/// Author id used for the manager, which sits outside the worker graph.
inline constexpr AgentId kManagerId = std::numeric_limits<AgentId>::max();

/// Slack allowed on relevance scores leaving [-1, 1] through rounding.
inline constexpr double kScoreSlack = 1e-9;

enum class AgentKind { kLlmBacked, kScripted };
enum class DescriptorKind { kQuery, kKey };
enum class Channel { kPublic, kPrivate };
enum class MemorySource { kOwnPublic, kRoutedPrivate };
enum class TopologyMode { kDynamic, kRandom, kStaticFull, kSingleTurn };

std::string_view to_string(AgentKind kind) noexcept;
std::string_view to_string(DescriptorKind kind) noexcept;
std::string_view to_string(Channel channel) noexcept;
std::string_view to_string(MemorySource source) noexcept;
std::string_view to_string(TopologyMode mode) noexcept;

// Inverse of to_string; throw Error(kInvalidValue) on unknown names.
AgentKind parse_agent_kind(std::string_view name);
DescriptorKind parse_descriptor_kind(std::string_view name);
Channel parse_channel(std::string_view name);
MemorySource parse_memory_source(std::string_view name);
TopologyMode parse_topology_mode(std::string_view name);

struct AgentProfile {
    AgentId id = 0;
    std::string name;
    std::string role_description;
    AgentKind kind = AgentKind::kScripted;

    bool operator==(const AgentProfile&) const = default;
};

/// A natural-language need (query) or offer (key).
class Descriptor {
  public:
    /// Throws Error(kInvalidValue) when text is blank.
    Descriptor(std::string text, DescriptorKind kind);

    [[nodiscard]] const std::string& text() const noexcept { return text_; }
    [[nodiscard]] DescriptorKind kind() const noexcept { return kind_; }

    bool operator==(const Descriptor&) const = default;

  private:
    std::string text_;
    DescriptorKind kind_;
};

struct Message {
    AgentId author = 0;
    RoundIndex round = 0;
    Channel channel = Channel::kPublic;
    std::string content;  // may be empty

    bool operator==(const Message&) const = default;
};

/// One role-addressed entry of a structured private payload.
struct PrivateDirective {
    std::string target;
    std::string instruction;

    bool operator==(const PrivateDirective&) const = default;
};

/// Renders directives as "Target: Instruction" lines.
std::string render_directives(const std::vector<PrivateDirective>& directives);

/// Raw material for a RoundOutput; validated by the RoundOutput constructor.
struct RoundOutputFields {
    AgentId author = 0;
    RoundIndex round = 0;
    std::string public_content;
    /// Whole private payload as text. When directives are given and this is
    /// empty, it is rendered from them.
    std::string private_content;
    std::vector<PrivateDirective> private_directives;
    std::string query;
    std::string key;
    std::optional<std::string> answer;
    std::optional<bool> is_complete;
    std::optional<std::string> next_goal;
};

/// One agent's output for one round: public/private messages plus descriptors.
class RoundOutput {
  public:
    explicit RoundOutput(RoundOutputFields fields);

    [[nodiscard]] AgentId author() const noexcept { return public_.author; }
    [[nodiscard]] RoundIndex round() const noexcept { return public_.round; }
    [[nodiscard]] bool is_manager() const noexcept { return public_.author == kManagerId; }
    [[nodiscard]] const Message& public_message() const noexcept { return public_; }
    [[nodiscard]] const Message& private_message() const noexcept { return private_; }
    [[nodiscard]] const std::vector<PrivateDirective>& private_directives() const noexcept {
        return directives_;
    }
    [[nodiscard]] const Descriptor& query_descriptor() const noexcept { return query_; }
    [[nodiscard]] const Descriptor& key_descriptor() const noexcept { return key_; }
    [[nodiscard]] const std::optional<std::string>& answer() const noexcept { return answer_; }
    [[nodiscard]] const std::optional<bool>& is_complete() const noexcept { return is_complete_; }
    [[nodiscard]] const std::optional<std::string>& next_goal() const noexcept { return next_goal_; }

    /// Copy with author and round replaced (used when a policy echoes stale ids).
    [[nodiscard]] RoundOutput rebound(AgentId author, RoundIndex round) const;

    bool operator==(const RoundOutput&) const = default;

  private:
    Message public_;
    Message private_;
    std::vector<PrivateDirective> directives_;
    Descriptor query_;
    Descriptor key_;
    std::optional<std::string> answer_;
    std::optional<bool> is_complete_;
    std::optional<std::string> next_goal_;
};

struct MemoryEntry {
    RoundIndex round = 0;
    MemorySource source = MemorySource::kOwnPublic;
    AgentId author = 0;
    std::optional<double> relevance;
    std::string content;

    bool operator==(const MemoryEntry&) const = default;
};

/// Append-only per-agent history. Within a round the agent's own public
/// message comes first, then routed private messages by relevance descending
/// (ties by author ascending). append() rejects anything that breaks this.
class MemoryBuffer {
  public:
    MemoryBuffer() = default;

    void append(MemoryEntry entry);

    [[nodiscard]] const std::vector<MemoryEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }

    bool operator==(const MemoryBuffer&) const = default;

  private:
    std::vector<MemoryEntry> entries_;
};

struct RoundContext {
    RoundIndex round = 0;
    std::string goal_text;
    std::string original_task;

    /// Round 0: the goal is the task statement verbatim.
    static RoundContext initial(std::string task);
    [[nodiscard]] RoundContext next(std::string goal) const;

    bool operator==(const RoundContext&) const = default;
};

class EmbeddingVector {
  public:
    EmbeddingVector() = default;
    /// Stores values as given. Throws if normalized is claimed but the norm is off by more than 1e-6.
    EmbeddingVector(std::vector<double> values, bool normalized);

    /// l2-normalizes; a zero vector is kept as-is and flagged unnormalized.
    static EmbeddingVector normalize(std::vector<double> values);

    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
    [[nodiscard]] std::size_t dimension() const noexcept { return values_.size(); }
    [[nodiscard]] bool normalized() const noexcept { return normalized_; }

    bool operator==(const EmbeddingVector&) const = default;

  private:
    std::vector<double> values_;
    bool normalized_ = false;
};

/// N x N scores; score(consumer, provider) is how well the provider's key
/// matches the consumer's query.
class RelevanceMatrix {
  public:
    RelevanceMatrix() = default;
    /// Row-major, row = consumer. Throws on non-square data or out-of-range entries.
    RelevanceMatrix(std::size_t n, std::vector<double> scores);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] double score(AgentId consumer, AgentId provider) const;
    [[nodiscard]] const std::vector<double>& data() const noexcept { return scores_; }

    bool operator==(const RelevanceMatrix&) const = default;

  private:
    std::size_t n_ = 0;
    std::vector<double> scores_;
};

/// Binary provider -> consumer adjacency, stored provider-major.
class Adjacency {
  public:
    Adjacency() = default;
    explicit Adjacency(std::size_t n);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] bool has_edge(AgentId provider, AgentId consumer) const;
    /// Throws Error(kInvalidValue) on a self-loop.
    void add_edge(AgentId provider, AgentId consumer);
    void remove_edge(AgentId provider, AgentId consumer);
    [[nodiscard]] std::size_t in_degree(AgentId consumer) const;
    [[nodiscard]] std::size_t edge_count() const noexcept;

    bool operator==(const Adjacency&) const = default;

  private:
    void check(AgentId provider, AgentId consumer) const;

    std::size_t n_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct Edge {
    AgentId provider = 0;
    AgentId consumer = 0;
    double score = 0.0;

    bool operator==(const Edge&) const = default;
};

using AggregationOrder = std::vector<AgentId>;

struct TopologySnapshot {
    RoundIndex round = 0;
    RelevanceMatrix relevance;
    Adjacency adjacency;
    /// Sorted by (provider, consumer).
    std::vector<Edge> edges;
    AggregationOrder order;
    std::optional<bool> was_acyclic;

    bool operator==(const TopologySnapshot&) const = default;
};

/// Throws Error(kInvalidValue) naming the first violated snapshot invariant.
void check_snapshot_invariants(const TopologySnapshot& snapshot, std::size_t k_in_max);

[[nodiscard]] bool is_permutation_of_agents(const AggregationOrder& order, std::size_t n);

struct RoutingConfig {
    double tau_edge = 0.3;
    std::size_t k_in_max = 3;
    std::size_t t_max = 10;
    bool halting_enabled = true;
    TopologyMode topology_mode = TopologyMode::kDynamic;
    std::uint64_t random_seed = 0;

    /// Throws Error(kInvalidConfig, field name).
    void validate() const;

    bool operator==(const RoutingConfig&) const = default;
};

struct GlobalState {
    RoundIndex round = 0;
    std::string goal_text;
    std::vector<std::pair<AgentId, std::string>> public_digest;

    bool operator==(const GlobalState&) const = default;
};

class HaltDecision {
  public:
    static HaltDecision stop(std::optional<std::string> final_answer);
    /// Throws Error(kInvalidValue) if the goal is blank.
    static HaltDecision proceed(std::string next_goal);

    [[nodiscard]] bool halt() const noexcept { return halt_; }
    [[nodiscard]] const std::string& next_goal() const noexcept { return next_goal_; }
    [[nodiscard]] const std::optional<std::string>& final_answer() const noexcept {
        return final_answer_;
    }

    bool operator==(const HaltDecision&) const = default;

  private:
    HaltDecision() = default;

    bool halt_ = false;
    std::string next_goal_;
    std::optional<std::string> final_answer_;
};

struct RunSetup {
    std::vector<AgentProfile> profiles;  // sorted by id
    RoutingConfig config;
};

/// Ids must be exactly 0..N-1 (any order), names unique, config valid.
RunSetup validate_run_setup(std::vector<AgentProfile> profiles, const RoutingConfig& config);

/// Trims ASCII whitespace from both ends.
std::string_view trim(std::string_view text) noexcept;

}  // namespace dytopo

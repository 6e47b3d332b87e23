// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "dytopo/domain.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dytopo/error.hpp"

namespace dytopo {

namespace {

[[noreturn]] void invalid(std::string what) { throw Error(ErrorCode::kInvalidValue, std::move(what)); }

template <typename Enum, std::size_t M>
Enum parse_enum(std::string_view name, const std::pair<std::string_view, Enum> (&table)[M],
                std::string_view what) {
    for (const auto& [label, value] : table) {
        if (label == name) return value;
    }
    invalid(std::string(what) + " '" + std::string(name) + "'");
}

constexpr std::pair<std::string_view, AgentKind> kAgentKinds[] = {
    {"llm_backed", AgentKind::kLlmBacked}, {"scripted", AgentKind::kScripted}};
constexpr std::pair<std::string_view, DescriptorKind> kDescriptorKinds[] = {
    {"query", DescriptorKind::kQuery}, {"key", DescriptorKind::kKey}};
constexpr std::pair<std::string_view, Channel> kChannels[] = {
    {"public", Channel::kPublic}, {"private", Channel::kPrivate}};
constexpr std::pair<std::string_view, MemorySource> kSources[] = {
    {"own_public", MemorySource::kOwnPublic}, {"routed_private", MemorySource::kRoutedPrivate}};
constexpr std::pair<std::string_view, TopologyMode> kModes[] = {
    {"dynamic", TopologyMode::kDynamic},
    {"random", TopologyMode::kRandom},
    {"static_full", TopologyMode::kStaticFull},
    {"single_turn", TopologyMode::kSingleTurn}};

template <typename Enum, std::size_t M>
std::string_view label_of(Enum value, const std::pair<std::string_view, Enum> (&table)[M]) noexcept {
    for (const auto& [label, v] : table) {
        if (v == value) return label;
    }
    return "unknown";
}

}  // namespace

std::string_view to_string(AgentKind kind) noexcept { return label_of(kind, kAgentKinds); }
std::string_view to_string(DescriptorKind kind) noexcept { return label_of(kind, kDescriptorKinds); }
std::string_view to_string(Channel channel) noexcept { return label_of(channel, kChannels); }
std::string_view to_string(MemorySource source) noexcept { return label_of(source, kSources); }
std::string_view to_string(TopologyMode mode) noexcept { return label_of(mode, kModes); }

AgentKind parse_agent_kind(std::string_view name) { return parse_enum(name, kAgentKinds, "agent kind"); }
DescriptorKind parse_descriptor_kind(std::string_view name) {
    return parse_enum(name, kDescriptorKinds, "descriptor kind");
}
Channel parse_channel(std::string_view name) { return parse_enum(name, kChannels, "channel"); }
MemorySource parse_memory_source(std::string_view name) {
    return parse_enum(name, kSources, "memory source");
}
TopologyMode parse_topology_mode(std::string_view name) {
    return parse_enum(name, kModes, "topology mode");
}

std::string_view trim(std::string_view text) noexcept {
    constexpr std::string_view kSpace = " \t\n\r\f\v";
    const auto first = text.find_first_not_of(kSpace);
    if (first == std::string_view::npos) return {};
    const auto last = text.find_last_not_of(kSpace);
    return text.substr(first, last - first + 1);
}

// ---------------------------------------------------------------------------

Descriptor::Descriptor(std::string text, DescriptorKind kind) : text_(std::move(text)), kind_(kind) {
    if (trim(text_).empty()) invalid(std::string(to_string(kind)) + " descriptor is blank");
}

std::string render_directives(const std::vector<PrivateDirective>& directives) {
    std::string out;
    for (const auto& d : directives) {
        if (!out.empty()) out += '\n';
        out += d.target;
        out += ": ";
        out += d.instruction;
    }
    return out;
}

namespace {

std::string private_text(RoundOutputFields& f) {
    if (f.private_content.empty() && !f.private_directives.empty())
        return render_directives(f.private_directives);
    return std::move(f.private_content);
}

}  // namespace

RoundOutput::RoundOutput(RoundOutputFields f)
    : public_{f.author, f.round, Channel::kPublic, std::move(f.public_content)},
      private_{f.author, f.round, Channel::kPrivate, private_text(f)},
      directives_(std::move(f.private_directives)),
      query_(std::move(f.query), DescriptorKind::kQuery),
      key_(std::move(f.key), DescriptorKind::kKey),
      answer_(std::move(f.answer)),
      is_complete_(f.is_complete),
      next_goal_(std::move(f.next_goal)) {
    if (f.author != kManagerId && (is_complete_.has_value() || next_goal_.has_value()))
        invalid("is_complete/next_goal are manager-only fields");
}

RoundOutput RoundOutput::rebound(AgentId author, RoundIndex round) const {
    RoundOutput copy = *this;
    copy.public_.author = copy.private_.author = author;
    copy.public_.round = copy.private_.round = round;
    if (author != kManagerId && (is_complete_.has_value() || next_goal_.has_value()))
        invalid("is_complete/next_goal are manager-only fields");
    return copy;
}

// ---------------------------------------------------------------------------

void MemoryBuffer::append(MemoryEntry entry) {
    if (entry.relevance && (*entry.relevance < -1.0 - kScoreSlack || *entry.relevance > 1.0 + kScoreSlack))
        invalid("memory entry relevance outside [-1, 1]");
    const bool opens_round = entries_.empty() || entry.round != entries_.back().round;
    if (opens_round && entry.source != MemorySource::kOwnPublic) invalid("own_public entry must open its round");
    if (!entries_.empty()) {
        const MemoryEntry& last = entries_.back();
        if (entry.round < last.round) invalid("memory entry round goes backwards");
        if (entry.round == last.round) {
            if (entry.source == MemorySource::kOwnPublic)
                invalid("own_public entry must open its round");
            if (last.source == MemorySource::kRoutedPrivate) {
                const double prev = last.relevance.value_or(0.0);
                const double cur = entry.relevance.value_or(0.0);
                if (cur > prev || (cur == prev && entry.author <= last.author))
                    invalid("routed entries must be ordered by relevance desc, author asc");
            }
        }
    }
    entries_.push_back(std::move(entry));
}

RoundContext RoundContext::initial(std::string task) {
    RoundContext ctx;
    ctx.round = 0;
    ctx.goal_text = task;
    ctx.original_task = std::move(task);
    return ctx;
}

RoundContext RoundContext::next(std::string goal) const {
    return RoundContext{round + 1, std::move(goal), original_task};
}

// ---------------------------------------------------------------------------

EmbeddingVector::EmbeddingVector(std::vector<double> values, bool normalized)
    : values_(std::move(values)), normalized_(normalized) {
    if (normalized_) {
        double sq = 0.0;
        for (double v : values_) sq += v * v;
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) invalid("embedding flagged normalized but norm != 1");
    }
}

EmbeddingVector EmbeddingVector::normalize(std::vector<double> values) {
    double sq = 0.0;
    for (double v : values) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm < 1e-12) return EmbeddingVector(std::move(values), false);
    for (double& v : values) v /= norm;
    return EmbeddingVector(std::move(values), true);
}

RelevanceMatrix::RelevanceMatrix(std::size_t n, std::vector<double> scores)
    : n_(n), scores_(std::move(scores)) {
    if (scores_.size() != n_ * n_) invalid("relevance matrix is not square");
    for (double s : scores_) {
        if (!(s >= -1.0 - kScoreSlack && s <= 1.0 + kScoreSlack)) invalid("relevance score outside [-1, 1]");
    }
}

double RelevanceMatrix::score(AgentId consumer, AgentId provider) const {
    if (consumer >= n_ || provider >= n_)
        throw Error(ErrorCode::kUnknownAgent, "relevance index out of range");
    return scores_[static_cast<std::size_t>(consumer) * n_ + provider];
}

Adjacency::Adjacency(std::size_t n) : n_(n), bits_(n * n, 0) {}

void Adjacency::check(AgentId provider, AgentId consumer) const {
    if (provider >= n_ || consumer >= n_)
        throw Error(ErrorCode::kUnknownAgent, "adjacency index out of range");
}

bool Adjacency::has_edge(AgentId provider, AgentId consumer) const {
    check(provider, consumer);
    return bits_[static_cast<std::size_t>(provider) * n_ + consumer] != 0;
}

void Adjacency::add_edge(AgentId provider, AgentId consumer) {
    check(provider, consumer);
    if (provider == consumer) invalid("self-loop on agent " + std::to_string(provider));
    bits_[static_cast<std::size_t>(provider) * n_ + consumer] = 1;
}

void Adjacency::remove_edge(AgentId provider, AgentId consumer) {
    check(provider, consumer);
    bits_[static_cast<std::size_t>(provider) * n_ + consumer] = 0;
}

std::size_t Adjacency::in_degree(AgentId consumer) const {
    check(0, consumer);
    std::size_t d = 0;
    for (std::size_t p = 0; p < n_; ++p) d += bits_[p * n_ + consumer];
    return d;
}

std::size_t Adjacency::edge_count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool is_permutation_of_agents(const AggregationOrder& order, std::size_t n) {
    if (order.size() != n) return false;
    std::vector<bool> seen(n, false);
    for (AgentId id : order) {
        if (id >= n || seen[id]) return false;
        seen[id] = true;
    }
    return true;
}

void check_snapshot_invariants(const TopologySnapshot& s, std::size_t k_in_max) {
    const std::size_t n = s.adjacency.size();
    if (s.relevance.size() != n) invalid("relevance/adjacency size mismatch");
    for (AgentId i = 0; i < n; ++i) {
        if (s.adjacency.has_edge(i, i)) invalid("self-loop in adjacency");
        if (s.adjacency.in_degree(i) > k_in_max) invalid("in-degree above k_in_max");
    }
    if (s.edges.size() != s.adjacency.edge_count()) invalid("edge list and adjacency disagree");
    for (const Edge& e : s.edges) {
        if (!s.adjacency.has_edge(e.provider, e.consumer)) invalid("edge list and adjacency disagree");
    }
    if (!is_permutation_of_agents(s.order, n)) invalid("aggregation order is not a permutation");
}

void RoutingConfig::validate() const {
    if (!(tau_edge >= -1.0 && tau_edge <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "tau_edge");
    if (k_in_max < 1) throw Error(ErrorCode::kInvalidConfig, "k_in_max");
    if (t_max < 1) throw Error(ErrorCode::kInvalidConfig, "t_max");
}

HaltDecision HaltDecision::stop(std::optional<std::string> final_answer) {
    HaltDecision d;
    d.halt_ = true;
    d.final_answer_ = std::move(final_answer);
    return d;
}

HaltDecision HaltDecision::proceed(std::string next_goal) {
    if (trim(next_goal).empty()) invalid("next_goal is blank while continuing");
    HaltDecision d;
    d.next_goal_ = std::move(next_goal);
    return d;
}

RunSetup validate_run_setup(std::vector<AgentProfile> profiles, const RoutingConfig& config) {
    if (profiles.empty()) throw Error(ErrorCode::kInvalidConfig, "profiles");
    std::set<AgentId> ids;
    std::set<std::string> names;
    for (const auto& p : profiles) {
        if (!ids.insert(p.id).second) throw Error(ErrorCode::kDuplicateAgentId, std::to_string(p.id));
        if (!names.insert(p.name).second) throw Error(ErrorCode::kDuplicateAgentName, p.name);
        if (trim(p.role_description).empty()) throw Error(ErrorCode::kInvalidConfig, "role_description");
    }
    if (*ids.rbegin() != profiles.size() - 1)
        throw Error(ErrorCode::kNonContiguousIds, "expected ids 0.." + std::to_string(profiles.size() - 1));
    config.validate();
    std::sort(profiles.begin(), profiles.end(),
              [](const AgentProfile& a, const AgentProfile& b) { return a.id < b.id; });
    return RunSetup{std::move(profiles), config};
}

}  // namespace dytopo

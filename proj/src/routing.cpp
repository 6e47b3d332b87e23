// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "dytopo/routing.hpp"

#include <algorithm>
#include <cctype>

#include "dytopo/error.hpp"

namespace dytopo::routing {

namespace {

bool same_name(std::string_view a, std::string_view b) {
    a = trim(a);
    b = trim(b);
    return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
        return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
    });
}

std::string author_name(AgentId id, const std::vector<AgentProfile>& roster) {
    if (id == kManagerId) return "Manager";
    for (const auto& p : roster) {
        if (p.id == id) return p.name;
    }
    return "agent-" + std::to_string(id);
}

}  // namespace

std::string private_content_for(const RoundOutput& provider_output, const AgentProfile& consumer) {
    std::string addressed;
    bool matched = false;
    for (const auto& d : provider_output.private_directives()) {
        if (!same_name(d.target, consumer.name)) continue;
        if (matched) addressed += '\n';
        addressed += d.instruction;
        matched = true;
    }
    return matched ? addressed : provider_output.private_message().content;
}

RoutedBatch route_private_messages(const std::vector<RoundOutput>& outputs, const TopologySnapshot& snapshot,
                                   const std::vector<AgentProfile>& profiles) {
    const std::size_t n = snapshot.adjacency.size();
    for (AgentId i = 0; i < n; ++i) {
        if (i >= outputs.size() || outputs[i].author() != i)
            throw Error(ErrorCode::kMissingOutput, std::to_string(i));
        if (i >= profiles.size() || profiles[i].id != i) throw Error(ErrorCode::kUnknownAgent, std::to_string(i));
    }
    RoutedBatch batch;
    batch.round = snapshot.round;
    batch.deliveries.reserve(snapshot.edges.size());
    for (const Edge& e : snapshot.edges) {
        batch.deliveries.push_back(
            {e.provider, e.consumer, e.score, private_content_for(outputs[e.provider], profiles[e.consumer])});
    }
    return batch;
}

void apply_memory_update(std::vector<MemoryBuffer>& memories, const std::vector<RoundOutput>& outputs,
                         const RoutedBatch& batch) {
    if (memories.size() != outputs.size()) throw Error(ErrorCode::kInvalidValue, "memory/output count mismatch");
    for (const auto& out : outputs) {
        if (out.round() != batch.round) throw Error(ErrorCode::kInvalidValue, "batch round differs from outputs");
    }
    for (AgentId i = 0; i < outputs.size(); ++i) {
        std::vector<const Delivery*> incoming;
        for (const auto& d : batch.deliveries) {
            if (d.consumer == i) incoming.push_back(&d);
        }
        std::sort(incoming.begin(), incoming.end(), [](const Delivery* a, const Delivery* b) {
            if (a->score != b->score) return a->score > b->score;
            return a->provider < b->provider;
        });
        MemoryBuffer& buf = memories[i];
        buf.append({batch.round, MemorySource::kOwnPublic, i, std::nullopt,
                    outputs[i].public_message().content});
        for (const Delivery* d : incoming) {
            buf.append({batch.round, MemorySource::kRoutedPrivate, d->provider, d->score, d->content});
        }
    }
}

std::string render_agent_context(const AgentProfile& profile, const RoundContext& context,
                                 const MemoryBuffer& memory, const std::vector<AgentProfile>& roster) {
    std::string out;
    out += "## Role\n";
    out += "You are " + profile.name + ".\n";
    out += profile.role_description + "\n";
    out += "\n## Round goal (round " + std::to_string(context.round) + ")\n";
    out += context.goal_text + "\n";
    if (context.goal_text != context.original_task) out += "Original task: " + context.original_task + "\n";
    if (memory.empty()) return out;

    out += "\n## Memory\n";
    for (const auto& e : memory.entries()) {
        out += "[round " + std::to_string(e.round) + " | " + std::string(to_string(e.source)) + " | " +
               author_name(e.author, roster) + "]\n";
        out += e.content + "\n";
    }
    return out;
}

}  // namespace dytopo::routing

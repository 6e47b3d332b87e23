// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

// Synchronization barrier: once a round's topology exists, private messages
// are delivered along its edges and every agent's memory is extended. Context
// rendering for round t only ever reads memories updated through round t-1.

#pragma once

#include <string>
#include <vector>

#include "dytopo/domain.hpp"

namespace dytopo::routing {

struct Delivery {
    AgentId provider = 0;
    AgentId consumer = 0;
    double score = 0.0;
    std::string content;

    bool operator==(const Delivery&) const = default;
};

struct RoutedBatch {
    RoundIndex round = 0;
    std::vector<Delivery> deliveries;  // one per snapshot edge, in edge order

    bool operator==(const RoutedBatch&) const = default;
};

/// Picks what a provider sends to one consumer: the instructions addressed to
/// the consumer's name when the provider's private payload names it,
/// otherwise the whole private payload.
std::string private_content_for(const RoundOutput& provider_output, const AgentProfile& consumer);

/// One delivery per edge (j -> i) carrying j's private content and score(i, j).
/// outputs[k] must be agent k's output; throws kMissingOutput otherwise.
RoutedBatch route_private_messages(const std::vector<RoundOutput>& outputs, const TopologySnapshot& snapshot,
                                   const std::vector<AgentProfile>& profiles);

/// Appends each agent's own public message, then its incoming deliveries by
/// score descending (ties by provider ascending).
void apply_memory_update(std::vector<MemoryBuffer>& memories, const std::vector<RoundOutput>& outputs,
                         const RoutedBatch& batch);

/// Role block, goal block, then memory entries in buffer order. Entry labels
/// use the author's name from the roster. Byte-stable for identical input.
std::string render_agent_context(const AgentProfile& profile, const RoundContext& context,
                                 const MemoryBuffer& memory, const std::vector<AgentProfile>& roster);

}  // namespace dytopo::routing

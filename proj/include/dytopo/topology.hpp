// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

// Per-round graph induction: threshold the relevance matrix into a sparse
// provider -> consumer graph, cap each consumer's in-degree, and linearize
// the graph into an aggregation order (topological when acyclic, greedy
// minimum-restricted-in-degree otherwise). Ties always go to the lower id.

#pragma once

#include <cstddef>
#include <vector>

#include "dytopo/domain.hpp"

namespace dytopo::topology {

/// Edge j -> i iff score(i, j) > tau_edge (strict) and i != j; then each
/// consumer keeps only its k_in_max best providers. Order is left empty.
TopologySnapshot build_adjacency(const RelevanceMatrix& relevance, double tau_edge, std::size_t k_in_max,
                                 RoundIndex round = 0);

/// Providers with an active edge into consumer, ascending. Throws kUnknownAgent.
std::vector<AgentId> in_neighbors(const TopologySnapshot& snapshot, AgentId consumer);

/// Depth-first search for a directed cycle.
bool has_cycle(const Adjacency& adjacency);

/// Kahn's algorithm, smallest available id first. Throws kCycleDetected.
AggregationOrder topological_order(const Adjacency& adjacency);

/// Repeatedly places the unplaced agent with the fewest incoming edges from
/// other unplaced agents. Always a full permutation.
AggregationOrder greedy_cycle_breaking_order(const Adjacency& adjacency);

/// build_adjacency (or the baseline replacement for config.topology_mode),
/// then topological order with greedy fallback.
TopologySnapshot induce_topology(const RelevanceMatrix& relevance, const RoutingConfig& config,
                                 RoundIndex round = 0);

/// Fills snapshot.order and snapshot.was_acyclic from snapshot.adjacency.
void assign_order(TopologySnapshot& snapshot);

/// Edge list for an adjacency, scores read from the relevance matrix.
std::vector<Edge> collect_edges(const Adjacency& adjacency, const RelevanceMatrix& relevance);

}  // namespace dytopo::topology

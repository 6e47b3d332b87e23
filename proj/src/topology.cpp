// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "dytopo/topology.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>
#include <random>

#include "dytopo/error.hpp"

namespace dytopo::topology {

namespace {

// Keep each consumer's best k providers by score, ties to the lower id.
void cap_in_degree(Adjacency& adj, const RelevanceMatrix& relevance, std::size_t k_in_max) {
    const auto n = static_cast<AgentId>(adj.size());
    for (AgentId consumer = 0; consumer < n; ++consumer) {
        std::vector<AgentId> providers;
        for (AgentId p = 0; p < n; ++p) {
            if (adj.has_edge(p, consumer)) providers.push_back(p);
        }
        if (providers.size() <= k_in_max) continue;
        std::stable_sort(providers.begin(), providers.end(), [&](AgentId a, AgentId b) {
            return relevance.score(consumer, a) > relevance.score(consumer, b);
        });
        for (std::size_t r = k_in_max; r < providers.size(); ++r) adj.remove_edge(providers[r], consumer);
    }
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Portable bounded draw; std::uniform_int_distribution differs across
// standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = 0;
    do {
        draw = rng();
    } while (draw >= limit);
    return draw % bound;
}

// Random edges with the same count as the dynamic graph, drawn by shuffling
// all ordered pairs and admitting them while the consumer has room under the cap.
Adjacency random_adjacency(std::size_t n, std::size_t edge_count, std::size_t k_in_max,
                           std::uint64_t seed, RoundIndex round) {
    std::vector<std::pair<AgentId, AgentId>> pairs;
    for (AgentId p = 0; p < n; ++p) {
        for (AgentId c = 0; c < n; ++c) {
            if (p != c) pairs.emplace_back(p, c);
        }
    }
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(round)));
    for (std::size_t i = pairs.size(); i > 1; --i) {
        std::swap(pairs[i - 1], pairs[bounded(rng, i)]);
    }
    Adjacency adj(n);
    std::vector<std::size_t> in_deg(n, 0);
    std::size_t placed = 0;
    for (const auto& [p, c] : pairs) {
        if (placed == edge_count) break;
        if (in_deg[c] >= k_in_max) continue;
        adj.add_edge(p, c);
        ++in_deg[c];
        ++placed;
    }
    return adj;
}

}  // namespace

std::vector<Edge> collect_edges(const Adjacency& adjacency, const RelevanceMatrix& relevance) {
    std::vector<Edge> edges;
    const auto n = static_cast<AgentId>(adjacency.size());
    for (AgentId p = 0; p < n; ++p) {
        for (AgentId c = 0; c < n; ++c) {
            if (adjacency.has_edge(p, c)) edges.push_back({p, c, relevance.score(c, p)});
        }
    }
    return edges;
}

TopologySnapshot build_adjacency(const RelevanceMatrix& relevance, double tau_edge, std::size_t k_in_max,
                                 RoundIndex round) {
    if (k_in_max < 1) throw Error(ErrorCode::kInvalidConfig, "k_in_max");
    const auto n = static_cast<AgentId>(relevance.size());
    Adjacency adj(n);
    for (AgentId consumer = 0; consumer < n; ++consumer) {
        for (AgentId provider = 0; provider < n; ++provider) {
            if (provider != consumer && relevance.score(consumer, provider) > tau_edge)
                adj.add_edge(provider, consumer);
        }
    }
    cap_in_degree(adj, relevance, k_in_max);

    TopologySnapshot snap;
    snap.round = round;
    snap.edges = collect_edges(adj, relevance);
    snap.adjacency = std::move(adj);
    snap.relevance = relevance;
    return snap;
}

std::vector<AgentId> in_neighbors(const TopologySnapshot& snapshot, AgentId consumer) {
    const auto n = static_cast<AgentId>(snapshot.adjacency.size());
    if (consumer >= n) throw Error(ErrorCode::kUnknownAgent, std::to_string(consumer));
    std::vector<AgentId> providers;
    for (AgentId p = 0; p < n; ++p) {
        if (snapshot.adjacency.has_edge(p, consumer)) providers.push_back(p);
    }
    return providers;
}

bool has_cycle(const Adjacency& adjacency) {
    const auto n = static_cast<AgentId>(adjacency.size());
    enum class Mark : std::uint8_t { kWhite, kGrey, kBlack };
    std::vector<Mark> mark(n, Mark::kWhite);
    std::function<bool(AgentId)> visit = [&](AgentId u) {
        mark[u] = Mark::kGrey;
        for (AgentId v = 0; v < n; ++v) {
            if (!adjacency.has_edge(u, v)) continue;
            if (mark[v] == Mark::kGrey) return true;
            if (mark[v] == Mark::kWhite && visit(v)) return true;
        }
        mark[u] = Mark::kBlack;
        return false;
    };
    for (AgentId u = 0; u < n; ++u) {
        if (mark[u] == Mark::kWhite && visit(u)) return true;
    }
    return false;
}

AggregationOrder topological_order(const Adjacency& adjacency) {
    const auto n = static_cast<AgentId>(adjacency.size());
    std::vector<std::size_t> in_deg(n);
    for (AgentId c = 0; c < n; ++c) in_deg[c] = adjacency.in_degree(c);

    std::priority_queue<AgentId, std::vector<AgentId>, std::greater<>> ready;
    for (AgentId c = 0; c < n; ++c) {
        if (in_deg[c] == 0) ready.push(c);
    }
    AggregationOrder order;
    order.reserve(n);
    while (!ready.empty()) {
        const AgentId u = ready.top();
        ready.pop();
        order.push_back(u);
        for (AgentId v = 0; v < n; ++v) {
            if (adjacency.has_edge(u, v) && --in_deg[v] == 0) ready.push(v);
        }
    }
    if (order.size() != n) throw Error(ErrorCode::kCycleDetected, "no topological order exists");
    return order;
}

AggregationOrder greedy_cycle_breaking_order(const Adjacency& adjacency) {
    const auto n = static_cast<AgentId>(adjacency.size());
    std::vector<bool> placed(n, false);
    AggregationOrder order;
    order.reserve(n);
    for (AgentId step = 0; step < n; ++step) {
        AgentId best = n;
        std::size_t best_deg = 0;
        for (AgentId i = 0; i < n; ++i) {
            if (placed[i]) continue;
            std::size_t deg = 0;
            for (AgentId j = 0; j < n; ++j) {
                if (!placed[j] && adjacency.has_edge(j, i)) ++deg;
            }
            if (best == n || deg < best_deg) {
                best = i;
                best_deg = deg;
            }
        }
        placed[best] = true;
        order.push_back(best);
    }
    return order;
}

void assign_order(TopologySnapshot& snapshot) {
    if (has_cycle(snapshot.adjacency)) {
        snapshot.order = greedy_cycle_breaking_order(snapshot.adjacency);
        snapshot.was_acyclic = false;
    } else {
        snapshot.order = topological_order(snapshot.adjacency);
        snapshot.was_acyclic = true;
    }
}

TopologySnapshot induce_topology(const RelevanceMatrix& relevance, const RoutingConfig& config,
                                 RoundIndex round) {
    TopologySnapshot snap = build_adjacency(relevance, config.tau_edge, config.k_in_max, round);
    const std::size_t n = relevance.size();
    switch (config.topology_mode) {
        case TopologyMode::kDynamic:
            break;
        case TopologyMode::kRandom:
            snap.adjacency =
                random_adjacency(n, snap.edges.size(), config.k_in_max, config.random_seed, round);
            break;
        case TopologyMode::kStaticFull: {
            Adjacency full(n);
            for (AgentId p = 0; p < n; ++p) {
                for (AgentId c = 0; c < n; ++c) {
                    if (p != c) full.add_edge(p, c);
                }
            }
            cap_in_degree(full, relevance, config.k_in_max);
            snap.adjacency = std::move(full);
            break;
        }
        case TopologyMode::kSingleTurn:
            snap.adjacency = Adjacency(n);
            break;
    }
    snap.edges = collect_edges(snap.adjacency, relevance);
    assign_order(snap);
    return snap;
}

}  // namespace dytopo::topology

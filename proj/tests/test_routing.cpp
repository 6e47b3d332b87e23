// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dytopo/routing.hpp"
#include "dytopo/topology.hpp"
#include "test_support.hpp"

using namespace dytopo;
using namespace dytopo::routing;
using dytopo::testing::code_of;

namespace {

TopologySnapshot snapshot_of(std::size_t n, std::initializer_list<std::pair<AgentId, AgentId>> edges,
                             double score = 0.5, RoundIndex round = 0) {
    TopologySnapshot s;
    s.round = round;
    s.relevance = RelevanceMatrix(n, std::vector<double>(n * n, score));
    s.adjacency = testing::adjacency_of(n, edges);
    s.edges = topology::collect_edges(s.adjacency, s.relevance);
    topology::assign_order(s);
    return s;
}

std::vector<RoundOutput> outputs_for(std::size_t n, RoundIndex round = 0) {
    std::vector<RoundOutput> out;
    for (AgentId i = 0; i < n; ++i)
        out.push_back(testing::worker_output(i, round, "q" + std::to_string(i), "k" + std::to_string(i),
                                             "public " + std::to_string(i), "private " + std::to_string(i)));
    return out;
}

}  // namespace

TEST_CASE("one delivery per edge with the provider's private text") {
    const auto s = snapshot_of(3, {{0, 1}, {2, 1}});
    const auto batch = route_private_messages(outputs_for(3), s, testing::roster({"A", "B", "C"}));
    REQUIRE(batch.deliveries.size() == 2);
    CHECK(batch.deliveries[0] == Delivery{0, 1, 0.5, "private 0"});
    CHECK(batch.deliveries[1] == Delivery{2, 1, 0.5, "private 2"});
}

TEST_CASE("no edges, no deliveries") {
    const auto s = snapshot_of(3, {});
    CHECK(route_private_messages(outputs_for(3), s, testing::roster({"A", "B", "C"})).deliveries.empty());
}

TEST_CASE("empty private text is still delivered") {
    auto outs = outputs_for(2);
    outs[0] = testing::worker_output(0, 0, "q", "k", "pub", "");
    const auto batch = route_private_messages(outs, snapshot_of(2, {{0, 1}}), testing::roster({"A", "B"}));
    REQUIRE(batch.deliveries.size() == 1);
    CHECK(batch.deliveries[0].content.empty());
}

TEST_CASE("missing output is rejected") {
    auto outs = outputs_for(2);
    outs.pop_back();
    CHECK(code_of([&] { route_private_messages(outs, snapshot_of(2, {{0, 1}}), testing::roster({"A", "B"})); }) ==
          ErrorCode::kMissingOutput);
}

TEST_CASE("private directives are addressed by consumer name") {
    RoundOutputFields f;
    f.query = "q";
    f.key = "k";
    f.private_directives = {{"tester", "check bounds"}, {"Designer", "freeze API"}, {" Tester ", "and overflow"}};
    const RoundOutput o(f);
    const auto r = testing::roster({"Developer", "Tester", "Designer", "Researcher"});
    CHECK(private_content_for(o, r[1]) == "check bounds\nand overflow");
    CHECK(private_content_for(o, r[2]) == "freeze API");
    CHECK(private_content_for(o, r[3]) == o.private_message().content);
}

TEST_CASE("deliveries join the seed-7 oracle edges") {
    const auto fx = testing::read_json(testing::data_dir() / "fixtures" / "topology.json")["seed7"];
    std::vector<double> scores;
    for (const auto& row : fx["relevance"])
        for (const auto& v : row) scores.push_back(v.get<double>());
    const RelevanceMatrix rel(5, scores);
    const auto snap = topology::build_adjacency(rel, fx["tau"].get<double>(), fx["k_in"].get<std::size_t>());
    const auto batch = route_private_messages(outputs_for(5), snap, testing::roster({"A", "B", "C", "D", "E"}));
    REQUIRE(batch.deliveries.size() == fx["edges"].size());
    std::size_t k = 0;
    for (const auto& e : fx["edges"]) {
        const auto p = e[0].get<AgentId>();
        const auto c = e[1].get<AgentId>();
        CHECK(batch.deliveries[k].provider == p);
        CHECK(batch.deliveries[k].consumer == c);
        CHECK(batch.deliveries[k].score == rel.score(c, p));
        CHECK(batch.deliveries[k].content == "private " + std::to_string(p));
        ++k;
    }
}

TEST_CASE("memory update order: own public, then relevance desc, then provider id") {
    TopologySnapshot s;
    s.relevance = RelevanceMatrix(4, {1, 0, 0, 0, 0.4, 1, 0.9, 0.4, 0, 0, 1, 0, 0, 0, 0, 1});
    s.adjacency = testing::adjacency_of(4, {{0, 1}, {2, 1}, {3, 1}});
    s.edges = topology::collect_edges(s.adjacency, s.relevance);
    topology::assign_order(s);
    const auto outs = outputs_for(4);
    const auto batch = route_private_messages(outs, s, testing::roster({"A", "B", "C", "D"}));
    std::vector<MemoryBuffer> mem(4);
    apply_memory_update(mem, outs, batch);
    const auto& e = mem[1].entries();
    REQUIRE(e.size() == 4);
    CHECK(e[0].source == MemorySource::kOwnPublic);
    CHECK(e[0].content == "public 1");
    CHECK(e[1].author == 2);
    CHECK(e[2].author == 0);
    CHECK(e[3].author == 3);
    CHECK(mem[0].size() == 1);
}

TEST_CASE("memory is append-only across rounds") {
    const auto r = testing::roster({"A", "B"});
    std::vector<MemoryBuffer> mem(2);
    std::vector<MemoryBuffer> before;
    for (RoundIndex t = 0; t < 4; ++t) {
        const auto outs = outputs_for(2, t);
        const auto s = snapshot_of(2, {{0, 1}, {1, 0}}, 0.5, t);
        before = mem;
        apply_memory_update(mem, outs, route_private_messages(outs, s, r));
        for (std::size_t i = 0; i < 2; ++i) {
            REQUIRE(mem[i].size() == before[i].size() + 2);
            for (std::size_t k = 0; k < before[i].size(); ++k) CHECK(mem[i].entries()[k] == before[i].entries()[k]);
        }
    }
}

TEST_CASE("memory update rejects mismatched rounds") {
    const auto outs = outputs_for(2, 1);
    const auto s = snapshot_of(2, {{0, 1}}, 0.5, 0);
    std::vector<MemoryBuffer> mem(2);
    const auto batch = route_private_messages(outs, s, testing::roster({"A", "B"}));
    CHECK(code_of([&] { apply_memory_update(mem, outs, batch); }) == ErrorCode::kInvalidValue);
}

TEST_CASE("context rendering") {
    const auto r = testing::roster({"Developer", "Tester"});
    SUBCASE("round 0 has no memory block") {
        const auto text = render_agent_context(r[0], RoundContext::initial("Write f"), MemoryBuffer{}, r);
        CHECK(text == "## Role\nYou are Developer.\nDeveloper role\n\n## Round goal (round 0)\nWrite f\n");
    }
    SUBCASE("later rounds show goal, original task and memory") {
        MemoryBuffer m;
        m.append({0, MemorySource::kOwnPublic, 0, std::nullopt, "draft"});
        m.append({0, MemorySource::kRoutedPrivate, 1, 0.5, "sentinel-Tester-r0"});
        const auto ctx = RoundContext::initial("Write f").next("Fix bounds");
        const auto text = render_agent_context(r[0], ctx, m, r);
        CHECK(text ==
              "## Role\nYou are Developer.\nDeveloper role\n\n## Round goal (round 1)\nFix bounds\n"
              "Original task: Write f\n\n## Memory\n[round 0 | own_public | Developer]\ndraft\n"
              "[round 0 | routed_private | Tester]\nsentinel-Tester-r0\n");
    }
}

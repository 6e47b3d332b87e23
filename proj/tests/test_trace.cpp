// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dytopo/harness.hpp"
#include "dytopo/topology.hpp"
#include "dytopo/trace.hpp"
#include "test_support.hpp"

using namespace dytopo;
using namespace dytopo::trace;
using dytopo::testing::code_of;

namespace {

RoundRecord synthetic_round(RoundIndex t, std::size_t n, std::initializer_list<std::pair<AgentId, AgentId>> edges,
                            double score = 0.5) {
    RoundRecord r;
    r.round = t;
    r.context = RoundContext::initial("task");
    r.context.round = t;
    r.topology.round = t;
    r.topology.relevance = RelevanceMatrix(n, std::vector<double>(n * n, score));
    r.topology.adjacency = testing::adjacency_of(n, edges);
    r.topology.edges = topology::collect_edges(r.topology.adjacency, r.topology.relevance);
    topology::assign_order(r.topology);
    for (const Edge& e : r.topology.edges) r.deliveries.push_back({e.provider, e.consumer, e.score, "m"});
    return r;
}

CoordinationTrace synthetic_trace(std::size_t n) {
    CoordinationTrace t;
    t.metadata.profiles = testing::roster({"Developer", "Researcher", "Tester", "Designer"});
    t.metadata.profiles.resize(n);
    return t;
}

const CoordinationTrace& golden_trace() {
    static const CoordinationTrace trace = [] {
        const auto spec = harness::load_run_spec(testing::data_dir() / "golden" / "scenario.json");
        harness::Environment env;
        env.clock = [] { return std::string("2026-01-01T00:00:00Z"); };
        auto outcome = harness::execute(spec, env);
        if (outcome.error) throw *outcome.error;
        return outcome.trace;
    }();
    return trace;
}

}  // namespace

TEST_CASE("rounds must be appended in order") {
    CoordinationTrace t;
    t.record_round(synthetic_round(0, 2, {}));
    CHECK(code_of([&] { t.record_round(synthetic_round(2, 2, {})); }) == ErrorCode::kRoundGap);
    CHECK(code_of([&] { (void)t.round(1); }) == ErrorCode::kUnknownRound);
}

TEST_CASE("json round trip is lossless") {
    const auto& g = golden_trace();
    const auto text = to_json_text(g);
    const auto back = from_json_text(text);
    CHECK(back == g);
    CHECK(to_json_text(back) == text);
    auto dir = testing::scratch_dir("trace_io");
    export_trace(g, dir / "t.json");
    CHECK(import_trace(dir / "t.json") == g);
}

TEST_CASE("partial traces keep the failure record") {
    auto t = synthetic_trace(2);
    t.record_round(synthetic_round(0, 2, {{0, 1}}));
    t.failure = TraceFailure{1, "PolicyFailure", "PolicyFailure: Tester: boom"};
    const auto back = from_json_text(to_json_text(t));
    CHECK(back.failure == t.failure);
    CHECK_FALSE(back.result.has_value());
}

TEST_CASE("corrupt and foreign traces") {
    auto text = to_json_text(golden_trace());
    SUBCASE("version tampered") {
        const auto pos = text.find("dytopo-trace/1");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 14, "dytopo-trace/9");
        CHECK(code_of([&] { from_json_text(text); }) == ErrorCode::kVersionMismatch);
    }
    SUBCASE("truncated") {
        CHECK(code_of([&] { from_json_text(text.substr(0, text.size() / 2)); }) == ErrorCode::kCorruptTrace);
    }
    SUBCASE("missing format") {
        CHECK(code_of([] { from_json_text("{\"rounds\": []}"); }) == ErrorCode::kCorruptTrace);
    }
    SUBCASE("field of the wrong type") {
        auto doc = nlohmann::ordered_json::parse(text);
        doc["rounds"][0]["topology"]["order"] = "zero";
        CHECK(code_of([&] { from_json_text(doc.dump()); }) == ErrorCode::kCorruptTrace);
    }
    SUBCASE("missing file") {
        CHECK(code_of([] { import_trace("/nonexistent/dytopo/trace.json"); }) == ErrorCode::kIoError);
    }
}

TEST_CASE("strip_timestamps blanks only the timestamps") {
    auto t = synthetic_trace(2);
    t.metadata.started_at = "2026-01-01T00:00:00Z";
    t.metadata.finished_at = "2026-01-01T00:00:09Z";
    t.record_round(synthetic_round(0, 2, {}));
    auto a = from_json_text(strip_timestamps(to_json_text(t)));
    CHECK(a.metadata.started_at.empty());
    CHECK(a.metadata.finished_at.empty());
    a.metadata.started_at = t.metadata.started_at;
    a.metadata.finished_at = t.metadata.finished_at;
    CHECK(a == t);
}

TEST_CASE("dot export") {
    SUBCASE("no edges still lists every agent") {
        auto t = synthetic_trace(3);
        t.record_round(synthetic_round(0, 3, {}));
        CHECK(export_round_graph(t, 0) ==
              "digraph round_0 {\n  rankdir=LR;\n  label=\"round 0\";\n"
              "  n0 [label=\"Developer\", xlabel=\"pos 1\"];\n"
              "  n1 [label=\"Researcher\", xlabel=\"pos 2\"];\n"
              "  n2 [label=\"Tester\", xlabel=\"pos 3\"];\n}\n");
    }
    SUBCASE("single edge labelled with its score") {
        auto t = synthetic_trace(2);
        t.record_round(synthetic_round(0, 2, {{1, 0}}, 0.7712));
        const auto dot = export_round_graph(t, 0);
        CHECK(dot.find("  n1 -> n0 [label=\"0.77\"];\n") != std::string::npos);
        CHECK(dot.find("n1 [label=\"Researcher\", xlabel=\"pos 1\"]") != std::string::npos);
        CHECK(export_round_graph(t, 0, GraphStyle::kMermaid) ==
              "flowchart LR\n  n0[\"Developer (pos 2)\"]\n  n1[\"Researcher (pos 1)\"]\n  n1 -->|0.77| n0\n");
    }
    SUBCASE("negative zero prints as zero") {
        auto t = synthetic_trace(2);
        t.record_round(synthetic_round(0, 2, {{0, 1}}, -0.001));
        CHECK(export_round_graph(t, 0).find("[label=\"0.00\"]") != std::string::npos);
    }
    SUBCASE("golden scenario round 1") {
        const auto path = testing::data_dir() / "golden" / "round_1.dot";
        const auto dot = export_round_graph(golden_trace(), 1);
        if (testing::update_goldens()) {
            testing::write_text(path, dot);
        } else {
            CHECK(testing::read_text(path) == dot);
        }
    }
    CHECK(parse_graph_style("mermaid") == GraphStyle::kMermaid);
    CHECK(code_of([] { parse_graph_style("svg"); }) == ErrorCode::kInvalidValue);
    CHECK(code_of([] { export_round_graph(golden_trace(), 9); }) == ErrorCode::kUnknownRound);
}

TEST_CASE("metrics on a hand-built trace") {
    auto t = synthetic_trace(4);
    t.record_round(synthetic_round(0, 4, {{0, 1}, {1, 2}, {2, 0}}));
    t.record_round(synthetic_round(1, 4, {{3, 0}}));
    const auto m = compute_metrics(t);
    CHECK(m.edge_counts == std::vector<std::size_t>{3, 1});
    CHECK(m.sparsity[0] == 3.0 / 12.0);
    CHECK(m.sparsity[1] == 1.0 / 12.0);
    CHECK(m.cycle_rate == 0.5);
    CHECK(m.mean_edge_count() == 2.0);
    CHECK(metrics_table(t) ==
          "round\tedges\tsparsity\tacyclic\tdeliveries\tprompt_tokens\tcompletion_tokens\trequests\n"
          "0\t3\t0.250000\tfalse\t3\t0\t0\t0\n"
          "1\t1\t0.083333\ttrue\t1\t0\t0\t0\n"
          "total\t2.000000\t0.166667\t0.500000\t4\t0\t0\t0\n");
}

TEST_CASE("single agent has zero sparsity") {
    auto t = synthetic_trace(1);
    t.record_round(synthetic_round(0, 1, {}));
    CHECK(compute_metrics(t).sparsity == std::vector<double>{0.0});
}

TEST_CASE("metrics need rounds") {
    CHECK(code_of([] { compute_metrics(CoordinationTrace{}); }) == ErrorCode::kEmptyTrace);
}

TEST_CASE("golden scenario metrics match the hand-computed fixture") {
    const auto m = compute_metrics(golden_trace());
    CHECK(m.edge_counts == std::vector<std::size_t>{5, 3, 2});
    CHECK(m.sparsity == std::vector<double>{5.0 / 12.0, 3.0 / 12.0, 2.0 / 12.0});
    CHECK(m.cycle_rate == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(m.mean_edge_count() == doctest::Approx(10.0 / 3.0).epsilon(1e-15));
    CHECK(m.usage_total == llm::UsageCounters{});
    const auto path = testing::data_dir() / "golden" / "metrics.tsv";
    if (testing::update_goldens()) {
        testing::write_text(path, metrics_table(golden_trace()));
    } else {
        CHECK(testing::read_text(path) == metrics_table(golden_trace()));
    }
}

TEST_CASE("replay reproduces recorded topologies") {
    const auto t = from_json_text(to_json_text(golden_trace()));
    auto emb = semantic::embedder_from_identity(t.metadata.embedder);
    REQUIRE(emb);
    CHECK(replay_topologies(t, *emb).empty());
    CHECK(check_threshold_consistency(t).empty());

    auto doc = nlohmann::ordered_json::parse(to_json_text(t));
    auto& adj = doc["rounds"][1]["topology"]["adjacency"];
    adj[0][1] = adj[0][1].get<int>() == 0 ? 1 : 0;
    const auto tampered = from_json_text(doc.dump());
    const auto mismatches = replay_topologies(tampered, *emb);
    REQUIRE(mismatches.size() == 1);
    CHECK(mismatches[0].round == 1);
    CHECK(mismatches[0].what == "adjacency differs");
    REQUIRE(check_threshold_consistency(tampered).size() == 1);

    semantic::HashingEmbedder other(64, 1);
    CHECK_FALSE(replay_topologies(t, other).empty());
}

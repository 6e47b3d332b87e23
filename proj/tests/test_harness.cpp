// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "dytopo/harness.hpp"
#include "test_support.hpp"

using namespace dytopo;
using namespace dytopo::harness;
using dytopo::testing::code_of;
using nlohmann::ordered_json;

namespace {

std::filesystem::path golden_spec() { return testing::data_dir() / "golden" / "scenario.json"; }
std::filesystem::path loop_spec() { return testing::data_dir() / "specs" / "loop.json"; }

Overrides out_to(const std::filesystem::path& dir) {
    Overrides o;
    o.out = dir;
    return o;
}

Environment quiet_env() {
    Environment env;
    env.clock = [] { return std::string("2026-01-01T00:00:00Z"); };
    env.sleeper = [](std::chrono::milliseconds) {};
    env.getenv = [](const char*) { return std::string("k"); };
    return env;
}

std::filesystem::path write_spec(const std::string& name, const ordered_json& doc) {
    const auto dir = testing::scratch_dir(name);
    testing::write_text(dir / "spec.json", doc.dump(2));
    return dir / "spec.json";
}

ordered_json llm_spec() {
    ordered_json doc = ordered_json::parse(testing::read_text(loop_spec()));
    for (auto& a : doc["agents"]) {
        a["policy"] = "llm_backed";
        a["endpoint"] = "main";
        a.erase("script");
    }
    doc["endpoints"] = {{"main", {{"base_url", "http://127.0.0.1:9/v1"}, {"model", "m"}, {"max_retries", 1}}}};
    return doc;
}

}  // namespace

TEST_CASE("run on the golden scenario writes every artifact") {
    const auto dir = testing::scratch_dir("harness_run");
    std::ostringstream out, err;
    CHECK(cmd_run(golden_spec(), out_to(dir), out, err, quiet_env()) == kExitOk);
    CHECK(err.str().empty());
    CHECK(out.str().find("rounds_executed\t3\n") != std::string::npos);
    CHECK(out.str().find("final_answer_hash\t7b289f2c2b0bd271\n") != std::string::npos);
    CHECK(testing::read_text(dir / "final_answer.txt") ==
          "Final: merge_intervals handles empty input, nested and touching intervals.");
    CHECK(std::filesystem::exists(dir / "metrics.tsv"));
    CHECK(testing::read_text(dir / "graphs" / "round_1.dot") ==
          testing::read_text(testing::data_dir() / "golden" / "round_1.dot"));
    CHECK(trace::strip_timestamps(testing::read_text(dir / "trace.json")) ==
          testing::read_text(testing::data_dir() / "golden" / "trace.json"));

    std::ostringstream replay_out, replay_err;
    CHECK(cmd_replay(dir / "trace.json", replay_out, replay_err) == kExitOk);
    CHECK(replay_out.str() == "replayed 3 rounds, 0 mismatches\n");

    std::ostringstream graph_out, graph_err;
    CHECK(cmd_export_graph(dir / "trace.json", 1, trace::GraphStyle::kDot, graph_out, graph_err) == kExitOk);
    CHECK(graph_out.str() == testing::read_text(dir / "graphs" / "round_1.dot"));
    CHECK(cmd_export_graph(dir / "trace.json", 7, trace::GraphStyle::kDot, graph_out, graph_err) == kExitValidation);
}

TEST_CASE("spec validation errors exit 2") {
    auto doc = ordered_json::parse(testing::read_text(loop_spec()));
    std::ostringstream out, err;
    SUBCASE("two managers") {
        auto extra = doc["agents"].back();
        extra["name"] = "Manager2";
        doc["agents"].push_back(extra);
        CHECK(cmd_run(write_spec("two_managers", doc), {}, out, err, quiet_env()) == kExitValidation);
        CHECK(err.str().rfind("error: InvalidConfig: ", 0) == 0);
    }
    SUBCASE("no workers") {
        doc["agents"] = ordered_json::array({doc["agents"].back()});
        CHECK(cmd_run(write_spec("no_workers", doc), {}, out, err, quiet_env()) == kExitValidation);
    }
    SUBCASE("unknown domain") {
        doc["domain"] = "chemistry";
        CHECK(cmd_run(write_spec("bad_domain", doc), {}, out, err, quiet_env()) == kExitValidation);
        CHECK(err.str().find("UnknownDomain") != std::string::npos);
    }
    SUBCASE("tau out of range") {
        doc["routing"]["tau_edge"] = 2.0;
        CHECK(cmd_run(write_spec("bad_tau", doc), {}, out, err, quiet_env()) == kExitValidation);
    }
    SUBCASE("missing spec file") {
        CHECK(cmd_run("/nonexistent/spec.json", {}, out, err, quiet_env()) != kExitOk);
    }
}

TEST_CASE("parse_run_spec details") {
    auto doc = ordered_json::parse(testing::read_text(loop_spec()));
    doc["agents"][1].erase("role");
    const auto spec = parse_run_spec(doc, loop_spec().parent_path());
    CHECK(spec.workers.size() == 4);
    CHECK(spec.manager.name == "Manager");
    CHECK(spec.routing.random_seed == 11);
    CHECK(spec.all_scripted());
    CHECK_FALSE(spec.workers[1].role.empty());
    CHECK(spec.output_dir == loop_spec().parent_path() / "out");
}

TEST_CASE("unreachable endpoint exits 3 and keeps the partial trace") {
    auto transport = std::make_shared<testing::MockTransport>();
    transport->set_fallback([](const testing::MockTransport::Request&) { return llm::HttpResponse{-1, ""}; });
    auto env = quiet_env();
    env.transport = transport;
    const auto dir = testing::scratch_dir("harness_unreachable");
    std::ostringstream out, err;
    CHECK(cmd_run(write_spec("llm", llm_spec()), out_to(dir), out, err, env) == kExitPolicyFailure);
    CHECK(err.str().rfind("error: PolicyFailure: ", 0) == 0);
    const auto t = trace::import_trace(dir / "trace.json");
    CHECK(t.size() == 0);
    REQUIRE(t.failure.has_value());
    CHECK(t.failure->code == "PolicyFailure");
    CHECK(t.failure->round == 0);
}

TEST_CASE("llm-backed run records usage per agent") {
    auto transport = std::make_shared<testing::MockTransport>();
    transport->set_fallback([](const testing::MockTransport::Request& req) {
        const bool manager = req.body.find("Workflow Orchestrator") != std::string::npos;
        const std::string content =
            manager ? R"({"public_content":"ok","is_complete":true,"next_goal":""})"
                    : R"({"public_content":"p","private_content":"x","q_vector":"need code","k_vector":"provide code"})";
        return llm::HttpResponse{200, testing::chat_body(content, 100, 20)};
    });
    auto env = quiet_env();
    env.transport = transport;
    const auto spec = parse_run_spec(llm_spec());
    const auto outcome = execute(spec, env);
    REQUIRE_FALSE(outcome.error.has_value());
    CHECK(outcome.result.rounds_executed == 1);
    const auto m = trace::compute_metrics(outcome.trace);
    CHECK(m.usage_total.prompt_tokens == 500);
    CHECK(m.usage_total.completion_tokens == 100);
    CHECK(m.usage_total.request_count == 5);
    CHECK(m.usage_per_agent.size() == 5);
    CHECK(m.usage_per_agent.at(kManagerId).request_count == 1);
}

TEST_CASE("tau sweep") {
    const auto spec = load_run_spec(golden_spec());
    std::vector<double> taus;
    for (int i = 1; i <= 9; ++i) taus.push_back(i / 10.0);
    const auto rows = sweep_tau(spec, taus, quiet_env());
    REQUIRE(rows.size() == 9);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].ok);
        if (i > 0) CHECK(rows[i].mean_edges <= rows[i - 1].mean_edges);
    }
    CHECK(rows[2].edge_counts == std::vector<std::size_t>{5, 3, 2});
    CHECK(rows[0].label == "0.1");
    const auto table = format_table(rows, TableKind::kTau);
    CHECK(table.rfind("tau\tmean_edges\tmean_sparsity\trounds_executed\tfinal_answer_hash\tstatus\n", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 10);
    CHECK(code_of([&] { sweep_tau(spec, {1.5}); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("rounds sweep runs exactly T rounds with halting off") {
    const auto spec = load_run_spec(loop_spec());
    const auto rows = sweep_rounds(spec, {1, 3, 5}, quiet_env());
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].rounds_executed == 1);
    CHECK(rows[1].rounds_executed == 3);
    CHECK(rows[2].rounds_executed == 5);
    CHECK(code_of([&] { sweep_rounds(spec, {0}); }) == ErrorCode::kInvalidConfig);

    const auto dir = testing::scratch_dir("harness_rounds");
    std::ostringstream out, err;
    CHECK(cmd_sweep_rounds(loop_spec(), {0}, out_to(dir), out, err, quiet_env()) == kExitValidation);
    CHECK(cmd_sweep_rounds(loop_spec(), {2}, out_to(dir), out, err, quiet_env()) == kExitOk);
    CHECK(testing::read_text(dir / "sweep_rounds.tsv") == out.str());
}

TEST_CASE("baselines") {
    auto spec = load_run_spec(loop_spec());
    spec.routing.halting_enabled = false;
    spec.routing.t_max = 3;
    const auto rows = compare_baselines(spec, quiet_env());
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].label == "dynamic");
    CHECK(rows[1].label == "random");
    CHECK(rows[2].label == "static_full");
    CHECK(rows[3].label == "single_turn");
    for (const auto& r : rows) CHECK(r.ok);
    CHECK(rows[1].edge_counts == rows[0].edge_counts);
    CHECK(rows[2].edge_counts == std::vector<std::size_t>{12, 12, 12});
    CHECK(rows[3].deliveries == 0);
    CHECK(rows[3].edge_counts == std::vector<std::size_t>{0, 0, 0});
    const auto table = format_table(rows, TableKind::kBaselines);
    CHECK(table.find("static_full\t12,12,12\t") != std::string::npos);
}

TEST_CASE("command-line overrides win and are recorded") {
    const auto dir = testing::scratch_dir("harness_overrides");
    Overrides o = out_to(dir);
    o.tau = 0.5;
    o.seed = 99;
    o.raw = {{"tau", "0.5"}, {"seed", "99"}};
    std::ostringstream out, err;
    REQUIRE(cmd_run(loop_spec(), o, out, err, quiet_env()) == kExitOk);
    const auto t = trace::import_trace(dir / "trace.json");
    CHECK(t.metadata.config.tau_edge == 0.5);
    CHECK(t.metadata.config.random_seed == 99);
    CHECK(t.metadata.overrides == std::map<std::string, std::string>{{"tau", "0.5"}, {"seed", "99"}});
}

TEST_CASE("answer hash") {
    CHECK(answer_hash(std::nullopt) == "-");
    CHECK(answer_hash(std::string("")) == "cbf29ce484222325");
}

// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dytopo/agent.hpp"
#include "dytopo/prompts.hpp"
#include "test_support.hpp"

using namespace dytopo;
using namespace dytopo::agent;
using dytopo::testing::code_of;
using nlohmann::ordered_json;

namespace {

// Replays fixed strings and remembers the contexts it was given.
class CannedPolicy final : public Policy {
  public:
    explicit CannedPolicy(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    std::string step(const std::string& context, RoundIndex) override {
        contexts.push_back(context);
        const std::string r = replies_[std::min(next_, replies_.size() - 1)];
        ++next_;
        return r;
    }
    std::vector<std::string> contexts;

  private:
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
};

class ThrowingPolicy final : public Policy {
  public:
    std::string step(const std::string&, RoundIndex) override { throw std::runtime_error("endpoint gone"); }
};

const AgentProfile kDev{0, "Developer", "writes code", AgentKind::kScripted};

}  // namespace

TEST_CASE("scripted record passes through unchanged") {
    ordered_json rec = {{"public_content", "def f(): pass"},
                        {"private_content", "ping"},
                        {"q_vector", "need tests"},
                        {"k_vector", "offer code"}};
    ScriptedPolicy p(ordered_json::array({rec}));
    const auto r = run_agent_round(kDev, "ctx", p, 0);
    CHECK_FALSE(r.used_fallback);
    CHECK(r.invocations == 1);
    CHECK(r.output.public_message().content == "def f(): pass");
    CHECK(r.output.private_message().content == "ping");
    CHECK(r.output.query_descriptor().text() == "need tests");
    CHECK(r.output.key_descriptor().text() == "offer code");
    CHECK(ordered_json::parse(serialize_round_output(r.output)) == rec);
}

TEST_CASE("scripted policy forms") {
    SUBCASE("keyed rounds, default and round substitution") {
        ScriptedPolicy p(ordered_json{{"rounds", {{"1", "one"}}}, {"default", "round {round}"}});
        CHECK(p.step("", 1) == "one");
        CHECK(p.step("", 4) == "round 4");
        CHECK(p.invocations() == 2);
    }
    SUBCASE("exhausted script") {
        ScriptedPolicy p(ordered_json::array({"a"}));
        CHECK(code_of([&] { p.step("", 1); }) == ErrorCode::kScriptExhausted);
    }
    SUBCASE("bad script shape") {
        CHECK(code_of([] { ScriptedPolicy(ordered_json(3)); }) == ErrorCode::kInvalidConfig);
    }
}

TEST_CASE("missing key descriptor falls back to a public excerpt") {
    const std::string body(300, 'x');
    ordered_json rec = {{"public_content", body}, {"private_content", "secret"}, {"q_vector", "need"}};
    CannedPolicy p({rec.dump()});
    const auto r = run_agent_round(kDev, "ctx", p, 0, {.parse_retries = 2});
    CHECK(r.used_fallback);
    CHECK(r.invocations == 3);
    CHECK(r.output.key_descriptor().text() == "I provide: " + std::string(200, 'x'));
    CHECK(r.output.query_descriptor().text() == "need");
    CHECK(r.output.private_message().content.empty());
}

TEST_CASE("excerpt does not split a UTF-8 sequence") {
    std::string body(199, 'a');
    body += "\xC3\xA9tail";
    ParsedResponse parsed;
    parsed.public_content = body;
    const auto out = output_with_fallback(0, 0, parsed);
    CHECK(out.key_descriptor().text() == "I provide: " + std::string(199, 'a'));
}

TEST_CASE("q_desc and k_desc spellings are accepted") {
    const auto r = parse_agent_response(R"({"public_content":"p","q_desc":"a","k_desc":"b"})", false);
    CHECK(r.query == "a");
    CHECK(r.key == "b");
}

TEST_CASE("parser errors") {
    CHECK(code_of([] { parse_agent_response("no braces here", false); }) == ErrorCode::kNoStructuredObject);
    CHECK(code_of([] { parse_agent_response("[1, 2]", false); }) == ErrorCode::kNoStructuredObject);
    CHECK(code_of([] { parse_agent_response(R"({"q_vector":"a","k_vector":"b"})", false); }) ==
          ErrorCode::kMissingField);
    CHECK(code_of([] { parse_agent_response(R"({"public_content":"p","q_vector":" ","k_vector":"b"})", false); }) ==
          ErrorCode::kMissingField);
    CHECK(code_of([] { parse_agent_response(R"({"public_content":3,"q_vector":"a","k_vector":"b"})", false); }) ==
          ErrorCode::kTypeMismatch);
    CHECK(code_of([] { parse_agent_response(R"({"is_complete":"maybe","next_goal":""})", true); }) ==
          ErrorCode::kTypeMismatch);
    CHECK(code_of([] { parse_agent_response(R"({"is_complete":true})", true); }) == ErrorCode::kMissingField);
}

TEST_CASE("parser agrees with the standalone JSON oracle") {
    const auto fx = testing::read_json(testing::data_dir() / "fixtures" / "responses.json");
    for (const auto& [name, c] : fx.items()) {
        CAPTURE(name);
        const auto r = parse_agent_response_lenient(c["raw"].get<std::string>());
        CHECK(r.public_content == c["public_content"].get<std::string>());
        CHECK(r.private_content == c["private_content"].get<std::string>());
        REQUIRE(r.private_directives.size() == c["directives"].size());
        for (std::size_t i = 0; i < r.private_directives.size(); ++i) {
            CHECK(r.private_directives[i].target == c["directives"][i][0].get<std::string>());
            CHECK(r.private_directives[i].instruction == c["directives"][i][1].get<std::string>());
        }
        CHECK(r.query == c["query"].get<std::string>());
        CHECK(r.key == c["key"].get<std::string>());
        if (c["answer"].is_null()) {
            CHECK_FALSE(r.answer.has_value());
        } else {
            CHECK(r.answer == c["answer"].get<std::string>());
        }
    }
}

TEST_CASE("manager fields parse from string booleans") {
    const auto r = parse_agent_response(R"({"is_complete":"True","next_goal":""})", true);
    CHECK(r.is_complete == true);
    CHECK(r.next_goal == "");
}

TEST_CASE("parse, serialize, parse is idempotent") {
    const auto fx = testing::read_json(testing::data_dir() / "fixtures" / "responses.json");
    for (const auto& [name, c] : fx.items()) {
        if (name == "manager") continue;
        CAPTURE(name);
        const auto first = output_with_fallback(0, 0, parse_agent_response(c["raw"].get<std::string>(), false));
        const auto second = output_with_fallback(0, 0, parse_agent_response(serialize_round_output(first), false));
        CHECK(first == second);
    }
}

TEST_CASE("unparseable output is retried with the corrective suffix") {
    CannedPolicy p({"garbage", R"({"public_content":"p","q_vector":"q","k_vector":"k"})"});
    const auto r = run_agent_round(kDev, "ctx", p, 0);
    CHECK_FALSE(r.used_fallback);
    CHECK(r.invocations == 2);
    CHECK(r.parse_retries == 1);
    REQUIRE(p.contexts.size() == 2);
    CHECK(p.contexts[0] == "ctx");
    CHECK(p.contexts[1] == "ctx" + std::string(kCorrectiveSuffix));
}

TEST_CASE("prose-only output falls back to both descriptors") {
    CannedPolicy p({"  just prose  "});
    const auto r = run_agent_round(kDev, "ctx", p, 0, {.parse_retries = 0});
    CHECK(r.used_fallback);
    CHECK(r.output.public_message().content == "just prose");
    CHECK(r.output.query_descriptor().text() == "I need: just prose");
    CHECK(r.output.key_descriptor().text() == "I provide: just prose");
}

TEST_CASE("fallback disabled surfaces UnparseableOutput") {
    CannedPolicy p({"garbage"});
    CHECK(code_of([&] { run_agent_round(kDev, "ctx", p, 0, {.parse_retries = 1, .fallback_enabled = false}); }) ==
          ErrorCode::kUnparseableOutput);
}

TEST_CASE("policy exceptions become PolicyFailure") {
    ThrowingPolicy p;
    CHECK(code_of([&] { run_agent_round(kDev, "ctx", p, 0); }) == ErrorCode::kPolicyFailure);
}

TEST_CASE("role prompts carry the format marker") {
    for (auto domain : {Domain::kCodeGeneration, Domain::kMathReasoning}) {
        const auto roster = default_roster(domain);
        const auto set = build_role_prompts(domain, roster, "Boss");
        REQUIRE(set.worker_templates.size() == roster.size());
        for (std::size_t i = 0; i < roster.size(); ++i) {
            CHECK(set.worker_templates[i].find(kFormatMarker) != std::string::npos);
            CHECK(set.worker_templates[i].find(roster[i].name) != std::string::npos);
            CHECK(set.worker_templates[i].find('{' + std::string("name}")) == std::string::npos);
        }
        CHECK(set.manager_template.find(kFormatMarker) != std::string::npos);
        CHECK(set.manager_template.rfind("You are Boss,", 0) == 0);
    }
    CHECK(default_roster(Domain::kCodeGeneration).size() == 4);
    CHECK(default_roster(Domain::kMathReasoning).size() == 3);
    CHECK(producer_role(Domain::kMathReasoning) == "Solver");
}

TEST_CASE("unknown domain") {
    CHECK(code_of([] { build_role_prompts("chemistry", {}); }) == ErrorCode::kUnknownDomain);
    CHECK(parse_domain(to_string(Domain::kMathReasoning)) == Domain::kMathReasoning);
}

TEST_CASE("llm policy records usage under its key") {
    auto transport = std::make_shared<testing::MockTransport>();
    transport->push({200, testing::chat_body(R"({"public_content":"p","q_vector":"q","k_vector":"k"})", 11, 7)});
    llm::ChatClient client(testing::test_endpoint(), transport, [](std::chrono::milliseconds) {});
    llm::UsageLedger ledger;
    LlmPolicy p(client, "system", {}, ledger, 2);
    const auto r = run_agent_round(kDev, "ctx", p, 0);
    CHECK(r.output.public_message().content == "p");
    const auto usage = ledger.per_agent().at(2);
    CHECK(usage.prompt_tokens == 11);
    CHECK(usage.completion_tokens == 7);
    CHECK(usage.request_count == 1);
}

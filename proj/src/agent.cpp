// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "dytopo/agent.hpp"

#include <algorithm>
#include <cctype>

#include "dytopo/error.hpp"

namespace dytopo::agent {

using nlohmann::ordered_json;

namespace {

void substitute_round(ordered_json& node, const std::string& round) {
    if (node.is_string()) {
        std::string s = node.get<std::string>();
        const std::string needle = "{round}";
        for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + round.size()))
            s.replace(pos, needle.size(), round);
        node = s;
    } else if (node.is_structured()) {
        for (auto& child : node) substitute_round(child, round);
    }
}

// Closing brace matching the '{' at start, or npos.
std::size_t match_brace(std::string_view text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::string_view::npos;
}

const ordered_json* find_field(const ordered_json& obj, std::initializer_list<const char*> names,
                               std::string& found_name) {
    for (const char* name : names) {
        const auto it = obj.find(name);
        if (it != obj.end() && !it->is_null()) {
            found_name = name;
            return &*it;
        }
    }
    return nullptr;
}

std::optional<std::string> string_field(const ordered_json& obj, std::initializer_list<const char*> names) {
    std::string name;
    const ordered_json* v = find_field(obj, names, name);
    if (v == nullptr) return std::nullopt;
    if (!v->is_string()) throw Error(ErrorCode::kTypeMismatch, name);
    return v->get<std::string>();
}

std::string excerpt(std::string_view text) {
    std::size_t cut = std::min(text.size(), kFallbackExcerptChars);
    // Do not split a UTF-8 sequence.
    while (cut > 0 && cut < text.size() && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return std::string(text.substr(0, cut));
}

ParsedResponse extract_fields(const ordered_json& obj) {
    ParsedResponse r;
    if (auto v = string_field(obj, {"public_content"})) r.public_content = *v;

    if (const auto it = obj.find("private_content"); it != obj.end() && !it->is_null()) {
        if (it->is_string()) {
            r.private_content = it->get<std::string>();
        } else if (it->is_object()) {
            for (const auto& [target, instruction] : it->items()) {
                r.private_directives.push_back(
                    {target, instruction.is_string() ? instruction.get<std::string>() : instruction.dump()});
            }
        } else {
            throw Error(ErrorCode::kTypeMismatch, "private_content");
        }
    }

    r.query = string_field(obj, {"q_vector", "q_desc"});
    r.key = string_field(obj, {"k_vector", "k_desc"});

    if (const auto it = obj.find("answer"); it != obj.end() && !it->is_null()) {
        if (it->is_string()) {
            r.answer = it->get<std::string>();
        } else if (it->is_number()) {
            r.answer = it->dump();
        } else {
            throw Error(ErrorCode::kTypeMismatch, "answer");
        }
    }

    if (const auto it = obj.find("is_complete"); it != obj.end() && !it->is_null()) {
        if (it->is_boolean()) {
            r.is_complete = it->get<bool>();
        } else if (it->is_string()) {
            std::string s = it->get<std::string>();
            std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
            if (s == "true") {
                r.is_complete = true;
            } else if (s == "false") {
                r.is_complete = false;
            } else {
                throw Error(ErrorCode::kTypeMismatch, "is_complete");
            }
        } else {
            throw Error(ErrorCode::kTypeMismatch, "is_complete");
        }
    }
    r.next_goal = string_field(obj, {"next_goal"});
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------

ScriptedPolicy::ScriptedPolicy(ordered_json script) {
    if (script.is_array()) {
        for (std::size_t i = 0; i < script.size(); ++i) rounds_[static_cast<RoundIndex>(i)] = script[i];
        return;
    }
    if (!script.is_object()) throw Error(ErrorCode::kInvalidConfig, "script");
    if (const auto it = script.find("rounds"); it != script.end()) {
        if (it->is_array()) {
            for (std::size_t i = 0; i < it->size(); ++i) rounds_[static_cast<RoundIndex>(i)] = (*it)[i];
        } else if (it->is_object()) {
            for (const auto& [key, record] : it->items()) {
                try {
                    rounds_[static_cast<RoundIndex>(std::stoul(key))] = record;
                } catch (const std::exception&) {
                    throw Error(ErrorCode::kInvalidConfig, "script round key '" + key + "'");
                }
            }
        } else {
            throw Error(ErrorCode::kInvalidConfig, "script.rounds");
        }
    }
    if (const auto it = script.find("default"); it != script.end()) default_ = *it;
}

std::string ScriptedPolicy::step(const std::string& /*context*/, RoundIndex round) {
    ++invocations_;
    ordered_json record;
    if (const auto it = rounds_.find(round); it != rounds_.end()) {
        record = it->second;
    } else if (default_) {
        record = *default_;
    } else {
        throw Error(ErrorCode::kScriptExhausted, "no record for round " + std::to_string(round));
    }
    substitute_round(record, std::to_string(round));
    return record.is_string() ? record.get<std::string>() : record.dump();
}

LlmPolicy::LlmPolicy(llm::ChatClient& client, std::string system_prompt, GenerationConfig generation,
                     llm::UsageLedger& ledger, AgentId usage_key)
    : client_(client),
      system_prompt_(std::move(system_prompt)),
      generation_(generation),
      ledger_(ledger),
      usage_key_(usage_key) {}

std::string LlmPolicy::step(const std::string& context, RoundIndex /*round*/) {
    llm::ChatRequest req;
    req.system_prompt = system_prompt_;
    req.user_content = context;
    req.temperature = generation_.temperature;
    req.max_tokens = generation_.max_tokens;
    req.structured_output = generation_.structured_output;
    llm::ChatResult res = client_.chat_complete(req);
    ledger_.record(usage_key_, res.usage);
    return std::move(res.text);
}

// ---------------------------------------------------------------------------

ordered_json extract_structured_object(std::string_view raw) {
    for (std::size_t start = raw.find('{'); start != std::string_view::npos; start = raw.find('{', start + 1)) {
        const std::size_t end = match_brace(raw, start);
        if (end == std::string_view::npos) continue;
        ordered_json doc = ordered_json::parse(raw.substr(start, end - start + 1), nullptr,
                                               /*allow_exceptions=*/false, /*ignore_comments=*/true);
        if (doc.is_object()) return doc;
    }
    throw Error(ErrorCode::kNoStructuredObject, "no JSON object in response");
}

ParsedResponse parse_agent_response_lenient(std::string_view raw) {
    return extract_fields(extract_structured_object(raw));
}

ParsedResponse parse_agent_response(std::string_view raw, bool expect_manager_fields) {
    const ordered_json obj = extract_structured_object(raw);
    ParsedResponse r = extract_fields(obj);
    if (expect_manager_fields) {
        if (!r.is_complete) throw Error(ErrorCode::kMissingField, "is_complete");
        if (!r.next_goal) throw Error(ErrorCode::kMissingField, "next_goal");
        return r;
    }
    if (!obj.contains("public_content") || obj.at("public_content").is_null())
        throw Error(ErrorCode::kMissingField, "public_content");
    if (!r.query || trim(*r.query).empty()) throw Error(ErrorCode::kMissingField, "q_vector");
    if (!r.key || trim(*r.key).empty()) throw Error(ErrorCode::kMissingField, "k_vector");
    return r;
}

std::string serialize_round_output(const RoundOutput& out) {
    ordered_json doc;
    doc["public_content"] = out.public_message().content;
    if (!out.private_directives().empty()) {
        ordered_json directives = ordered_json::object();
        for (const auto& d : out.private_directives()) directives[d.target] = d.instruction;
        doc["private_content"] = std::move(directives);
    } else {
        doc["private_content"] = out.private_message().content;
    }
    doc["q_vector"] = out.query_descriptor().text();
    doc["k_vector"] = out.key_descriptor().text();
    if (out.answer()) doc["answer"] = *out.answer();
    if (out.is_complete()) doc["is_complete"] = *out.is_complete();
    if (out.next_goal()) doc["next_goal"] = *out.next_goal();
    return doc.dump();
}

RoundOutput output_with_fallback(AgentId author, RoundIndex round, ParsedResponse parsed) {
    RoundOutputFields f;
    f.author = author;
    f.round = round;
    if (!parsed.query || trim(*parsed.query).empty()) parsed.query = "I need: " + excerpt(parsed.public_content);
    if (!parsed.key || trim(*parsed.key).empty()) parsed.key = "I provide: " + excerpt(parsed.public_content);
    f.public_content = std::move(parsed.public_content);
    f.private_content = std::move(parsed.private_content);
    f.private_directives = std::move(parsed.private_directives);
    f.query = std::move(*parsed.query);
    f.key = std::move(*parsed.key);
    f.answer = std::move(parsed.answer);
    if (author == kManagerId) {
        f.is_complete = parsed.is_complete;
        f.next_goal = std::move(parsed.next_goal);
    }
    return RoundOutput(std::move(f));
}

AgentRoundResult run_agent_round(const AgentProfile& profile, const std::string& context, Policy& policy,
                                 RoundIndex round, const RoundOptions& options) {
    std::size_t invocations = 0;
    std::string raw;
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= options.parse_retries; ++attempt) {
        try {
            ++invocations;
            raw = policy.step(attempt == 0 ? context : context + std::string(kCorrectiveSuffix), round);
        } catch (const std::exception& e) {
            throw Error(ErrorCode::kPolicyFailure, profile.name + ": " + e.what());
        }
        try {
            ParsedResponse parsed = parse_agent_response(raw, options.expect_manager_fields);
            return {output_with_fallback(profile.id, round, std::move(parsed)), invocations, attempt, false};
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    if (!options.fallback_enabled)
        throw Error(ErrorCode::kUnparseableOutput, profile.name + ": " + last_error);

    ParsedResponse parsed;
    try {
        parsed = parse_agent_response_lenient(raw);
    } catch (const Error&) {
        parsed = ParsedResponse{};
        parsed.public_content = std::string(trim(raw));
    }
    parsed.private_content.clear();
    parsed.private_directives.clear();
    return {output_with_fallback(profile.id, round, std::move(parsed)), invocations, options.parse_retries,
            true};
}

}  // namespace dytopo::agent

// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "dytopo/trace.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dytopo/error.hpp"
#include "dytopo/topology.hpp"

namespace dytopo::trace {

using nlohmann::ordered_json;

void CoordinationTrace::record_round(RoundRecord record) {
    if (record.round != rounds_.size())
        throw Error(ErrorCode::kRoundGap,
                    "expected round " + std::to_string(rounds_.size()) + ", got " + std::to_string(record.round));
    rounds_.push_back(std::move(record));
}

const RoundRecord& CoordinationTrace::round(RoundIndex t) const {
    if (t >= rounds_.size()) throw Error(ErrorCode::kUnknownRound, std::to_string(t));
    return rounds_[t];
}

// ---------------------------------------------------------------------------
// JSON encoding

namespace {

template <typename T>
ordered_json opt(const std::optional<T>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const ordered_json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

ordered_json encode(const RoutingConfig& c) {
    return {{"tau_edge", c.tau_edge},
            {"k_in_max", c.k_in_max},
            {"t_max", c.t_max},
            {"halting_enabled", c.halting_enabled},
            {"topology_mode", std::string(to_string(c.topology_mode))},
            {"random_seed", c.random_seed}};
}

RoutingConfig decode_config(const ordered_json& j) {
    RoutingConfig c;
    c.tau_edge = j.at("tau_edge").get<double>();
    c.k_in_max = j.at("k_in_max").get<std::size_t>();
    c.t_max = j.at("t_max").get<std::size_t>();
    c.halting_enabled = j.at("halting_enabled").get<bool>();
    c.topology_mode = parse_topology_mode(j.at("topology_mode").get<std::string>());
    c.random_seed = j.at("random_seed").get<std::uint64_t>();
    return c;
}

ordered_json encode(const AgentProfile& p) {
    return {{"id", p.id}, {"name", p.name}, {"role_description", p.role_description},
            {"kind", std::string(to_string(p.kind))}};
}

AgentProfile decode_profile(const ordered_json& j) {
    return {j.at("id").get<AgentId>(), j.at("name").get<std::string>(),
            j.at("role_description").get<std::string>(), parse_agent_kind(j.at("kind").get<std::string>())};
}

ordered_json encode(const RoundOutput& o) {
    ordered_json directives = ordered_json::array();
    for (const auto& d : o.private_directives())
        directives.push_back({{"target", d.target}, {"instruction", d.instruction}});
    ordered_json j = {{"author", o.author()},
                      {"round", o.round()},
                      {"public_content", o.public_message().content},
                      {"private_content", o.private_message().content},
                      {"private_directives", std::move(directives)},
                      {"query", o.query_descriptor().text()},
                      {"key", o.key_descriptor().text()}};
    if (o.answer()) j["answer"] = *o.answer();
    if (o.is_complete()) j["is_complete"] = *o.is_complete();
    if (o.next_goal()) j["next_goal"] = *o.next_goal();
    return j;
}

RoundOutput decode_output(const ordered_json& j) {
    RoundOutputFields f;
    f.author = j.at("author").get<AgentId>();
    f.round = j.at("round").get<RoundIndex>();
    f.public_content = j.at("public_content").get<std::string>();
    f.private_content = j.at("private_content").get<std::string>();
    for (const auto& d : j.at("private_directives"))
        f.private_directives.push_back({d.at("target").get<std::string>(), d.at("instruction").get<std::string>()});
    f.query = j.at("query").get<std::string>();
    f.key = j.at("key").get<std::string>();
    f.answer = get_opt<std::string>(j, "answer");
    f.is_complete = get_opt<bool>(j, "is_complete");
    f.next_goal = get_opt<std::string>(j, "next_goal");
    return RoundOutput(std::move(f));
}

ordered_json encode(const TopologySnapshot& s) {
    const std::size_t n = s.relevance.size();
    ordered_json relevance = ordered_json::array();
    ordered_json adjacency = ordered_json::array();
    for (AgentId i = 0; i < n; ++i) {
        ordered_json rel_row = ordered_json::array();
        ordered_json adj_row = ordered_json::array();
        for (AgentId j = 0; j < n; ++j) {
            rel_row.push_back(s.relevance.score(i, j));
            adj_row.push_back(s.adjacency.has_edge(i, j) ? 1 : 0);
        }
        relevance.push_back(std::move(rel_row));
        adjacency.push_back(std::move(adj_row));
    }
    ordered_json edges = ordered_json::array();
    for (const Edge& e : s.edges)
        edges.push_back({{"provider", e.provider}, {"consumer", e.consumer}, {"score", e.score}});
    return {{"round", s.round},
            {"relevance", std::move(relevance)},
            {"adjacency", std::move(adjacency)},
            {"edges", std::move(edges)},
            {"order", s.order},
            {"was_acyclic", opt(s.was_acyclic)}};
}

TopologySnapshot decode_snapshot(const ordered_json& j) {
    TopologySnapshot s;
    s.round = j.at("round").get<RoundIndex>();
    const auto& rel = j.at("relevance");
    const std::size_t n = rel.size();
    std::vector<double> scores;
    scores.reserve(n * n);
    for (const auto& row : rel) {
        if (row.size() != n) throw Error(ErrorCode::kCorruptTrace, "relevance matrix not square");
        for (const auto& v : row) scores.push_back(v.get<double>());
    }
    s.relevance = RelevanceMatrix(n, std::move(scores));
    s.adjacency = Adjacency(n);
    const auto& adj = j.at("adjacency");
    if (adj.size() != n) throw Error(ErrorCode::kCorruptTrace, "adjacency size");
    for (AgentId p = 0; p < n; ++p) {
        if (adj[p].size() != n) throw Error(ErrorCode::kCorruptTrace, "adjacency not square");
        for (AgentId c = 0; c < n; ++c) {
            if (adj[p][c].get<int>() != 0) s.adjacency.add_edge(p, c);
        }
    }
    for (const auto& e : j.at("edges"))
        s.edges.push_back({e.at("provider").get<AgentId>(), e.at("consumer").get<AgentId>(), e.at("score").get<double>()});
    s.order = j.at("order").get<AggregationOrder>();
    s.was_acyclic = get_opt<bool>(j, "was_acyclic");
    return s;
}

ordered_json encode(const llm::UsageCounters& u) {
    return {{"prompt_tokens", u.prompt_tokens},
            {"completion_tokens", u.completion_tokens},
            {"request_count", u.request_count},
            {"wall_time_ms", u.wall_time_ms},
            {"estimated", u.estimated}};
}

llm::UsageCounters decode_usage(const ordered_json& j) {
    llm::UsageCounters u;
    u.prompt_tokens = j.at("prompt_tokens").get<std::uint64_t>();
    u.completion_tokens = j.at("completion_tokens").get<std::uint64_t>();
    u.request_count = j.at("request_count").get<std::uint64_t>();
    u.wall_time_ms = j.at("wall_time_ms").get<std::uint64_t>();
    u.estimated = j.at("estimated").get<bool>();
    return u;
}

ordered_json encode(const AgentCallStats& c) {
    return {{"agent", c.agent},
            {"invocations", c.invocations},
            {"parse_retries", c.parse_retries},
            {"used_fallback", c.used_fallback}};
}

AgentCallStats decode_calls(const ordered_json& j) {
    return {j.at("agent").get<AgentId>(), j.at("invocations").get<std::size_t>(),
            j.at("parse_retries").get<std::size_t>(), j.at("used_fallback").get<bool>()};
}

ordered_json encode(const HaltDecision& d) {
    return {{"halt", d.halt()}, {"next_goal", d.next_goal()}, {"final_answer", opt(d.final_answer())}};
}

HaltDecision decode_decision(const ordered_json& j) {
    if (j.at("halt").get<bool>()) return HaltDecision::stop(get_opt<std::string>(j, "final_answer"));
    return HaltDecision::proceed(j.at("next_goal").get<std::string>());
}

ordered_json encode(const RoundRecord& r) {
    ordered_json outputs = ordered_json::array();
    for (const auto& o : r.outputs) outputs.push_back(encode(o));
    ordered_json calls = ordered_json::array();
    for (const auto& c : r.calls) calls.push_back(encode(c));
    ordered_json deliveries = ordered_json::array();
    for (const auto& d : r.deliveries)
        deliveries.push_back(
            {{"provider", d.provider}, {"consumer", d.consumer}, {"score", d.score}, {"content", d.content}});
    ordered_json digest = ordered_json::array();
    for (const auto& [agent, content] : r.global_state.public_digest)
        digest.push_back({{"agent", agent}, {"content", content}});
    ordered_json usage = ordered_json::array();
    for (const auto& u : r.usage) usage.push_back({{"agent", u.agent}, {"usage", encode(u.usage)}});

    return {{"round", r.round},
            {"context",
             {{"round", r.context.round}, {"goal", r.context.goal_text}, {"task", r.context.original_task}}},
            {"outputs", std::move(outputs)},
            {"calls", std::move(calls)},
            {"topology", encode(r.topology)},
            {"deliveries", std::move(deliveries)},
            {"global_state",
             {{"round", r.global_state.round}, {"goal", r.global_state.goal_text}, {"digest", std::move(digest)}}},
            {"manager_output", r.manager_output ? encode(*r.manager_output) : ordered_json(nullptr)},
            {"manager_call", encode(r.manager_call)},
            {"decision", r.decision ? encode(*r.decision) : ordered_json(nullptr)},
            {"usage", std::move(usage)}};
}

RoundRecord decode_round(const ordered_json& j) {
    RoundRecord r;
    r.round = j.at("round").get<RoundIndex>();
    const auto& ctx = j.at("context");
    r.context = {ctx.at("round").get<RoundIndex>(), ctx.at("goal").get<std::string>(),
                 ctx.at("task").get<std::string>()};
    for (const auto& o : j.at("outputs")) r.outputs.push_back(decode_output(o));
    for (const auto& c : j.at("calls")) r.calls.push_back(decode_calls(c));
    r.topology = decode_snapshot(j.at("topology"));
    for (const auto& d : j.at("deliveries"))
        r.deliveries.push_back({d.at("provider").get<AgentId>(), d.at("consumer").get<AgentId>(),
                                d.at("score").get<double>(), d.at("content").get<std::string>()});
    const auto& gs = j.at("global_state");
    r.global_state.round = gs.at("round").get<RoundIndex>();
    r.global_state.goal_text = gs.at("goal").get<std::string>();
    for (const auto& e : gs.at("digest"))
        r.global_state.public_digest.emplace_back(e.at("agent").get<AgentId>(), e.at("content").get<std::string>());
    if (!j.at("manager_output").is_null()) r.manager_output = decode_output(j.at("manager_output"));
    r.manager_call = decode_calls(j.at("manager_call"));
    if (!j.at("decision").is_null()) r.decision = decode_decision(j.at("decision"));
    for (const auto& u : j.at("usage")) r.usage.push_back({u.at("agent").get<AgentId>(), decode_usage(u.at("usage"))});
    return r;
}

}  // namespace

std::string to_json_text(const CoordinationTrace& trace) {
    const RunMetadata& m = trace.metadata;
    ordered_json profiles = ordered_json::array();
    for (const auto& p : m.profiles) profiles.push_back(encode(p));
    ordered_json overrides = ordered_json::object();
    for (const auto& [k, v] : m.overrides) overrides[k] = v;

    ordered_json rounds = ordered_json::array();
    for (const auto& r : trace.rounds()) rounds.push_back(encode(r));

    ordered_json result = nullptr;
    if (trace.result) {
        result = {{"rounds_executed", trace.result->rounds_executed},
                  {"halted_by_manager", trace.result->halted_by_manager},
                  {"final_answer", opt(trace.result->final_answer)}};
    }
    ordered_json failure = nullptr;
    if (trace.failure) {
        failure = {{"round", trace.failure->round},
                   {"code", trace.failure->code},
                   {"message", trace.failure->message}};
    }

    const ordered_json doc = {
        {"format", kFormatVersion},
        {"metadata",
         {{"domain", m.domain},
          {"task", m.task},
          {"config", encode(m.config)},
          {"profiles", std::move(profiles)},
          {"manager_name", m.manager_name},
          {"embedder", m.embedder},
          {"include_history", m.include_history},
          {"overrides", std::move(overrides)},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at}}},
        {"rounds", std::move(rounds)},
        {"result", std::move(result)},
        {"failure", std::move(failure)},
    };
    return doc.dump(2) + "\n";
}

CoordinationTrace from_json_text(std::string_view text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(text);
    } catch (const ordered_json::exception& e) {
        throw Error(ErrorCode::kCorruptTrace, e.what());
    }
    if (!doc.is_object() || !doc.contains("format") || !doc.at("format").is_string())
        throw Error(ErrorCode::kCorruptTrace, "missing format field");
    if (doc.at("format").get<std::string>() != kFormatVersion)
        throw Error(ErrorCode::kVersionMismatch, doc.at("format").get<std::string>());

    try {
        CoordinationTrace trace;
        const auto& m = doc.at("metadata");
        trace.metadata.domain = m.at("domain").get<std::string>();
        trace.metadata.task = m.at("task").get<std::string>();
        trace.metadata.config = decode_config(m.at("config"));
        for (const auto& p : m.at("profiles")) trace.metadata.profiles.push_back(decode_profile(p));
        trace.metadata.manager_name = m.at("manager_name").get<std::string>();
        trace.metadata.embedder = m.at("embedder").get<std::string>();
        trace.metadata.include_history = m.at("include_history").get<bool>();
        for (const auto& [k, v] : m.at("overrides").items()) trace.metadata.overrides[k] = v.get<std::string>();
        trace.metadata.started_at = m.at("started_at").get<std::string>();
        trace.metadata.finished_at = m.at("finished_at").get<std::string>();

        for (const auto& r : doc.at("rounds")) trace.record_round(decode_round(r));

        if (const auto& res = doc.at("result"); !res.is_null()) {
            trace.result = RunSummary{res.at("rounds_executed").get<std::size_t>(),
                                      res.at("halted_by_manager").get<bool>(),
                                      get_opt<std::string>(res, "final_answer")};
        }
        if (const auto& f = doc.at("failure"); !f.is_null()) {
            trace.failure = TraceFailure{f.at("round").get<RoundIndex>(), f.at("code").get<std::string>(),
                                         f.at("message").get<std::string>()};
        }
        return trace;
    } catch (const ordered_json::exception& e) {
        throw Error(ErrorCode::kCorruptTrace, e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::kCorruptTrace) throw;
        throw Error(ErrorCode::kCorruptTrace, e.what());
    }
}

void export_trace(const CoordinationTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
    out << to_json_text(trace);
    if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

CoordinationTrace import_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

std::string strip_timestamps(std::string_view trace_json) {
    ordered_json doc = ordered_json::parse(trace_json);
    if (doc.contains("metadata")) {
        doc["metadata"]["started_at"] = "";
        doc["metadata"]["finished_at"] = "";
    }
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Graph export

namespace {

std::string two_decimals(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
    std::string out(buf, res.ptr);
    if (out == "-0.00") out = "0.00";
    return out;
}

std::string fixed(double v, int precision) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    return std::string(buf, res.ptr);
}

std::string escape_dot(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

std::string escape_mermaid(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '"') {
            out += "#quot;";
        } else if (c == '\n') {
            out += ' ';
        } else {
            out += c;
        }
    }
    return out;
}

std::string agent_name(const RunMetadata& m, AgentId id) {
    for (const auto& p : m.profiles)
        if (p.id == id) return p.name;
    return "agent" + std::to_string(id);
}

}  // namespace

GraphStyle parse_graph_style(std::string_view name) {
    if (name == "dot") return GraphStyle::kDot;
    if (name == "mermaid") return GraphStyle::kMermaid;
    throw Error(ErrorCode::kInvalidValue, "graph style '" + std::string(name) + "'");
}

std::string export_round_graph(const CoordinationTrace& trace, RoundIndex round, GraphStyle style) {
    const RoundRecord& r = trace.round(round);
    const std::size_t n = r.topology.relevance.size();
    std::vector<std::size_t> position(n, 0);
    for (std::size_t k = 0; k < r.topology.order.size(); ++k)
        if (r.topology.order[k] < n) position[r.topology.order[k]] = k + 1;

    std::ostringstream out;
    if (style == GraphStyle::kDot) {
        out << "digraph round_" << round << " {\n";
        out << "  rankdir=LR;\n";
        out << "  label=\"round " << round << "\";\n";
        for (AgentId i = 0; i < n; ++i) {
            out << "  n" << i << " [label=\"" << escape_dot(agent_name(trace.metadata, i)) << "\", xlabel=\"pos "
                << position[i] << "\"];\n";
        }
        for (const Edge& e : r.topology.edges)
            out << "  n" << e.provider << " -> n" << e.consumer << " [label=\"" << two_decimals(e.score) << "\"];\n";
        out << "}\n";
    } else {
        out << "flowchart LR\n";
        for (AgentId i = 0; i < n; ++i)
            out << "  n" << i << "[\"" << escape_mermaid(agent_name(trace.metadata, i)) << " (pos " << position[i]
                << ")\"]\n";
        for (const Edge& e : r.topology.edges)
            out << "  n" << e.provider << " -->|" << two_decimals(e.score) << "| n" << e.consumer << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Metrics

double RunMetrics::mean_edge_count() const {
    if (edge_counts.empty()) return 0.0;
    double sum = 0.0;
    for (auto c : edge_counts) sum += static_cast<double>(c);
    return sum / static_cast<double>(edge_counts.size());
}

double RunMetrics::mean_sparsity() const {
    if (sparsity.empty()) return 0.0;
    double sum = 0.0;
    for (double s : sparsity) sum += s;
    return sum / static_cast<double>(sparsity.size());
}

RunMetrics compute_metrics(const CoordinationTrace& trace) {
    if (trace.size() == 0) throw Error(ErrorCode::kEmptyTrace, "trace has no rounds");
    RunMetrics m;
    m.agents = trace.metadata.profiles.size();
    m.rounds_executed = trace.size();
    const double possible = m.agents < 2 ? 0.0 : static_cast<double>(m.agents * (m.agents - 1));
    std::size_t cyclic = 0;
    for (const auto& r : trace.rounds()) {
        const std::size_t edges = r.topology.edges.size();
        m.edge_counts.push_back(edges);
        m.sparsity.push_back(possible == 0.0 ? 0.0 : static_cast<double>(edges) / possible);
        m.deliveries.push_back(r.deliveries.size());
        if (r.topology.was_acyclic && !*r.topology.was_acyclic) ++cyclic;
        for (const auto& u : r.usage) {
            m.usage_per_agent[u.agent] += u.usage;
            m.usage_total += u.usage;
        }
    }
    m.cycle_rate = static_cast<double>(cyclic) / static_cast<double>(m.rounds_executed);
    return m;
}

std::string metrics_table(const CoordinationTrace& trace, char delimiter) {
    const RunMetrics m = compute_metrics(trace);
    std::ostringstream out;
    const char d = delimiter;
    out << "round" << d << "edges" << d << "sparsity" << d << "acyclic" << d << "deliveries" << d << "prompt_tokens"
        << d << "completion_tokens" << d << "requests\n";
    for (std::size_t t = 0; t < m.rounds_executed; ++t) {
        const RoundRecord& r = trace.rounds()[t];
        llm::UsageCounters u;
        for (const auto& rec : r.usage) u += rec.usage;
        const auto& acyclic = r.topology.was_acyclic;
        out << t << d << m.edge_counts[t] << d << fixed(m.sparsity[t], 6) << d
            << (acyclic ? (*acyclic ? "true" : "false") : "") << d << m.deliveries[t] << d << u.prompt_tokens << d
            << u.completion_tokens << d << u.request_count << "\n";
    }
    out << "total" << d << fixed(m.mean_edge_count(), 6) << d << fixed(m.mean_sparsity(), 6) << d << fixed(m.cycle_rate, 6)
        << d;
    std::size_t deliveries = 0;
    for (auto c : m.deliveries) deliveries += c;
    out << deliveries << d << m.usage_total.prompt_tokens << d << m.usage_total.completion_tokens << d
        << m.usage_total.request_count << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Replay

namespace {

std::string describe_difference(const TopologySnapshot& recorded, const TopologySnapshot& recomputed) {
    if (!(recorded.relevance == recomputed.relevance)) return "relevance matrix differs";
    if (!(recorded.adjacency == recomputed.adjacency)) return "adjacency differs";
    if (recorded.edges != recomputed.edges) return "edge list differs";
    if (recorded.order != recomputed.order) return "aggregation order differs";
    if (recorded.was_acyclic != recomputed.was_acyclic) return "acyclicity flag differs";
    return {};
}

}  // namespace

std::vector<ReplayMismatch> replay_topologies(const CoordinationTrace& trace, semantic::Embedder& embedder) {
    std::vector<ReplayMismatch> mismatches;
    for (const auto& r : trace.rounds()) {
        const auto emb = semantic::embed_descriptors(r.outputs, embedder);
        const RelevanceMatrix rel = semantic::relevance_matrix(emb.queries, emb.keys);
        const TopologySnapshot snap = topology::induce_topology(rel, trace.metadata.config, r.round);
        if (auto what = describe_difference(r.topology, snap); !what.empty()) mismatches.push_back({r.round, what});
    }
    return mismatches;
}

std::vector<ReplayMismatch> check_threshold_consistency(const CoordinationTrace& trace) {
    std::vector<ReplayMismatch> mismatches;
    const RoutingConfig& c = trace.metadata.config;
    if (c.topology_mode != TopologyMode::kDynamic) return mismatches;
    for (const auto& r : trace.rounds()) {
        const TopologySnapshot snap = topology::build_adjacency(r.topology.relevance, c.tau_edge, c.k_in_max, r.round);
        if (!(snap.adjacency == r.topology.adjacency)) mismatches.push_back({r.round, "adjacency differs"});
    }
    return mismatches;
}

}  // namespace dytopo::trace

// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "dytopo/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "dytopo/error.hpp"
#include "dytopo/semantic.hpp"

namespace dytopo::harness {

using nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
    out << text;
}

ordered_json parse_json(const std::string& text, const std::string& what) {
    try {
        return ordered_json::parse(text);
    } catch (const ordered_json::exception& e) {
        invalid(what + ": " + e.what());
    }
}

template <typename T>
T field(const ordered_json& obj, const char* key, T fallback, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const ordered_json::exception&) {
        invalid(where + "." + key + ": wrong type");
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

AgentSpec parse_agent(const ordered_json& a, std::size_t index, const std::filesystem::path& base) {
    const std::string where = "agents[" + std::to_string(index) + "]";
    if (!a.is_object()) invalid(where + ": expected an object");
    AgentSpec s;
    s.name = field<std::string>(a, "name", "", where);
    if (trim(s.name).empty()) invalid(where + ".name");
    s.role = field<std::string>(a, "role", "", where);

    const std::string kind = field<std::string>(a, "kind", "worker", where);
    if (kind == "manager") {
        s.is_manager = true;
    } else if (kind != "worker") {
        invalid(where + ".kind: '" + kind + "'");
    }
    const std::string policy = field<std::string>(a, "policy", "scripted", where);
    if (policy == "scripted") {
        s.policy = PolicyKind::kScripted;
    } else if (policy == "llm_backed") {
        s.policy = PolicyKind::kLlmBacked;
    } else {
        invalid(where + ".policy: '" + policy + "'");
    }
    s.endpoint = field<std::string>(a, "endpoint", "", where);

    if (s.policy == PolicyKind::kScripted) {
        const auto it = a.find("script");
        if (it == a.end() || it->is_null()) invalid(where + ".script: required for scripted agents");
        if (it->is_string()) {
            s.script = parse_json(read_file(resolve(base, it->get<std::string>())), where + ".script");
        } else {
            s.script = *it;
        }
    } else if (s.endpoint.empty()) {
        invalid(where + ".endpoint: required for llm_backed agents");
    }
    return s;
}

EndpointSpec parse_endpoint(const ordered_json& e, const std::string& name) {
    const std::string where = "endpoints." + name;
    if (!e.is_object()) invalid(where + ": expected an object");
    EndpointSpec s;
    s.config.base_url = field<std::string>(e, "base_url", "", where);
    s.config.model_name = field<std::string>(e, "model", "", where);
    s.config.request_timeout_s = field<double>(e, "timeout_s", s.config.request_timeout_s, where);
    s.config.max_retries = field<int>(e, "max_retries", s.config.max_retries, where);
    s.config.retry_backoff_ms = field<int>(e, "retry_backoff_ms", s.config.retry_backoff_ms, where);
    s.config.max_concurrent = field<std::size_t>(e, "max_concurrent", s.config.max_concurrent, where);
    s.api_key_env = field<std::string>(e, "api_key_env", s.api_key_env, where);
    return s;
}

std::string agent_role(const AgentSpec& a, agent::Domain domain) {
    if (!trim(a.role).empty()) return a.role;
    for (const auto& p : agent::default_roster(domain))
        if (p.name == a.name) return p.role_description;
    return a.role;
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 6);
    return std::string(buf, res.ptr);
}

std::string short_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void report(std::ostream& err, const Error& e) { err << "error: " << e.what() << "\n"; }

SweepRow row_from(const std::string& label, const RunOutcome& outcome) {
    SweepRow row;
    row.label = label;
    if (outcome.error) {
        row.ok = false;
        row.error = outcome.error->what();
    }
    row.rounds_executed = outcome.trace.size();
    if (outcome.trace.size() == 0) return row;
    const trace::RunMetrics m = trace::compute_metrics(outcome.trace);
    row.edge_counts = m.edge_counts;
    row.mean_edges = m.mean_edge_count();
    row.mean_sparsity = m.mean_sparsity();
    for (auto d : m.deliveries) row.deliveries += d;
    row.usage = m.usage_total;
    row.final_answer = outcome.result.final_answer;
    return row;
}

// One run per variant; rows run concurrently when nothing touches the network.
std::vector<SweepRow> run_variants(const std::vector<std::pair<std::string, RunSpec>>& variants,
                                   const Environment& env) {
    std::vector<SweepRow> rows(variants.size());
    const bool parallel = std::all_of(variants.begin(), variants.end(), [](const auto& v) {
        return v.second.all_scripted() && !v.second.embedder.remote;
    });
    const auto count = static_cast<long>(variants.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (long k = 0; k < count; ++k) {
        const auto& [label, spec] = variants[static_cast<std::size_t>(k)];
        RunSpec local = spec;
        local.parallel_agents = local.parallel_agents && !parallel;
        try {
            rows[static_cast<std::size_t>(k)] = row_from(label, execute(local, env));
        } catch (const std::exception& e) {
            SweepRow failed;
            failed.label = label;
            failed.ok = false;
            failed.error = e.what();
            rows[static_cast<std::size_t>(k)] = std::move(failed);
        }
    }
    return rows;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        report(err, e);
        switch (e.code()) {
            case ErrorCode::kPolicyFailure:
                return kExitPolicyFailure;
            case ErrorCode::kIoError:
            case ErrorCode::kCorruptTrace:
            case ErrorCode::kVersionMismatch:
            case ErrorCode::kEmptyTrace:
                return kExitRuntimeError;
            default:
                return kExitValidation;
        }
    } catch (const std::exception& e) {
        err << "error: Internal: " << e.what() << "\n";
        return kExitRuntimeError;
    }
}

RunSpec load_with(const std::filesystem::path& spec_path, const Overrides& overrides) {
    RunSpec spec = load_run_spec(spec_path);
    overrides.apply(spec);
    return spec;
}

}  // namespace

bool RunSpec::all_scripted() const {
    if (manager.policy != PolicyKind::kScripted) return false;
    return std::all_of(workers.begin(), workers.end(),
                       [](const AgentSpec& a) { return a.policy == PolicyKind::kScripted; });
}

RunSpec parse_run_spec(const ordered_json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) invalid("run spec: expected an object");
    RunSpec spec;
    spec.domain = agent::parse_domain(field<std::string>(doc, "domain", "code_generation", "spec"));

    if (doc.contains("task_file")) {
        spec.task = read_file(resolve(base_dir, field<std::string>(doc, "task_file", "", "spec")));
    } else {
        spec.task = field<std::string>(doc, "task", "", "spec");
    }
    if (trim(spec.task).empty()) invalid("task");

    if (const auto it = doc.find("endpoints"); it != doc.end()) {
        if (!it->is_object()) invalid("endpoints: expected an object");
        for (const auto& [name, e] : it->items()) spec.endpoints[name] = parse_endpoint(e, name);
    }

    const auto agents = doc.find("agents");
    if (agents == doc.end() || !agents->is_array()) invalid("agents: expected an array");
    std::size_t managers = 0;
    for (std::size_t i = 0; i < agents->size(); ++i) {
        AgentSpec a = parse_agent((*agents)[i], i, base_dir);
        if (!a.endpoint.empty() && !spec.endpoints.count(a.endpoint))
            invalid("agents[" + std::to_string(i) + "].endpoint: unknown '" + a.endpoint + "'");
        if (a.is_manager) {
            ++managers;
            spec.manager = std::move(a);
        } else {
            spec.workers.push_back(std::move(a));
        }
    }
    if (managers != 1) invalid("agents: exactly one manager required, found " + std::to_string(managers));
    if (spec.workers.empty()) invalid("agents: at least one worker required");
    for (auto& w : spec.workers) w.role = agent_role(w, spec.domain);

    if (const auto it = doc.find("embedder"); it != doc.end()) {
        const std::string type = field<std::string>(*it, "type", "deterministic", "embedder");
        if (type == "remote") {
            spec.embedder.remote = true;
            spec.embedder.endpoint = field<std::string>(*it, "endpoint", "", "embedder");
            if (!spec.endpoints.count(spec.embedder.endpoint))
                invalid("embedder.endpoint: unknown '" + spec.embedder.endpoint + "'");
        } else if (type != "deterministic") {
            invalid("embedder.type: '" + type + "'");
        }
        spec.embedder.dimension = field<std::size_t>(*it, "dimension", spec.embedder.dimension, "embedder");
        spec.embedder.seed = field<std::uint64_t>(*it, "seed", spec.embedder.seed, "embedder");
        if (spec.embedder.dimension == 0) invalid("embedder.dimension");
    }

    if (const auto it = doc.find("routing"); it != doc.end()) {
        RoutingConfig& c = spec.routing;
        c.tau_edge = field<double>(*it, "tau_edge", c.tau_edge, "routing");
        c.k_in_max = field<std::size_t>(*it, "k_in_max", c.k_in_max, "routing");
        c.t_max = field<std::size_t>(*it, "t_max", c.t_max, "routing");
        c.halting_enabled = field<bool>(*it, "halting_enabled", c.halting_enabled, "routing");
        c.topology_mode =
            parse_topology_mode(field<std::string>(*it, "topology_mode", std::string(to_string(c.topology_mode)), "routing"));
        c.random_seed = field<std::uint64_t>(*it, "seed", c.random_seed, "routing");
    }
    spec.routing.validate();

    if (const auto it = doc.find("generation"); it != doc.end()) {
        spec.generation.temperature = field<double>(*it, "temperature", spec.generation.temperature, "generation");
        spec.generation.max_tokens = field<int>(*it, "max_tokens", spec.generation.max_tokens, "generation");
    }
    spec.include_history = field<bool>(doc, "include_history", spec.include_history, "spec");
    spec.parallel_agents = field<bool>(doc, "parallel_agents", spec.parallel_agents, "spec");
    spec.parse_retries = field<std::size_t>(doc, "parse_retries", spec.parse_retries, "spec");
    spec.output_dir = resolve(base_dir, field<std::string>(doc, "output_dir", "out", "spec"));
    return spec;
}

RunSpec load_run_spec(const std::filesystem::path& path) {
    const ordered_json doc = parse_json(read_file(path), path.string());
    return parse_run_spec(doc, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

void Overrides::apply(RunSpec& spec) const {
    if (tau) spec.routing.tau_edge = *tau;
    if (t_max) spec.routing.t_max = *t_max;
    if (mode) spec.routing.topology_mode = *mode;
    if (seed) spec.routing.random_seed = *seed;
    if (out) spec.output_dir = *out;
    spec.routing.validate();
}

RunOutcome execute(const RunSpec& spec, const Environment& env, const std::map<std::string, std::string>& overrides) {
    std::vector<AgentProfile> profiles;
    for (std::size_t i = 0; i < spec.workers.size(); ++i) {
        const AgentSpec& w = spec.workers[i];
        profiles.push_back({static_cast<AgentId>(i), w.name, w.role,
                            w.policy == PolicyKind::kScripted ? AgentKind::kScripted : AgentKind::kLlmBacked});
    }
    const RunSetup setup = validate_run_setup(profiles, spec.routing);

    llm::UsageLedger ledger;
    std::map<std::string, std::unique_ptr<llm::ChatClient>> clients;
    auto client_for = [&](const std::string& name) -> llm::ChatClient& {
        auto& slot = clients[name];
        if (!slot) {
            const EndpointSpec& e = spec.endpoints.at(name);
            llm::EndpointConfig cfg = e.config;
            cfg.api_key = env.getenv ? env.getenv(e.api_key_env.c_str()) : llm::api_key_from_env(e.api_key_env.c_str());
            cfg.validate();
            auto transport = env.transport ? env.transport : llm::make_http_transport();
            slot = std::make_unique<llm::ChatClient>(cfg, transport, env.sleeper);
        }
        return *slot;
    };

    const agent::RolePromptSet prompts = agent::build_role_prompts(spec.domain, setup.profiles, spec.manager.name);
    std::vector<std::unique_ptr<agent::Policy>> owned;
    auto make_policy = [&](const AgentSpec& a, const std::string& system_prompt, AgentId key) -> agent::Policy* {
        if (a.policy == PolicyKind::kScripted) {
            owned.push_back(std::make_unique<agent::ScriptedPolicy>(a.script));
        } else {
            owned.push_back(std::make_unique<agent::LlmPolicy>(client_for(a.endpoint), system_prompt,
                                                               spec.generation, ledger, key));
        }
        return owned.back().get();
    };
    std::vector<agent::Policy*> workers;
    for (std::size_t i = 0; i < spec.workers.size(); ++i)
        workers.push_back(make_policy(spec.workers[i], prompts.worker_templates[i], static_cast<AgentId>(i)));
    agent::Policy* manager = make_policy(spec.manager, prompts.manager_template, kManagerId);

    std::unique_ptr<semantic::Embedder> base;
    std::unique_ptr<semantic::Embedder> embedder;
    if (spec.embedder.remote) {
        base = std::make_unique<llm::RemoteEmbedder>(client_for(spec.embedder.endpoint), spec.embedder.dimension);
        embedder = std::make_unique<semantic::CachingEmbedder>(*base);
    } else {
        embedder = std::make_unique<semantic::HashingEmbedder>(spec.embedder.dimension, spec.embedder.seed);
    }

    manager::LoopOptions opts;
    opts.domain = spec.domain;
    opts.manager_name = spec.manager.name;
    opts.include_history = spec.include_history;
    opts.parse_retries = spec.parse_retries;
    opts.parallel_agents = spec.parallel_agents;
    opts.ledger = &ledger;
    opts.clock = env.clock;

    RunOutcome outcome;
    outcome.trace.metadata.overrides = overrides;
    try {
        outcome.result = manager::run_loop(setup, spec.task, workers, *manager, *embedder, outcome.trace, opts);
    } catch (const Error& e) {
        outcome.error = e;
        outcome.result.rounds_executed = outcome.trace.size();
    }
    return outcome;
}

void write_artifacts(const RunOutcome& outcome, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "graphs", ec);
    if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
    trace::export_trace(outcome.trace, dir / "trace.json");
    if (outcome.trace.size() > 0) {
        write_file(dir / "metrics.tsv", trace::metrics_table(outcome.trace));
        for (RoundIndex t = 0; t < outcome.trace.size(); ++t)
            write_file(dir / "graphs" / ("round_" + std::to_string(t) + ".dot"),
                       trace::export_round_graph(outcome.trace, t, trace::GraphStyle::kDot));
    }
    write_file(dir / "final_answer.txt", outcome.result.final_answer.value_or(""));
}

std::string answer_hash(const std::optional<std::string>& answer) {
    if (!answer) return "-";
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(semantic::HashingEmbedder::hash_token(*answer, 0)));
    return buf;
}

std::vector<SweepRow> sweep_tau(const RunSpec& spec, const std::vector<double>& taus, const Environment& env) {
    std::vector<std::pair<std::string, RunSpec>> variants;
    for (double tau : taus) {
        RunSpec s = spec;
        s.routing.tau_edge = tau;
        s.routing.validate();
        variants.emplace_back(short_double(tau), std::move(s));
    }
    return run_variants(variants, env);
}

std::vector<SweepRow> sweep_rounds(const RunSpec& spec, const std::vector<std::size_t>& rounds,
                                   const Environment& env) {
    std::vector<std::pair<std::string, RunSpec>> variants;
    for (std::size_t t : rounds) {
        RunSpec s = spec;
        s.routing.t_max = t;
        s.routing.halting_enabled = false;
        s.routing.validate();
        variants.emplace_back(std::to_string(t), std::move(s));
    }
    return run_variants(variants, env);
}

std::vector<SweepRow> compare_baselines(const RunSpec& spec, const Environment& env) {
    std::vector<std::pair<std::string, RunSpec>> variants;
    for (TopologyMode mode :
         {TopologyMode::kDynamic, TopologyMode::kRandom, TopologyMode::kStaticFull, TopologyMode::kSingleTurn}) {
        RunSpec s = spec;
        s.routing.topology_mode = mode;
        variants.emplace_back(std::string(to_string(mode)), std::move(s));
    }
    return run_variants(variants, env);
}

std::string format_table(const std::vector<SweepRow>& rows, TableKind kind, char d) {
    std::ostringstream out;
    switch (kind) {
        case TableKind::kTau:
            out << "tau" << d << "mean_edges" << d << "mean_sparsity" << d << "rounds_executed" << d
                << "final_answer_hash" << d << "status\n";
            break;
        case TableKind::kRounds:
            out << "t" << d << "rounds_executed" << d << "total_tokens" << d << "requests" << d << "wall_time_ms"
                << d << "status\n";
            break;
        case TableKind::kBaselines:
            out << "mode" << d << "edges_per_round" << d << "mean_edges" << d << "mean_sparsity" << d
                << "deliveries" << d << "rounds_executed" << d << "total_tokens" << d << "final_answer_hash" << d
                << "status\n";
            break;
    }
    for (const auto& r : rows) {
        const std::string status = r.ok ? "ok" : "failed: " + r.error;
        switch (kind) {
            case TableKind::kTau:
                out << r.label << d << format_double(r.mean_edges) << d << format_double(r.mean_sparsity) << d
                    << r.rounds_executed << d << answer_hash(r.final_answer) << d << status << "\n";
                break;
            case TableKind::kRounds:
                out << r.label << d << r.rounds_executed << d << r.usage.total_tokens() << d << r.usage.request_count
                    << d << r.usage.wall_time_ms << d << status << "\n";
                break;
            case TableKind::kBaselines: {
                std::string per_round;
                for (std::size_t i = 0; i < r.edge_counts.size(); ++i)
                    per_round += (i ? "," : "") + std::to_string(r.edge_counts[i]);
                out << r.label << d << (per_round.empty() ? "-" : per_round) << d << format_double(r.mean_edges) << d
                    << format_double(r.mean_sparsity) << d << r.deliveries << d << r.rounds_executed << d
                    << r.usage.total_tokens() << d << answer_hash(r.final_answer) << d << status << "\n";
                break;
            }
        }
    }
    return out.str();
}

int cmd_run(const std::filesystem::path& spec_path, const Overrides& overrides, std::ostream& out,
            std::ostream& err, const Environment& env) {
    return guarded(err, [&] {
        const RunSpec spec = load_with(spec_path, overrides);
        const RunOutcome outcome = execute(spec, env, overrides.raw);
        write_artifacts(outcome, spec.output_dir);
        if (outcome.error) {
            report(err, *outcome.error);
            return outcome.error->code() == ErrorCode::kPolicyFailure ? int(kExitPolicyFailure)
                                                                     : int(kExitRuntimeError);
        }
        out << "rounds_executed" << '\t' << outcome.result.rounds_executed << "\n";
        out << "halted_by_manager" << '\t' << (outcome.result.halted_by_manager ? "true" : "false") << "\n";
        out << "final_answer_hash" << '\t' << answer_hash(outcome.result.final_answer) << "\n";
        out << "output_dir" << '\t' << spec.output_dir.string() << "\n";
        return int(kExitOk);
    });
}

namespace {

int write_table(const RunSpec& spec, const std::vector<SweepRow>& rows, TableKind kind, const char* file,
                std::ostream& out) {
    const std::string table = format_table(rows, kind);
    std::error_code ec;
    std::filesystem::create_directories(spec.output_dir, ec);
    if (ec) throw Error(ErrorCode::kIoError, "cannot create " + spec.output_dir.string());
    write_file(spec.output_dir / file, table);
    out << table;
    return kExitOk;
}

}  // namespace

int cmd_sweep_tau(const std::filesystem::path& spec_path, const std::vector<double>& taus,
                  const Overrides& overrides, std::ostream& out, std::ostream& err, const Environment& env) {
    return guarded(err, [&] {
        const RunSpec spec = load_with(spec_path, overrides);
        return write_table(spec, sweep_tau(spec, taus, env), TableKind::kTau, "sweep_tau.tsv", out);
    });
}

int cmd_sweep_rounds(const std::filesystem::path& spec_path, const std::vector<std::size_t>& rounds,
                     const Overrides& overrides, std::ostream& out, std::ostream& err, const Environment& env) {
    return guarded(err, [&] {
        const RunSpec spec = load_with(spec_path, overrides);
        return write_table(spec, sweep_rounds(spec, rounds, env), TableKind::kRounds, "sweep_rounds.tsv", out);
    });
}

int cmd_compare_baselines(const std::filesystem::path& spec_path, const Overrides& overrides, std::ostream& out,
                          std::ostream& err, const Environment& env) {
    return guarded(err, [&] {
        const RunSpec spec = load_with(spec_path, overrides);
        return write_table(spec, compare_baselines(spec, env), TableKind::kBaselines, "baselines.tsv", out);
    });
}

int cmd_export_graph(const std::filesystem::path& trace_path, RoundIndex round, trace::GraphStyle style,
                     std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        out << trace::export_round_graph(trace::import_trace(trace_path), round, style);
        return int(kExitOk);
    });
}

int cmd_replay(const std::filesystem::path& trace_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const trace::CoordinationTrace t = trace::import_trace(trace_path);
        auto embedder = semantic::embedder_from_identity(t.metadata.embedder);
        if (!embedder) {
            err << "error: InvalidConfig: embedder '" << t.metadata.embedder << "' cannot be rebuilt from a trace\n";
            return int(kExitValidation);
        }
        auto mismatches = trace::replay_topologies(t, *embedder);
        for (auto& m : trace::check_threshold_consistency(t)) mismatches.push_back(std::move(m));
        for (const auto& m : mismatches) out << "round " << m.round << ": " << m.what << "\n";
        out << "replayed " << t.size() << " rounds, " << mismatches.size() << " mismatches\n";
        return mismatches.empty() ? int(kExitOk) : int(kExitRuntimeError);
    });
}

}  // namespace dytopo::harness

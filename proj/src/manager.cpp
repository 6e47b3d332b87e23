// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "dytopo/manager.hpp"

#include <chrono>
#include <ctime>
#include <exception>
#include <future>

#include "dytopo/error.hpp"
#include "dytopo/routing.hpp"
#include "dytopo/topology.hpp"

namespace dytopo::manager {

namespace {

std::string name_of(AgentId id, const std::vector<AgentProfile>& roster) {
    for (const auto& p : roster)
        if (p.id == id) return p.name;
    return "agent" + std::to_string(id);
}

void append_digest(std::string& out, const GlobalState& state, const std::vector<AgentProfile>& roster) {
    out += "\n## Public messages (round " + std::to_string(state.round) + ")\n";
    out += "Goal: " + state.goal_text + "\n";
    for (const auto& [id, content] : state.public_digest) {
        out += "[" + name_of(id, roster) + "]\n";
        out += content + "\n";
    }
}

std::vector<std::pair<AgentId, llm::UsageCounters>> usage_delta(const std::map<AgentId, llm::UsageCounters>& before,
                                                                const std::map<AgentId, llm::UsageCounters>& after) {
    std::vector<std::pair<AgentId, llm::UsageCounters>> out;
    for (const auto& [id, now] : after) {
        llm::UsageCounters d = now;
        if (const auto it = before.find(id); it != before.end()) {
            d.prompt_tokens -= it->second.prompt_tokens;
            d.completion_tokens -= it->second.completion_tokens;
            d.request_count -= it->second.request_count;
            d.wall_time_ms -= it->second.wall_time_ms;
            if (it->second.estimated && d.request_count == 0) d.estimated = false;
        }
        if (!d.empty()) out.emplace_back(id, d);
    }
    return out;
}

}  // namespace

GlobalState aggregate_global_state(const RoundContext& context, const std::vector<RoundOutput>& outputs,
                                   const AggregationOrder& order) {
    GlobalState s;
    s.round = context.round;
    s.goal_text = context.goal_text;
    s.public_digest.reserve(order.size());
    for (AgentId id : order) {
        if (id >= outputs.size() || outputs[id].author() != id)
            throw Error(ErrorCode::kMissingOutput, "agent " + std::to_string(id));
        s.public_digest.emplace_back(id, outputs[id].public_message().content);
    }
    return s;
}

std::string render_global_state(const GlobalState& state, const std::string& original_task,
                                const std::vector<AgentProfile>& roster, const std::vector<GlobalState>& history) {
    std::string out = "## Task\n" + original_task + "\n";
    out += "\n## Round goal (round " + std::to_string(state.round) + ")\n" + state.goal_text + "\n";
    for (const auto& past : history) append_digest(out, past, roster);
    append_digest(out, state, roster);
    return out;
}

ManagerStep decide_halt(agent::Policy& manager, const std::string& global_state_text, RoundIndex round,
                        const std::string& current_goal, bool halting_enabled,
                        std::optional<std::string> final_answer, std::size_t parse_retries) {
    const AgentProfile profile{kManagerId, "Manager", "meta-agent", AgentKind::kScripted};
    agent::RoundOptions opts;
    opts.parse_retries = parse_retries;
    opts.fallback_enabled = false;
    opts.expect_manager_fields = true;

    ManagerStep step;
    try {
        agent::AgentRoundResult r = agent::run_agent_round(profile, global_state_text, manager, round, opts);
        step.call = {kManagerId, r.invocations, r.parse_retries, false};
        step.output = std::move(r.output);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::kUnparseableOutput) throw;
        step.call = {kManagerId, parse_retries + 1, parse_retries, true};
        step.decision = HaltDecision::proceed(current_goal);
        return step;
    }

    if (halting_enabled && step.output->is_complete().value_or(false)) {
        step.decision = HaltDecision::stop(std::move(final_answer));
        return step;
    }
    const std::string& goal = step.output->next_goal().value_or("");
    step.decision = HaltDecision::proceed(trim(goal).empty() ? current_goal : goal);
    return step;
}

std::optional<std::string> extract_final_answer(const std::vector<trace::RoundRecord>& rounds,
                                                const std::vector<AgentProfile>& profiles,
                                                std::string_view producer_role) {
    if (rounds.empty()) return std::nullopt;
    for (auto r = rounds.rbegin(); r != rounds.rend(); ++r) {
        const auto& order = r->topology.order;
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            if (*it >= r->outputs.size()) continue;
            const auto& answer = r->outputs[*it].answer();
            if (answer && !trim(*answer).empty()) return *answer;
        }
    }
    std::optional<AgentId> producer;
    for (const auto& p : profiles)
        if (p.name == producer_role) producer = p.id;
    if (!producer && !rounds.back().topology.order.empty()) producer = rounds.back().topology.order.back();
    if (!producer) return std::nullopt;
    for (auto r = rounds.rbegin(); r != rounds.rend(); ++r) {
        if (*producer >= r->outputs.size()) continue;
        const std::string& content = r->outputs[*producer].public_message().content;
        if (!trim(content).empty()) return content;
    }
    return std::nullopt;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunResult run_loop(const RunSetup& setup, const std::string& task, const std::vector<agent::Policy*>& workers,
                   agent::Policy& manager, semantic::Embedder& embedder, trace::CoordinationTrace& trace,
                   const LoopOptions& options) {
    const std::vector<AgentProfile>& profiles = setup.profiles;
    const RoutingConfig& config = setup.config;
    const std::size_t n = profiles.size();
    if (workers.size() != n) throw Error(ErrorCode::kInvalidConfig, "one policy per worker required");
    for (auto* w : workers)
        if (w == nullptr) throw Error(ErrorCode::kInvalidConfig, "null worker policy");
    const auto clock = options.clock ? options.clock : utc_timestamp;

    trace::RunMetadata& meta = trace.metadata;
    meta.domain = std::string(agent::to_string(options.domain));
    meta.task = task;
    meta.config = config;
    meta.profiles = profiles;
    meta.manager_name = options.manager_name;
    meta.embedder = embedder.identity();
    meta.include_history = options.include_history;
    meta.started_at = clock();

    std::vector<MemoryBuffer> memories(n);
    std::vector<GlobalState> history;
    RoundContext ctx = RoundContext::initial(task);
    RunResult result;
    std::map<AgentId, llm::UsageCounters> usage_before;
    if (options.ledger) usage_before = options.ledger->per_agent();

    agent::RoundOptions worker_opts;
    worker_opts.parse_retries = options.parse_retries;
    worker_opts.fallback_enabled = options.fallback_enabled;

    for (RoundIndex t = 0; t < config.t_max; ++t) {
        try {
            trace::RoundRecord rec;
            rec.round = t;
            rec.context = ctx;

            // Phase 1: one policy call per worker against memory through t-1.
            std::vector<std::string> contexts(n);
            for (AgentId i = 0; i < n; ++i) {
                contexts[i] = routing::render_agent_context(profiles[i], ctx, memories[i], profiles);
                if (options.on_context) options.on_context(i, t, contexts[i]);
            }
            std::vector<std::optional<agent::AgentRoundResult>> results(n);
            if (options.parallel_agents && n > 1) {
                std::vector<std::future<agent::AgentRoundResult>> futures;
                futures.reserve(n);
                for (AgentId i = 0; i < n; ++i) {
                    futures.push_back(std::async(std::launch::async, [&, i] {
                        return agent::run_agent_round(profiles[i], contexts[i], *workers[i], t, worker_opts);
                    }));
                }
                std::exception_ptr first_error;
                for (AgentId i = 0; i < n; ++i) {
                    try {
                        results[i] = futures[i].get();
                    } catch (...) {
                        if (!first_error) first_error = std::current_exception();
                    }
                }
                if (first_error) std::rethrow_exception(first_error);
            } else {
                for (AgentId i = 0; i < n; ++i)
                    results[i] = agent::run_agent_round(profiles[i], contexts[i], *workers[i], t, worker_opts);
            }
            for (AgentId i = 0; i < n; ++i) {
                rec.calls.push_back({i, results[i]->invocations, results[i]->parse_retries, results[i]->used_fallback});
                rec.outputs.push_back(std::move(results[i]->output));
            }

            // Phases 2-3: relevance, sparse graph, aggregation order.
            const auto emb = semantic::embed_descriptors(rec.outputs, embedder);
            const RelevanceMatrix rel = semantic::relevance_matrix(emb.queries, emb.keys);
            rec.topology = topology::induce_topology(rel, config, t);
            check_snapshot_invariants(rec.topology, config.k_in_max);

            // Phase 4: barrier, then routing and memory update.
            routing::RoutedBatch batch = routing::route_private_messages(rec.outputs, rec.topology, profiles);
            routing::apply_memory_update(memories, rec.outputs, batch);
            rec.deliveries = std::move(batch.deliveries);

            // Phase 5: manager control.
            rec.global_state = aggregate_global_state(ctx, rec.outputs, rec.topology.order);
            const std::string state_text = render_global_state(
                rec.global_state, task, profiles,
                options.include_history ? history : std::vector<GlobalState>{});
            std::vector<trace::RoundRecord> so_far = trace.rounds();
            so_far.push_back(rec);
            std::optional<std::string> answer =
                extract_final_answer(so_far, profiles, agent::producer_role(options.domain));
            ManagerStep step = decide_halt(manager, state_text, t, ctx.goal_text, config.halting_enabled,
                                           answer, options.parse_retries);
            rec.manager_output = std::move(step.output);
            rec.manager_call = step.call;
            rec.decision = step.decision;

            if (options.ledger) {
                auto after = options.ledger->per_agent();
                for (auto& [id, delta] : usage_delta(usage_before, after)) rec.usage.push_back({id, delta});
                usage_before = std::move(after);
            }

            history.push_back(rec.global_state);
            trace.record_round(std::move(rec));
            result.rounds_executed = t + 1;
            result.final_answer = std::move(answer);

            if (step.decision.halt()) {
                result.halted_by_manager = true;
                break;
            }
            ctx = ctx.next(step.decision.next_goal());
        } catch (const Error& e) {
            trace.failure = trace::TraceFailure{t, std::string(error_code_name(e.code())), e.what()};
            meta.finished_at = clock();
            throw;
        }
    }

    meta.finished_at = clock();
    trace.result = trace::RunSummary{result.rounds_executed, result.halted_by_manager, result.final_answer};
    return result;
}

}  // namespace dytopo::manager

// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

// Run-spec loading and the command implementations behind the dytopo CLI.
//
// A run spec is a JSON document:
//   {
//     "domain": "code_generation",
//     "task": "...",                 (or "task_file": "path")
//     "agents": [
//       {"name": "Developer", "role": "...", "kind": "worker",
//        "policy": "scripted", "script": {...} | "path.json"},
//       {"name": "Manager", "kind": "manager", "policy": "llm_backed", "endpoint": "main"}
//     ],
//     "endpoints": {"main": {"base_url": "...", "model": "...", "api_key_env": "DYTOPO_API_KEY"}},
//     "embedder": {"type": "deterministic", "dimension": 64} | {"type": "remote", "endpoint": "main", "dimension": 1024},
//     "routing": {"tau_edge": 0.3, "k_in_max": 3, "t_max": 10, "halting_enabled": true,
//                 "topology_mode": "dynamic", "seed": 0},
//     "generation": {"temperature": 0.3, "max_tokens": 4000},
//     "output_dir": "out"
//   }
// Relative paths resolve against the spec file's directory.

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dytopo/agent.hpp"
#include "dytopo/domain.hpp"
#include "dytopo/error.hpp"
#include "dytopo/llm_client.hpp"
#include "dytopo/manager.hpp"
#include "dytopo/prompts.hpp"
#include "dytopo/trace.hpp"

namespace dytopo::harness {

enum ExitCode : int {
    kExitOk = 0,
    kExitRuntimeError = 1,
    kExitValidation = 2,
    kExitPolicyFailure = 3,
};

enum class PolicyKind { kScripted, kLlmBacked };

struct AgentSpec {
    std::string name;
    std::string role;
    bool is_manager = false;
    PolicyKind policy = PolicyKind::kScripted;
    nlohmann::ordered_json script;
    std::string endpoint;
};

struct EndpointSpec {
    llm::EndpointConfig config;
    std::string api_key_env = llm::kApiKeyEnv;
};

struct EmbedderSpec {
    bool remote = false;
    std::size_t dimension = semantic::HashingEmbedder::kDefaultDimension;
    std::uint64_t seed = semantic::HashingEmbedder::kDefaultSeed;
    std::string endpoint;
};

struct RunSpec {
    agent::Domain domain = agent::Domain::kCodeGeneration;
    std::string task;
    std::vector<AgentSpec> workers;  // worker i gets id i
    AgentSpec manager;
    std::map<std::string, EndpointSpec> endpoints;
    EmbedderSpec embedder;
    RoutingConfig routing;
    agent::GenerationConfig generation;
    bool include_history = true;
    bool parallel_agents = true;
    std::size_t parse_retries = 2;
    std::filesystem::path output_dir = "out";

    [[nodiscard]] bool all_scripted() const;
};

/// Throws Error(kInvalidConfig | kUnknownDomain | kInvalidValue | kIoError).
RunSpec parse_run_spec(const nlohmann::ordered_json& doc, const std::filesystem::path& base_dir = ".");
RunSpec load_run_spec(const std::filesystem::path& path);

/// Command-line values that replace spec-file values. Raw flag text is kept
/// for the trace metadata.
struct Overrides {
    std::optional<double> tau;
    std::optional<std::size_t> t_max;
    std::optional<TopologyMode> mode;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::map<std::string, std::string> raw;

    void apply(RunSpec& spec) const;
};

/// Injection points for tests; defaults talk to the network and the wall clock.
struct Environment {
    std::shared_ptr<llm::HttpTransport> transport;
    llm::ChatClient::Sleeper sleeper;
    std::function<std::string()> clock;
    std::function<std::string(const char*)> getenv;
};

struct RunOutcome {
    manager::RunResult result;
    trace::CoordinationTrace trace;
    std::optional<Error> error;  // set when run_loop threw; trace is partial
};

/// Builds policies and the embedder, then runs the loop. Setup errors throw;
/// errors from inside the loop are returned in RunOutcome::error.
RunOutcome execute(const RunSpec& spec, const Environment& env = {},
                   const std::map<std::string, std::string>& overrides = {});

/// Writes trace.json, metrics.tsv, final_answer.txt and graphs/round_<t>.dot.
void write_artifacts(const RunOutcome& outcome, const std::filesystem::path& dir);

/// Hex FNV-1a 64 of the answer text, "-" when absent.
std::string answer_hash(const std::optional<std::string>& answer);

struct SweepRow {
    std::string label;
    bool ok = true;
    std::string error;
    std::size_t rounds_executed = 0;
    std::vector<std::size_t> edge_counts;
    double mean_edges = 0.0;
    double mean_sparsity = 0.0;
    std::size_t deliveries = 0;
    llm::UsageCounters usage;
    std::optional<std::string> final_answer;
};

std::vector<SweepRow> sweep_tau(const RunSpec& spec, const std::vector<double>& taus, const Environment& env = {});
/// Each row forces halting off and t_max = T. T = 0 throws kInvalidConfig.
std::vector<SweepRow> sweep_rounds(const RunSpec& spec, const std::vector<std::size_t>& rounds,
                                   const Environment& env = {});
/// Rows for dynamic, random, static_full, single_turn with the spec's seed.
std::vector<SweepRow> compare_baselines(const RunSpec& spec, const Environment& env = {});

enum class TableKind { kTau, kRounds, kBaselines };
std::string format_table(const std::vector<SweepRow>& rows, TableKind kind, char delimiter = '\t');

/// CLI entry points. Results go to out, diagnostics to err as
/// "error: <Code>: <detail>".
int cmd_run(const std::filesystem::path& spec_path, const Overrides& overrides, std::ostream& out,
            std::ostream& err, const Environment& env = {});
int cmd_sweep_tau(const std::filesystem::path& spec_path, const std::vector<double>& taus,
                  const Overrides& overrides, std::ostream& out, std::ostream& err, const Environment& env = {});
int cmd_sweep_rounds(const std::filesystem::path& spec_path, const std::vector<std::size_t>& rounds,
                     const Overrides& overrides, std::ostream& out, std::ostream& err, const Environment& env = {});
int cmd_compare_baselines(const std::filesystem::path& spec_path, const Overrides& overrides, std::ostream& out,
                          std::ostream& err, const Environment& env = {});
int cmd_export_graph(const std::filesystem::path& trace_path, RoundIndex round, trace::GraphStyle style,
                     std::ostream& out, std::ostream& err);
int cmd_replay(const std::filesystem::path& trace_path, std::ostream& out, std::ostream& err);

}  // namespace dytopo::harness

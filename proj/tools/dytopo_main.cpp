// Copyright 2026 The dytopo Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dytopo/error.hpp"
#include "dytopo/harness.hpp"

namespace {

using dytopo::harness::Overrides;

void add_overrides(CLI::App& cmd, std::string& tau, std::string& t_max, std::string& mode, std::string& seed,
                   std::string& out) {
    cmd.add_option("--tau", tau, "Edge threshold (strict)");
    cmd.add_option("--t-max", t_max, "Maximum rounds");
    cmd.add_option("--mode", mode, "dynamic | random | static_full | single_turn");
    cmd.add_option("--seed", seed, "Seed for the random baseline");
    cmd.add_option("--out", out, "Output directory");
}

// Parses the raw flag strings; throws dytopo::Error(kInvalidValue).
Overrides resolve(const std::string& tau, const std::string& t_max, const std::string& mode,
                  const std::string& seed, const std::string& out) {
    Overrides o;
    auto bad = [](const char* flag, const std::string& v) {
        return dytopo::Error(dytopo::ErrorCode::kInvalidValue, std::string(flag) + " '" + v + "'");
    };
    try {
        if (!tau.empty()) {
            std::size_t used = 0;
            o.tau = std::stod(tau, &used);
            if (used != tau.size()) throw bad("--tau", tau);
            o.raw["--tau"] = tau;
        }
        if (!t_max.empty()) {
            if (t_max.find_first_not_of("0123456789") != std::string::npos) throw bad("--t-max", t_max);
            o.t_max = std::stoull(t_max);
            o.raw["--t-max"] = t_max;
        }
        if (!seed.empty()) {
            if (seed.find_first_not_of("0123456789") != std::string::npos) throw bad("--seed", seed);
            o.seed = std::stoull(seed);
            o.raw["--seed"] = seed;
        }
    } catch (const std::logic_error&) {
        throw dytopo::Error(dytopo::ErrorCode::kInvalidValue, "numeric override out of range");
    }
    if (!mode.empty()) {
        o.mode = dytopo::parse_topology_mode(mode);
        o.raw["--mode"] = mode;
    }
    if (!out.empty()) {
        o.out = out;
        o.raw["--out"] = out;
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dytopo: dynamic-topology multi-agent coordination"};
    app.require_subcommand(1);

    std::string spec_path;
    std::string tau, t_max, mode, seed, out;

    auto* run = app.add_subcommand("run", "Run one task from a spec file");
    run->add_option("--spec", spec_path, "Run spec (JSON)")->required();
    add_overrides(*run, tau, t_max, mode, seed, out);

    std::vector<double> taus{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    auto* sweep_tau = app.add_subcommand("sweep-tau", "One run per edge threshold");
    sweep_tau->add_option("--spec", spec_path, "Run spec (JSON)")->required();
    sweep_tau->add_option("--taus", taus, "Thresholds")->delimiter(',');
    add_overrides(*sweep_tau, tau, t_max, mode, seed, out);

    std::vector<std::size_t> rounds{1, 3, 5, 7, 9};
    auto* sweep_rounds = app.add_subcommand("sweep-rounds", "Fixed-round runs with halting disabled");
    sweep_rounds->add_option("--spec", spec_path, "Run spec (JSON)")->required();
    sweep_rounds->add_option("--rounds", rounds, "Round counts")->delimiter(',');
    add_overrides(*sweep_rounds, tau, t_max, mode, seed, out);

    auto* baselines = app.add_subcommand("compare-baselines", "dynamic vs random vs static_full vs single_turn");
    baselines->add_option("--spec", spec_path, "Run spec (JSON)")->required();
    add_overrides(*baselines, tau, t_max, mode, seed, out);

    std::string trace_path;
    unsigned round = 0;
    std::string style = "dot";
    auto* graph = app.add_subcommand("export-graph", "Render one round of a trace");
    graph->add_option("--trace", trace_path, "Trace file")->required();
    graph->add_option("--round", round, "Round index")->required();
    graph->add_option("--style", style, "dot | mermaid");

    auto* replay = app.add_subcommand("replay", "Recompute topologies from a trace and compare");
    replay->add_option("--trace", trace_path, "Trace file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dytopo::harness::kExitValidation;
    }

    Overrides overrides;
    try {
        overrides = resolve(tau, t_max, mode, seed, out);
    } catch (const dytopo::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return dytopo::harness::kExitValidation;
    }

    namespace h = dytopo::harness;
    if (*run) return h::cmd_run(spec_path, overrides, std::cout, std::cerr);
    if (*sweep_tau) return h::cmd_sweep_tau(spec_path, taus, overrides, std::cout, std::cerr);
    if (*sweep_rounds) return h::cmd_sweep_rounds(spec_path, rounds, overrides, std::cout, std::cerr);
    if (*baselines) return h::cmd_compare_baselines(spec_path, overrides, std::cout, std::cerr);
    if (*graph) {
        try {
            return h::cmd_export_graph(trace_path, round, dytopo::trace::parse_graph_style(style), std::cout,
                                       std::cerr);
        } catch (const dytopo::Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return h::kExitValidation;
        }
    }
    if (*replay) return h::cmd_replay(trace_path, std::cout, std::cerr);
    return h::kExitValidation;
}

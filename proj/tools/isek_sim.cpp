// Command-line front end: standalone drivers for the gossip, trust, and
// matching stages, plus full scenario runs and report cross-checks.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "isek/gossip.hpp"
#include "isek/matching.hpp"
#include "isek/report.hpp"
#include "isek/scenario.hpp"
#include "isek/simulation.hpp"
#include "isek/trust.hpp"

namespace {

// Exit codes: 0 success, 1 validation failure (bad flags, config, or input
// files), 2 runtime failure (simulation error, conservation or cross-check
// violation, I/O).
constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

namespace fs = std::filesystem;

std::string fmt(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

void write_file(const fs::path& target, const std::string& body) {
    fs::create_directories(target.parent_path());
    const fs::path temp = target.string() + ".tmp";
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + temp.string());
    }
    out << body;
    out.flush();
    if (!out) {
        throw std::runtime_error("short write to " + temp.string());
    }
    out.close();
    fs::rename(temp, target);
}

struct CommonOptions {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::string format = "csv";
    std::size_t trials = 16;      // gossip ensemble size
    std::size_t run_trials = 1;   // independent scenario trials for `run`
};

isek::ScenarioConfig load_config(const CommonOptions& opts) {
    isek::ScenarioConfig config = isek::load_scenario(opts.scenario);
    if (opts.seed) {
        config.seed = *opts.seed;
    }
    return config;
}

int cmd_gossip(const CommonOptions& opts) {
    const isek::ScenarioConfig config = load_config(opts);
    const isek::Graph graph = isek::generate_graph(
        config.graph.nodes, config.graph.mean_degree, config.graph.kind,
        isek::RngStream::derive(config.seed, isek::stream::topology).next_u64());
    std::vector<isek::NodeId> seeds;
    for (std::size_t i = 0; i < config.issuers && i < graph.node_count(); ++i) {
        seeds.push_back(static_cast<isek::NodeId>(i));
    }
    const isek::EnsembleResult ensemble =
        isek::run_ensemble(graph, seeds, config.gossip, config.seed, opts.trials);

    std::ostringstream csv;
    csv << "trial,round,informed,messages\n";
    for (std::size_t trial = 0; trial < ensemble.traces.size(); ++trial) {
        for (const isek::TraceRow& row : ensemble.traces[trial]) {
            csv << trial << ',' << row.round << ',' << row.informed << ',' << row.messages
                << '\n';
        }
    }
    write_file(fs::path(opts.out) / "gossip.csv", csv.str());

    std::vector<double> mean_trace = ensemble.mean_informed;
    while (mean_trace.size() < static_cast<std::size_t>(config.gossip.ttl) + 1) {
        mean_trace.push_back(mean_trace.empty() ? 0.0 : mean_trace.back());
    }
    const double predicted = isek::expected_total_messages(
        config.gossip.request_count, config.gossip.forward_probability,
        graph.mean_degree(), mean_trace, config.gossip.ttl);
    const double closed_form =
        isek::analytic_coverage(graph.node_count(), graph.mean_degree(),
                                config.gossip.forward_probability, config.gossip.ttl);

    std::cout << "trials = " << ensemble.traces.size() << '\n'
              << "nodes = " << graph.node_count() << '\n'
              << "mean_final_informed = " << fmt(mean_trace.back()) << '\n'
              << "closed_form_coverage = " << fmt(closed_form) << '\n'
              << "measured_messages = " << ensemble.total_messages << '\n'
              << "predicted_messages_per_request = " << fmt(predicted) << '\n';
    return kExitOk;
}

int cmd_trust(const CommonOptions& opts) {
    const isek::ScenarioConfig config = load_config(opts);
    const isek::Graph graph = isek::generate_graph(
        config.graph.nodes, config.graph.mean_degree, config.graph.kind,
        isek::RngStream::derive(config.seed, isek::stream::topology).next_u64());

    // Standalone demo: a random initial field shows the diffusion clearly.
    isek::TrustField field;
    field.learning_rate = config.trust.learning_rate;
    isek::RngStream rng = isek::RngStream::derive(config.seed, isek::stream::trust);
    field.scores.resize(graph.node_count());
    for (double& score : field.scores) {
        score = rng.next_double();
    }

    std::ostringstream csv;
    csv << "iteration,node,score\n";
    for (std::size_t node = 0; node < field.scores.size(); ++node) {
        csv << 0 << ',' << node << ',' << fmt(field.scores[node]) << '\n';
    }
    const double before = isek::total_trust(field);
    const isek::DiffusionResult result =
        isek::diffuse_until(field, graph, 1e-9, 10000, [&](const isek::TrustField& step) {
            for (std::size_t node = 0; node < step.scores.size(); ++node) {
                csv << step.iteration << ',' << node << ',' << fmt(step.scores[node])
                    << '\n';
            }
        });
    write_file(fs::path(opts.out) / "trust.csv", csv.str());

    std::cout << "nodes = " << graph.node_count() << '\n'
              << "learning_rate = " << fmt(field.learning_rate) << '\n'
              << "iterations = " << result.iterations << '\n'
              << "converged = " << (result.converged ? "yes" : "no") << '\n'
              << "total_trust_before = " << fmt(before) << '\n'
              << "total_trust_after = " << fmt(isek::total_trust(result.field)) << '\n';
    return kExitOk;
}

int cmd_match(const CommonOptions& opts) {
    const isek::ScenarioConfig config = load_config(opts);

    std::vector<isek::AgentCard> population;
    isek::AgentId id = 0;
    for (const isek::PopulationGroup& group : config.population.groups) {
        for (std::size_t k = 0; k < group.count; ++k) {
            isek::AgentCard card;
            card.id = id++;
            card.tags = group.tags;
            card.attributes = group.attributes;
            population.push_back(std::move(card));
        }
    }
    const std::size_t dim = config.matching.dimension;
    std::vector<isek::Embedding> embeddings;
    embeddings.reserve(population.size());
    for (const isek::AgentCard& card : population) {
        embeddings.push_back(isek::embed_card(card, dim));
    }

    // Neutral features: every agent idle and untried, trust at the prior.
    std::map<isek::AgentId, isek::CapabilityVector> capabilities;
    std::map<isek::AgentId, double> trust_scores;
    for (const isek::AgentCard& card : population) {
        isek::RuntimeStats stats;
        stats.success_rate = 0.5;
        stats.latency = 1.0;
        stats.availability = 1.0;
        stats.load = 0.0;
        capabilities[card.id] = isek::capability_vector(stats);
        trust_scores[card.id] = 0.5;
    }

    std::ostringstream csv;
    csv << "task_id,stage,agent_id,score\n";
    const isek::TagOverlapScorer scorer;
    for (const isek::TaskSpec& spec : config.tasks) {
        const isek::TaskRequest& request = spec.request;
        const isek::Embedding query = isek::embed_task(request, dim);
        const auto candidates = isek::generate_candidates(
            population, embeddings, query, config.matching.thresholds.candidate_threshold);
        for (const isek::Candidate& c : candidates) {
            csv << request.id << ",candidates," << c.agent << ',' << fmt(c.similarity)
                << '\n';
        }
        const auto filtered =
            isek::semantic_filter(population, candidates, request, scorer,
                                  config.matching.thresholds.filter_threshold);
        for (const isek::FilteredCandidate& f : filtered) {
            csv << request.id << ",filter," << f.agent << ',' << fmt(f.semantic_score)
                << '\n';
        }
        const auto ranked = isek::rank(population, filtered, capabilities, trust_scores,
                                       request, config.matching.weights);
        for (const isek::RankedAgent& r : ranked) {
            csv << request.id << ",ranked," << r.agent << ',' << fmt(r.score) << '\n';
        }
        std::cout << "task " << request.id << ": " << candidates.size() << " candidates, "
                  << filtered.size() << " filtered, " << ranked.size() << " ranked\n";
    }
    write_file(fs::path(opts.out) / "matching.csv", csv.str());
    return kExitOk;
}

int cmd_lifecycle(const CommonOptions& opts) {
    const isek::ScenarioConfig config = load_config(opts);
    const isek::MetricsReport report = isek::run_simulation(config);

    std::ostringstream events;
    events << "time,task,subtask,event,agent,detail\n";
    for (const isek::CheckpointEvent& row : report.events) {
        std::string subtask = row.subtask ? std::to_string(*row.subtask) : "";
        std::string agent = row.agent ? std::to_string(*row.agent) : "";
        std::string detail = row.detail;
        for (char& c : detail) {
            if (c == ',' || c == '\n' || c == '\r') c = ';';
        }
        events << row.time << ',' << row.task << ',' << subtask << ',' << row.event << ','
               << agent << ',' << detail << '\n';
    }
    write_file(fs::path(opts.out) / "events.csv", events.str());

    std::cout << "tasks_published = " << report.summary.tasks_published << '\n'
              << "tasks_settled = " << report.summary.tasks_settled << '\n'
              << "tasks_failed = " << report.summary.tasks_failed << '\n'
              << "tasks_unfinished = " << report.summary.tasks_unfinished << '\n'
              << "conservation = " << (report.summary.conservation ? "ok" : "violated")
              << '\n';
    return report.summary.conservation ? kExitOk : kExitRuntime;
}

int cmd_run(const CommonOptions& opts) {
    const isek::ScenarioConfig base = load_config(opts);
    const std::size_t trials = std::max<std::size_t>(std::size_t{1}, opts.run_trials);

    // Trials run concurrently on independent streams: trial 0 uses the
    // scenario seed itself (so `run` and `run --trials 1` are identical) and
    // trial k a stream derived from (seed, k), so raising --trials later
    // never perturbs the trials that already existed.
    std::vector<isek::MetricsReport> reports(trials);
    std::vector<std::string> errors(trials);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(trials); ++t) {
        const auto index = static_cast<std::size_t>(t);
        try {
            isek::ScenarioConfig config = base;
            if (t > 0) {
                config.seed = isek::RngStream::derive(base.seed, isek::stream::harness,
                                                      static_cast<std::uint64_t>(t), 1)
                                  .next_u64();
            }
            reports[index] = isek::run_simulation(config);
        } catch (const std::exception& e) {
            errors[index] = e.what();
        }
    }

    for (std::size_t t = 0; t < trials; ++t) {
        if (!errors[t].empty()) {
            std::cerr << "error: trial " << t << ": " << errors[t] << '\n';
            return kExitRuntime;
        }
    }

    isek::emit_report(reports[0], opts.out, opts.format);
    for (std::size_t t = 1; t < trials; ++t) {
        const fs::path dir = fs::path(opts.out) / ("trial-" + std::to_string(t));
        isek::emit_report(reports[t], dir.string(), opts.format);
    }

    std::cout << isek::render_summary(reports[0].summary, reports[0].warnings);
    bool conservation = reports[0].summary.conservation;
    for (std::size_t t = 1; t < trials; ++t) {
        const isek::SummaryStats& s = reports[t].summary;
        std::cout << "trial " << t << ": settled = " << s.tasks_settled
                  << ", failed = " << s.tasks_failed << ", conservation = "
                  << (s.conservation ? "ok" : "violated") << '\n';
        conservation = conservation && s.conservation;
    }
    return conservation ? kExitOk : kExitRuntime;
}

int cmd_report(const CommonOptions& opts) {
    const isek::MetricsReport report = isek::load_report(opts.out);
    const std::vector<std::string> findings = isek::cross_check(report);
    std::cout << isek::render_summary(report.summary, {});
    if (findings.empty()) {
        std::cout << "cross_check = ok\n";
        return kExitOk;
    }
    std::cout << "cross_check = " << findings.size() << " finding(s)\n";
    for (const std::string& finding : findings) {
        std::cout << "  - " << finding << '\n';
    }
    return kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"isek_sim: deterministic coordination-fabric simulator"};
    app.require_subcommand(1);

    CommonOptions opts;
    auto add_common = [&opts](CLI::App* cmd, bool needs_scenario) {
        if (needs_scenario) {
            cmd->add_option("--scenario", opts.scenario, "scenario JSON file")
                ->required();
        }
        cmd->add_option("--seed", opts.seed, "override the scenario master seed");
        cmd->add_option("--out", opts.out, "output directory (default: out)");
        cmd->add_option("--format", opts.format, "output format (csv)");
    };

    CLI::App* gossip = app.add_subcommand("gossip", "run a gossip discovery ensemble");
    add_common(gossip, true);
    gossip->add_option("--trials", opts.trials, "ensemble trials (default: 16)");
    CLI::App* trust = app.add_subcommand("trust", "diffuse a trust field to convergence");
    add_common(trust, true);
    CLI::App* match = app.add_subcommand("match", "run the three matching stages");
    add_common(match, true);
    CLI::App* lifecycle =
        app.add_subcommand("lifecycle", "run a scenario and dump the task events");
    add_common(lifecycle, true);
    CLI::App* run = app.add_subcommand("run", "run a scenario and write the full report");
    add_common(run, true);
    run->add_option("--trials", opts.run_trials,
                    "independent concurrent trials (default: 1)");
    CLI::App* report =
        app.add_subcommand("report", "re-read a report directory and cross-check it");
    add_common(report, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    if (opts.format != "csv") {
        std::cerr << "error: unsupported format '" << opts.format << "' (only csv)\n";
        return kExitValidation;
    }

    try {
        if (gossip->parsed()) return cmd_gossip(opts);
        if (trust->parsed()) return cmd_trust(opts);
        if (match->parsed()) return cmd_match(opts);
        if (lifecycle->parsed()) return cmd_lifecycle(opts);
        if (run->parsed()) return cmd_run(opts);
        if (report->parsed()) return cmd_report(opts);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitValidation;
}

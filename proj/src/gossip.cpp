#include "isek/gossip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace isek {

void validate(const GossipParams& params) {
    if (params.forward_probability < 0.0 || params.forward_probability > 1.0) {
        throw std::invalid_argument("gossip: forward probability must lie in [0, 1], got " +
                                    std::to_string(params.forward_probability));
    }
    if (params.ttl < 0) {
        throw std::invalid_argument("gossip: ttl must be non-negative, got " +
                                    std::to_string(params.ttl));
    }
    if (params.request_count < 1) {
        throw std::invalid_argument("gossip: request count must be positive, got " +
                                    std::to_string(params.request_count));
    }
}

GossipState init_gossip(const Graph& g, const std::vector<NodeId>& seed_nodes,
                        const GossipParams& params, std::uint64_t request_id) {
    validate(params);
    if (seed_nodes.empty()) {
        throw std::invalid_argument("gossip: at least one seed node is required");
    }
    GossipState state;
    state.request_id = request_id;
    state.seen.assign(g.node_count(), 0);
    for (NodeId node : seed_nodes) {
        if (node >= g.node_count()) {
            throw std::out_of_range("gossip: seed node " + std::to_string(node) +
                                    " is not in the graph");
        }
        if (!state.seen[node]) {
            state.seen[node] = 1;
            state.informed.push_back(node);
        }
    }
    return state;
}

bool gossip_step(GossipState& state, const Graph& g, const GossipParams& params,
                 RngStream& rng) {
    if (state.round >= params.ttl) {
        return false;
    }
    // Synchronous round: only nodes informed before the round transmit.
    const std::size_t senders = state.informed.size();
    std::int64_t messages = 0;
    for (std::size_t s = 0; s < senders; ++s) {
        const NodeId sender = state.informed[s];
        for (NodeId neighbor : g.neighbors(sender)) {
            if (!rng.bernoulli(params.forward_probability)) {
                continue;
            }
            ++messages;  // duplicates still cost a transmission
            if (!state.seen[neighbor]) {
                state.seen[neighbor] = 1;
                state.informed.push_back(neighbor);
            }
        }
    }
    state.round += 1;
    state.messages_per_round.push_back(messages);
    return true;
}

bool growth_possible(const GossipState& state, const Graph& g) {
    for (NodeId node : state.informed) {
        for (NodeId neighbor : g.neighbors(node)) {
            if (!state.seen[neighbor]) {
                return true;
            }
        }
    }
    return false;
}

std::vector<TraceRow> run_gossip(const Graph& g, const std::vector<NodeId>& seeds,
                                 const GossipParams& params, RngStream& rng) {
    GossipState state = init_gossip(g, seeds, params);
    std::vector<TraceRow> trace;
    trace.push_back({0, state.informed_count(), 0});
    while (state.round < params.ttl && growth_possible(state, g)) {
        gossip_step(state, g, params, rng);
        trace.push_back({state.round, state.informed_count(),
                         state.messages_per_round.back()});
    }
    return trace;
}

double expected_new_recipients(const GossipState& state, const Graph& g, double p) {
    if (p < 0.0 || p > 1.0) {
        throw std::invalid_argument("gossip: forward probability must lie in [0, 1]");
    }
    std::int64_t frontier_edges = 0;
    for (NodeId node : state.informed) {
        for (NodeId neighbor : g.neighbors(node)) {
            if (!state.seen[neighbor]) {
                ++frontier_edges;
            }
        }
    }
    return static_cast<double>(state.informed_count()) +
           p * static_cast<double>(frontier_edges);
}

double analytic_coverage(std::size_t n, double mean_degree, double p, int t) {
    if (n == 0) {
        throw std::invalid_argument("gossip: coverage estimate needs a non-empty network");
    }
    const double nn = static_cast<double>(n);
    return nn * (1.0 - std::exp(-p * mean_degree * static_cast<double>(t) / nn));
}

double expected_total_messages(int request_count, double p, double mean_degree,
                               const std::vector<double>& coverage_trace, int ttl) {
    if (ttl < 0) {
        throw std::invalid_argument("gossip: ttl must be non-negative");
    }
    if (coverage_trace.size() < static_cast<std::size_t>(ttl) + 1) {
        throw std::invalid_argument(
            "gossip: coverage trace has " + std::to_string(coverage_trace.size()) +
            " entries but the message estimate needs " + std::to_string(ttl + 1));
    }
    double sum = 0.0;
    for (int t = 0; t <= ttl; ++t) {
        sum += p * mean_degree * coverage_trace[static_cast<std::size_t>(t)];
    }
    return static_cast<double>(request_count) * sum;
}

namespace {

EnsembleResult collect(std::vector<std::vector<TraceRow>> traces) {
    EnsembleResult result;
    result.traces = std::move(traces);
    std::size_t longest = 0;
    for (const auto& trace : result.traces) {
        longest = std::max(longest, trace.size());
    }
    result.mean_informed.assign(longest, 0.0);
    result.mean_messages.assign(longest, 0.0);
    for (const auto& trace : result.traces) {
        for (std::size_t t = 0; t < longest; ++t) {
            // A trial that stopped early stays at its final coverage and
            // sends nothing further.
            if (t < trace.size()) {
                result.mean_informed[t] += static_cast<double>(trace[t].informed);
                result.mean_messages[t] += static_cast<double>(trace[t].messages);
                result.total_messages += trace[t].messages;
            } else {
                result.mean_informed[t] += static_cast<double>(trace.back().informed);
            }
        }
    }
    const double trials = static_cast<double>(result.traces.size());
    for (std::size_t t = 0; t < longest; ++t) {
        result.mean_informed[t] /= trials;
        result.mean_messages[t] /= trials;
    }
    return result;
}

}  // namespace

EnsembleResult run_ensemble_serial(const Graph& g, const std::vector<NodeId>& seeds,
                                   const GossipParams& params,
                                   std::uint64_t master_seed, std::size_t trials) {
    if (trials == 0) {
        throw std::invalid_argument("gossip: ensemble needs at least one trial");
    }
    std::vector<std::vector<TraceRow>> traces(trials);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        RngStream rng = RngStream::derive(master_seed, stream::gossip, trial);
        traces[trial] = run_gossip(g, seeds, params, rng);
    }
    return collect(std::move(traces));
}

EnsembleResult run_ensemble(const Graph& g, const std::vector<NodeId>& seeds,
                            const GossipParams& params, std::uint64_t master_seed,
                            std::size_t trials) {
    if (trials == 0) {
        throw std::invalid_argument("gossip: ensemble needs at least one trial");
    }
    init_gossip(g, seeds, params);  // validate once before spawning workers
    std::vector<std::vector<TraceRow>> traces(trials);
    const std::int64_t count = static_cast<std::int64_t>(trials);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t trial = 0; trial < count; ++trial) {
        RngStream rng =
            RngStream::derive(master_seed, stream::gossip, static_cast<std::uint64_t>(trial));
        traces[static_cast<std::size_t>(trial)] = run_gossip(g, seeds, params, rng);
    }
    return collect(std::move(traces));
}

}  // namespace isek

#pragma once

#include <cstdint>
#include <vector>

#include "isek/rng.hpp"
#include "isek/topology.hpp"
#include "isek/types.hpp"

namespace isek {

struct GossipParams {
    double forward_probability = 0.0;  // p
    int ttl = 0;                       // T, in rounds
    int request_count = 1;             // K, enters the message estimate only
};

void validate(const GossipParams& params);

/**
 * Round-synchronous push-gossip state for one request. Every informed node
 * re-transmits to each neighbor with probability p while TTL lasts;
 * duplicate deliveries count as messages but never change state.
 */
struct GossipState {
    std::uint64_t request_id = 0;
    std::vector<NodeId> informed;               // discovery order
    std::vector<char> seen;                     // node -> received this request
    int round = 0;
    std::vector<std::int64_t> messages_per_round;  // messages sent in round t (index t-1)

    std::size_t informed_count() const { return informed.size(); }
    bool has_seen(NodeId node) const { return seen[node] != 0; }
};

GossipState init_gossip(const Graph& g, const std::vector<NodeId>& seed_nodes,
                        const GossipParams& params, std::uint64_t request_id = 0);

// Advances one round. Returns false (and leaves the state untouched) when the
// state is already at TTL.
bool gossip_step(GossipState& state, const Graph& g, const GossipParams& params,
                 RngStream& rng);

// True while at least one uninformed node has an informed neighbor.
bool growth_possible(const GossipState& state, const Graph& g);

struct TraceRow {
    int round = 0;
    std::size_t informed = 0;      // s_t
    std::int64_t messages = 0;     // transmissions during this round
};

// Runs gossip_step until TTL or until no further growth is possible,
// whichever comes first. Row 0 is the initial state.
std::vector<TraceRow> run_gossip(const Graph& g, const std::vector<NodeId>& seeds,
                                 const GossipParams& params, RngStream& rng);

// First-order expectation of s_{t+1}: s_t plus p times the number of
// (informed node, uninformed neighbor) pairs. Ignores the chance of several
// informed neighbors reaching the same node in one round, so it overestimates
// near saturation; Monte Carlo is the ground truth.
double expected_new_recipients(const GossipState& state, const Graph& g, double p);

// Closed-form coverage estimate N * (1 - exp(-p * mean_degree * t / N)).
double analytic_coverage(std::size_t n, double mean_degree, double p, int t);

// K * sum_{t=0..ttl} p * mean_degree * s_t over the supplied coverage trace.
// Throws if the trace is shorter than ttl + 1 entries.
double expected_total_messages(int request_count, double p, double mean_degree,
                               const std::vector<double>& coverage_trace, int ttl);

struct EnsembleResult {
    std::vector<std::vector<TraceRow>> traces;  // one per trial
    std::vector<double> mean_informed;          // padded with each trial's final s
    std::vector<double> mean_messages;
    std::int64_t total_messages = 0;
};

// Independent trials with per-trial derived streams; trial i is identical no
// matter how many trials run or in which order. The default entry point runs
// trials in parallel when OpenMP is enabled; the serial variant is the
// reference implementation.
EnsembleResult run_ensemble(const Graph& g, const std::vector<NodeId>& seeds,
                            const GossipParams& params, std::uint64_t master_seed,
                            std::size_t trials);
EnsembleResult run_ensemble_serial(const Graph& g, const std::vector<NodeId>& seeds,
                                   const GossipParams& params,
                                   std::uint64_t master_seed, std::size_t trials);

}  // namespace isek

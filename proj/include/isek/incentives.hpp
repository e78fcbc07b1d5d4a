#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "isek/ledger.hpp"
#include "isek/types.hpp"

namespace isek {

struct AgentStats {
    std::uint64_t successes = 0;       // S_i
    std::uint64_t attempts = 0;        // A_i
    std::uint64_t completed = 0;       // C_i
    std::uint64_t claimed = 0;         // P_i
    double median_peer_time = 0.0;     // t_m
    double own_time = 0.0;             // t_i
};

// S_i / A_i; zero attempts is a flagged cold start, not an error.
double success_rate(const AgentStats& stats);

// min(1, t_m / t_i); both times must be positive.
double speed_score(double median_peer_time, double own_time);

// C_i / P_i; zero claims is a flagged cold start.
double completion_rate(const AgentStats& stats);

struct IncentiveWeights {
    double alpha = 0.5;
    double beta = 0.3;
    double gamma = 0.2;
};

void validate(const IncentiveWeights& weights);  // each in [0,1], sum 1 ± 1e-9

// R_i = α·SR + β·SS + γ·CR, a convex combination staying in [0,1].
double composite_score(double sr, double ss, double cr, const IncentiveWeights& weights);

struct StakeParams {
    Tokens base_stake = 0;              // S₀ > 0
    double complexity_multiplier = 1.0;  // τ ≥ 1 (staking sense, not the deadline)
};

void validate(const StakeParams& params);

// S₀ · τ · (1 − R), rounded half-up to whole tokens.
Tokens required_stake(const StakeParams& params, double composite);

struct OrchestratorStats {
    double match_efficiency = 0.0;          // M_j
    double coordination_reliability = 0.0;  // F_j
    double weight_delta = 0.5;              // δ
    double weight_epsilon = 0.5;            // ε, δ + ε = 1
};

void validate(const OrchestratorStats& stats);

// O_j = δ·M_j + ε·F_j.
double orchestrator_score(const OrchestratorStats& stats);

// Splits `total` proportionally to the non-negative weights so the integer
// parts sum exactly to `total`: floor shares first, then one extra token per
// largest fractional remainder (ties favor the lower index).
std::vector<Tokens> split_by_largest_remainder(const std::vector<double>& weights,
                                               Tokens total);

// Pays pool_account's C_T out proportionally to the O_j scores. All-zero
// scores leave the pool untouched (flagged). Returns the payments made.
std::vector<std::pair<AgentId, Tokens>> distribute_orchestrator_pool(
    const std::vector<std::pair<AgentId, double>>& scores, Tokens pool,
    AgentId pool_account, Ledger& ledger);

struct Bid {
    AgentId agent = 0;
    Tokens price = 0;
    double projected_quality = 0.0;       // in [0,1]
    double projected_completion = 0.0;    // sim-time units, > 0
};

struct BidWeights {
    double quality = 0.5;
    double time = 0.3;
    double price = 0.2;
};

// w_q·quality + w_t·max(0, 1 − completion/deadline) − w_p·(price/bounty).
double bid_score(const Bid& bid, double deadline, Tokens bounty,
                 const BidWeights& weights);

struct BidOutcome {
    Bid winner;
    std::vector<Bid> ranked;  // winner first, runner-ups in score order
};

// Orders bids by score; ties prefer the higher composite reputation, then the
// lower agent id. `reputations` maps agent id to composite reputation
// (missing agents default to the 0.5 prior).
BidOutcome evaluate_bids(const std::vector<Bid>& bids, double deadline, Tokens bounty,
                         const BidWeights& weights,
                         const std::map<AgentId, double>& reputations);

}  // namespace isek

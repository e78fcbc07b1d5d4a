#include "isek/incentives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "isek/log.hpp"

namespace isek {

namespace {

void check_unit_interval(double value, const char* what) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw std::invalid_argument(std::string("incentives: ") + what +
                                    " must lie in [0, 1], got " + std::to_string(value));
    }
}

}  // namespace

double success_rate(const AgentStats& stats) {
    if (stats.successes > stats.attempts) {
        throw std::invalid_argument("incentives: successes exceed attempts");
    }
    if (stats.attempts == 0) {
        warn("incentives: success rate of an agent with no attempts is 0 (cold start)");
        return 0.0;
    }
    return static_cast<double>(stats.successes) / static_cast<double>(stats.attempts);
}

double speed_score(double median_peer_time, double own_time) {
    if (!(median_peer_time > 0.0) || !(own_time > 0.0)) {
        throw std::invalid_argument("incentives: speed score needs positive times, got t_m=" +
                                    std::to_string(median_peer_time) +
                                    ", t_i=" + std::to_string(own_time));
    }
    return std::min(1.0, median_peer_time / own_time);
}

double completion_rate(const AgentStats& stats) {
    if (stats.completed > stats.claimed) {
        throw std::invalid_argument("incentives: completions exceed claims");
    }
    if (stats.claimed == 0) {
        warn("incentives: completion rate of an agent with no claims is 0 (cold start)");
        return 0.0;
    }
    return static_cast<double>(stats.completed) / static_cast<double>(stats.claimed);
}

void validate(const IncentiveWeights& weights) {
    check_unit_interval(weights.alpha, "alpha");
    check_unit_interval(weights.beta, "beta");
    check_unit_interval(weights.gamma, "gamma");
    const double sum = weights.alpha + weights.beta + weights.gamma;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("incentives: weights must sum to 1, got " +
                                    std::to_string(sum));
    }
}

double composite_score(double sr, double ss, double cr, const IncentiveWeights& weights) {
    validate(weights);
    check_unit_interval(sr, "success rate");
    check_unit_interval(ss, "speed score");
    check_unit_interval(cr, "completion rate");
    return weights.alpha * sr + weights.beta * ss + weights.gamma * cr;
}

void validate(const StakeParams& params) {
    if (params.base_stake <= 0) {
        throw std::invalid_argument("incentives: base stake must be positive");
    }
    if (params.complexity_multiplier < 1.0) {
        throw std::invalid_argument("incentives: complexity multiplier must be at least 1");
    }
}

Tokens required_stake(const StakeParams& params, double composite) {
    validate(params);
    check_unit_interval(composite, "composite score");
    const double raw =
        static_cast<double>(params.base_stake) * params.complexity_multiplier *
        (1.0 - composite);
    return static_cast<Tokens>(std::llround(raw));
}

void validate(const OrchestratorStats& stats) {
    check_unit_interval(stats.match_efficiency, "match efficiency");
    check_unit_interval(stats.coordination_reliability, "coordination reliability");
    check_unit_interval(stats.weight_delta, "delta");
    check_unit_interval(stats.weight_epsilon, "epsilon");
    if (std::abs(stats.weight_delta + stats.weight_epsilon - 1.0) > 1e-9) {
        throw std::invalid_argument("incentives: orchestrator weights must sum to 1");
    }
}

double orchestrator_score(const OrchestratorStats& stats) {
    validate(stats);
    return stats.weight_delta * stats.match_efficiency +
           stats.weight_epsilon * stats.coordination_reliability;
}

std::vector<Tokens> split_by_largest_remainder(const std::vector<double>& weights,
                                               Tokens total) {
    if (total < 0) {
        throw std::invalid_argument("incentives: cannot split a negative total");
    }
    double weight_sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) {
            throw std::invalid_argument("incentives: split weights must be non-negative");
        }
        weight_sum += w;
    }
    if (weights.empty() || weight_sum <= 0.0) {
        throw std::invalid_argument("incentives: split needs at least one positive weight");
    }
    std::vector<Tokens> shares(weights.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;  // (-fraction, index)
    Tokens assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = static_cast<double>(total) * weights[i] / weight_sum;
        shares[i] = static_cast<Tokens>(std::floor(exact));
        assigned += shares[i];
        remainders.push_back({-(exact - std::floor(exact)), i});
    }
    std::sort(remainders.begin(), remainders.end());  // largest fraction, then lowest index
    Tokens leftover = total - assigned;
    for (std::size_t i = 0; leftover > 0 && i < remainders.size(); ++i, --leftover) {
        shares[remainders[i].second] += 1;
    }
    return shares;
}

std::vector<std::pair<AgentId, Tokens>> distribute_orchestrator_pool(
    const std::vector<std::pair<AgentId, double>>& scores, Tokens pool,
    AgentId pool_account, Ledger& ledger) {
    if (pool < 0) {
        throw std::invalid_argument("incentives: pool must be non-negative");
    }
    if (scores.empty()) {
        throw std::invalid_argument("incentives: no orchestrators to pay");
    }
    std::vector<double> weights;
    weights.reserve(scores.size());
    bool any_positive = false;
    for (const auto& [agent, score] : scores) {
        check_unit_interval(score, "orchestrator score");
        weights.push_back(score);
        any_positive = any_positive || score > 0.0;
    }
    if (!any_positive) {
        warn("incentives: all orchestrator scores are zero; pool retained");
        return {};
    }
    const std::vector<Tokens> shares = split_by_largest_remainder(weights, pool);
    std::vector<std::pair<AgentId, Tokens>> payments;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (shares[i] > 0) {
            ledger.transfer(pool_account, scores[i].first, shares[i]);
            payments.push_back({scores[i].first, shares[i]});
        }
    }
    return payments;
}

double bid_score(const Bid& bid, double deadline, Tokens bounty, const BidWeights& weights) {
    if (!(deadline > 0.0)) {
        throw std::invalid_argument("incentives: bid scoring needs a positive deadline");
    }
    if (bounty <= 0) {
        throw std::invalid_argument("incentives: bid scoring needs a positive bounty");
    }
    if (!(bid.projected_completion > 0.0)) {
        throw std::invalid_argument("incentives: projected completion must be positive");
    }
    check_unit_interval(bid.projected_quality, "projected quality");
    const double time_margin = std::max(0.0, 1.0 - bid.projected_completion / deadline);
    const double price_ratio = static_cast<double>(bid.price) / static_cast<double>(bounty);
    return weights.quality * bid.projected_quality + weights.time * time_margin -
           weights.price * price_ratio;
}

BidOutcome evaluate_bids(const std::vector<Bid>& bids, double deadline, Tokens bounty,
                         const BidWeights& weights,
                         const std::map<AgentId, double>& reputations) {
    if (bids.empty()) {
        throw std::invalid_argument("incentives: cannot evaluate an empty bid list");
    }
    struct Row {
        Bid bid;
        double score;
        double reputation;
    };
    std::vector<Row> rows;
    rows.reserve(bids.size());
    for (const Bid& bid : bids) {
        if (bid.price > bounty) {
            throw std::invalid_argument("incentives: bid price " + std::to_string(bid.price) +
                                        " exceeds the bounty " + std::to_string(bounty));
        }
        auto it = reputations.find(bid.agent);
        const double reputation = it == reputations.end() ? 0.5 : it->second;
        rows.push_back({bid, bid_score(bid, deadline, bounty, weights), reputation});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.reputation != b.reputation) {
            return a.reputation > b.reputation;
        }
        return a.bid.agent < b.bid.agent;
    });
    BidOutcome outcome;
    outcome.winner = rows.front().bid;
    for (const Row& row : rows) {
        outcome.ranked.push_back(row.bid);
    }
    return outcome;
}

}  // namespace isek

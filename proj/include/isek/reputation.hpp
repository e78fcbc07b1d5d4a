#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "isek/types.hpp"

namespace isek {

inline constexpr double kRatingDecay = 0.1;      // EMA λ for peer ratings
inline constexpr double kColdStartPrior = 0.5;   // axis prior before any rating
inline constexpr double kRateLimitThreshold = 0.3;
inline constexpr int kRateLimitCap = 1;

/**
 * Post-task standing of one agent: four peer-rated axes (EMA-smoothed),
 * outcome counters, token reward/penalty totals, and the set of completed
 * task classes. A task's class is its sorted tag set, so one completed task
 * adds at most one class and diversity never exceeds the completion count.
 */
struct ReputationRecord {
    double accuracy = kColdStartPrior;
    double latency = kColdStartPrior;
    double communication = kColdStartPrior;
    double reliability = kColdStartPrior;
    std::uint64_t rating_count = 0;

    std::uint64_t outcomes_applied = 0;
    std::uint64_t success_count = 0;
    double weighted_successes = 0.0;  // complexity (τ) weighted
    double weighted_outcomes = 0.0;
    Tokens reward_total = 0;
    Tokens penalty_total = 0;
    std::set<std::string> diversity_classes;
    TagSet completed_tags;  // union over successfully completed tasks

    double success_rate() const;
    double reward_penalty_ratio() const;  // penalty denominator floored at 1
    std::size_t task_diversity() const { return diversity_classes.size(); }
};

// Mean of the four axes; 0.5 before the first rating.
double composite_reputation(const ReputationRecord& record);

// Below-threshold agents may hold at most `cap` concurrent tasks.
bool rate_limit_check(const ReputationRecord& record, double threshold,
                      std::uint64_t active_tasks, std::uint64_t cap);

struct AgentCard {
    AgentId id = 0;
    TagSet tags;        // capability tags (matchmaking)
    TagSet attributes;  // policy attributes A_i (access control)
    std::string endpoint;
    ReputationRecord reputation;
    double latency_indicator = 1.0;  // EMA-smoothed completion time
    std::vector<std::string> function_signatures;
};

struct TaskOutcome {
    std::uint64_t outcome_id = 0;
    AgentId agent = 0;
    bool success = false;
    Tokens reward = 0;
    Tokens penalty = 0;
    TagSet task_tags;
    double observed_latency = 0.0;        // 0 when the agent never finished
    double complexity_multiplier = 1.0;   // staking τ of the task
};

struct AxisRating {
    double accuracy = 0.0;
    double latency = 0.0;
    double communication = 0.0;
    double reliability = 0.0;
};

/**
 * Owns the agent cards and enforces the rating rules: no self-ratings, and
 * raters must share a settled task with the ratee.
 */
class ReputationStore {
public:
    void register_agent(AgentCard card);          // duplicate id rejected
    bool has_agent(AgentId id) const;
    const AgentCard& card(AgentId id) const;      // unknown id rejected
    std::vector<AgentId> agent_ids() const;
    std::size_t size() const { return cards_.size(); }

    // Remembers who took part in a settled task; feeds the rating guard.
    void register_settlement(TaskId task, const std::set<AgentId>& participants);

    // EMA-folds one four-axis peer rating into the ratee's record.
    void record_rating(AgentId rater, AgentId ratee, const AxisRating& axes);

    // Applies a task outcome to the agent's counters; replays of the same
    // outcome id are rejected.
    void update_card(const TaskOutcome& outcome);

    // Direct mutation for simulation bookkeeping (tags of replicas etc.).
    AgentCard& mutable_card(AgentId id);

private:
    std::map<AgentId, AgentCard> cards_;
    std::map<AgentId, std::set<std::uint64_t>> applied_outcomes_;
    std::map<TaskId, std::set<AgentId>> settlements_;
};

// The diversity class of a task: its tags joined in sorted order.
std::string tag_class(const TagSet& tags);

}  // namespace isek

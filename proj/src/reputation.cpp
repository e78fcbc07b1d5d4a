#include "isek/reputation.hpp"

#include <algorithm>
#include <stdexcept>

#include "isek/log.hpp"

namespace isek {

namespace {

void check_unit_interval(double value, const char* what) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw std::invalid_argument(std::string("reputation: ") + what +
                                    " must lie in [0, 1], got " + std::to_string(value));
    }
}

double ema(double old_value, double rating) {
    return (1.0 - kRatingDecay) * old_value + kRatingDecay * rating;
}

}  // namespace

double ReputationRecord::success_rate() const {
    if (weighted_outcomes <= 0.0) {
        return 0.0;
    }
    return weighted_successes / weighted_outcomes;
}

double ReputationRecord::reward_penalty_ratio() const {
    const double penalty = static_cast<double>(std::max<Tokens>(penalty_total, 1));
    return static_cast<double>(reward_total) / penalty;
}

double composite_reputation(const ReputationRecord& record) {
    if (record.rating_count == 0) {
        return kColdStartPrior;
    }
    return (record.accuracy + record.latency + record.communication + record.reliability) /
           4.0;
}

bool rate_limit_check(const ReputationRecord& record, double threshold,
                      std::uint64_t active_tasks, std::uint64_t cap) {
    if (composite_reputation(record) >= threshold) {
        return true;
    }
    return active_tasks < cap;
}

std::string tag_class(const TagSet& tags) {
    std::string cls;
    for (const auto& tag : tags) {  // TagSet iterates in sorted order
        if (!cls.empty()) {
            cls += '+';
        }
        cls += tag;
    }
    return cls;
}

void ReputationStore::register_agent(AgentCard card) {
    const AgentId id = card.id;
    if (!cards_.emplace(id, std::move(card)).second) {
        throw std::invalid_argument("reputation: agent " + std::to_string(id) +
                                    " is already registered");
    }
}

bool ReputationStore::has_agent(AgentId id) const {
    return cards_.count(id) != 0;
}

const AgentCard& ReputationStore::card(AgentId id) const {
    auto it = cards_.find(id);
    if (it == cards_.end()) {
        throw std::out_of_range("reputation: unknown agent " + std::to_string(id));
    }
    return it->second;
}

AgentCard& ReputationStore::mutable_card(AgentId id) {
    auto it = cards_.find(id);
    if (it == cards_.end()) {
        throw std::out_of_range("reputation: unknown agent " + std::to_string(id));
    }
    return it->second;
}

std::vector<AgentId> ReputationStore::agent_ids() const {
    std::vector<AgentId> ids;
    ids.reserve(cards_.size());
    for (const auto& [id, card] : cards_) {
        ids.push_back(id);
    }
    return ids;
}

void ReputationStore::register_settlement(TaskId task,
                                          const std::set<AgentId>& participants) {
    settlements_[task].insert(participants.begin(), participants.end());
}

void ReputationStore::record_rating(AgentId rater, AgentId ratee, const AxisRating& axes) {
    if (rater == ratee) {
        throw std::invalid_argument("reputation: agent " + std::to_string(rater) +
                                    " may not rate itself");
    }
    check_unit_interval(axes.accuracy, "accuracy rating");
    check_unit_interval(axes.latency, "latency rating");
    check_unit_interval(axes.communication, "communication rating");
    check_unit_interval(axes.reliability, "reliability rating");
    const bool shared_task = std::any_of(
        settlements_.begin(), settlements_.end(), [&](const auto& entry) {
            return entry.second.count(rater) != 0 && entry.second.count(ratee) != 0;
        });
    if (!shared_task) {
        throw std::invalid_argument("reputation: " + std::to_string(rater) + " and " +
                                    std::to_string(ratee) +
                                    " never shared a settled task");
    }
    ReputationRecord& record = mutable_card(ratee).reputation;
    record.accuracy = ema(record.accuracy, axes.accuracy);
    record.latency = ema(record.latency, axes.latency);
    record.communication = ema(record.communication, axes.communication);
    record.reliability = ema(record.reliability, axes.reliability);
    record.rating_count += 1;
}

void ReputationStore::update_card(const TaskOutcome& outcome) {
    AgentCard& card = mutable_card(outcome.agent);
    if (outcome.complexity_multiplier < 1.0) {
        throw std::invalid_argument("reputation: complexity multiplier must be >= 1");
    }
    auto& applied = applied_outcomes_[outcome.agent];
    if (!applied.insert(outcome.outcome_id).second) {
        throw std::invalid_argument("reputation: outcome " +
                                    std::to_string(outcome.outcome_id) +
                                    " was already applied to agent " +
                                    std::to_string(outcome.agent));
    }
    ReputationRecord& record = card.reputation;
    record.outcomes_applied += 1;
    record.weighted_outcomes += outcome.complexity_multiplier;
    if (outcome.success) {
        record.success_count += 1;
        record.weighted_successes += outcome.complexity_multiplier;
        record.diversity_classes.insert(tag_class(outcome.task_tags));
        record.completed_tags.insert(outcome.task_tags.begin(), outcome.task_tags.end());
    }
    record.reward_total += outcome.reward;
    record.penalty_total += outcome.penalty;
    if (outcome.observed_latency > 0.0) {
        card.latency_indicator = ema(card.latency_indicator, outcome.observed_latency);
    }
}

}  // namespace isek

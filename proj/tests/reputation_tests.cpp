#include <stdexcept>
#include <string>

#include "doctest.h"
#include "isek/reputation.hpp"

using isek::AgentCard;
using isek::AxisRating;
using isek::ReputationRecord;
using isek::ReputationStore;
using isek::TaskOutcome;

namespace {

ReputationStore store_with_pair() {
    ReputationStore store;
    AgentCard a;
    a.id = 1;
    AgentCard b;
    b.id = 2;
    store.register_agent(a);
    store.register_agent(b);
    store.register_settlement(10, {1, 2});
    return store;
}

TaskOutcome success_outcome(std::uint64_t id, isek::AgentId agent) {
    TaskOutcome outcome;
    outcome.outcome_id = id;
    outcome.agent = agent;
    outcome.success = true;
    outcome.reward = 10;
    outcome.task_tags = {"nlp", "summarize"};
    outcome.complexity_multiplier = 1.0;
    return outcome;
}

}  // namespace

TEST_SUITE("reputation") {

TEST_CASE("a first perfect rating moves each axis from the prior to 0.55") {
    ReputationStore store = store_with_pair();
    store.record_rating(1, 2, {1.0, 1.0, 1.0, 1.0});
    const ReputationRecord& record = store.card(2).reputation;
    CHECK(record.accuracy == doctest::Approx(0.55));
    CHECK(record.latency == doctest::Approx(0.55));
    CHECK(record.communication == doctest::Approx(0.55));
    CHECK(record.reliability == doctest::Approx(0.55));
    CHECK(record.rating_count == 1);
}

TEST_CASE("a rating equal to the current value is an EMA fixed point") {
    ReputationStore store = store_with_pair();
    store.record_rating(1, 2, {0.5, 0.5, 0.5, 0.5});
    const ReputationRecord& record = store.card(2).reputation;
    CHECK(record.accuracy == doctest::Approx(0.5));
    CHECK(record.reliability == doctest::Approx(0.5));
    CHECK(record.rating_count == 1);
}

TEST_CASE("rating guards: self, strangers, out-of-range axes, unknown agents") {
    ReputationStore store = store_with_pair();
    CHECK_THROWS_AS(store.record_rating(1, 1, {0.5, 0.5, 0.5, 0.5}),
                    std::invalid_argument);
    CHECK_THROWS_AS(store.record_rating(1, 2, {1.5, 0.5, 0.5, 0.5}),
                    std::invalid_argument);
    CHECK_THROWS_AS(store.record_rating(1, 2, {0.5, -0.1, 0.5, 0.5}),
                    std::invalid_argument);

    AgentCard stranger;
    stranger.id = 3;
    store.register_agent(stranger);
    CHECK_THROWS_WITH_AS(store.record_rating(1, 3, {0.5, 0.5, 0.5, 0.5}),
                         doctest::Contains("never shared"), std::invalid_argument);

    // An unknown ratee falls at the shared-task guard first.
    CHECK_THROWS_AS(store.record_rating(1, 99, {0.5, 0.5, 0.5, 0.5}),
                    std::invalid_argument);
    CHECK_THROWS_AS(store.card(99), std::out_of_range);
    CHECK_THROWS_AS(store.register_agent(stranger), std::invalid_argument);
}

TEST_CASE("outcomes update counters, diversity, and the reward ratio") {
    ReputationStore store = store_with_pair();
    store.update_card(success_outcome(100, 1));

    const ReputationRecord& record = store.card(1).reputation;
    CHECK(record.outcomes_applied == 1);
    CHECK(record.success_count == 1);
    CHECK(record.success_rate() == doctest::Approx(1.0));
    // Penalty denominator is floored at one token unit.
    CHECK(record.reward_penalty_ratio() == doctest::Approx(10.0));
    CHECK(record.task_diversity() == 1);
    CHECK(record.completed_tags == isek::TagSet{"nlp", "summarize"});

    // The same tag class again adds no diversity; a new class adds one.
    TaskOutcome repeat = success_outcome(101, 1);
    store.update_card(repeat);
    CHECK(store.card(1).reputation.task_diversity() == 1);

    TaskOutcome different = success_outcome(102, 1);
    different.task_tags = {"vision"};
    store.update_card(different);
    CHECK(store.card(1).reputation.task_diversity() == 2);
    CHECK(store.card(1).reputation.completed_tags ==
          isek::TagSet{"nlp", "summarize", "vision"});
}

TEST_CASE("failures weigh the success rate down without adding history") {
    ReputationStore store = store_with_pair();
    TaskOutcome failure;
    failure.outcome_id = 200;
    failure.agent = 1;
    failure.success = false;
    failure.penalty = 4;
    failure.task_tags = {"nlp"};
    failure.complexity_multiplier = 3.0;
    store.update_card(failure);

    const ReputationRecord& record = store.card(1).reputation;
    CHECK(record.outcomes_applied == 1);
    CHECK(record.success_count == 0);
    CHECK(record.success_rate() == doctest::Approx(0.0));
    CHECK(record.task_diversity() == 0);
    CHECK(record.completed_tags.empty());
    CHECK(record.penalty_total == 4);

    // A later complexity-3 success now averages against the weighted failure.
    TaskOutcome comeback = success_outcome(201, 1);
    comeback.complexity_multiplier = 3.0;
    store.update_card(comeback);
    CHECK(store.card(1).reputation.success_rate() == doctest::Approx(0.5));
}

TEST_CASE("outcome replay and invalid complexity are rejected") {
    ReputationStore store = store_with_pair();
    store.update_card(success_outcome(300, 1));
    CHECK_THROWS_WITH_AS(store.update_card(success_outcome(300, 1)),
                         doctest::Contains("already applied"), std::invalid_argument);
    // The same outcome id belongs to a different agent's history: allowed.
    CHECK_NOTHROW(store.update_card(success_outcome(300, 2)));

    TaskOutcome fractional = success_outcome(301, 1);
    fractional.complexity_multiplier = 0.5;
    CHECK_THROWS_AS(store.update_card(fractional), std::invalid_argument);
    // The rejected outcome id was not consumed.
    CHECK_NOTHROW(store.update_card(success_outcome(301, 1)));
}

TEST_CASE("observed latency folds into the card indicator") {
    ReputationStore store = store_with_pair();
    CHECK(store.card(1).latency_indicator == doctest::Approx(1.0));
    TaskOutcome timed = success_outcome(400, 1);
    timed.observed_latency = 11.0;
    store.update_card(timed);
    CHECK(store.card(1).latency_indicator == doctest::Approx(0.9 * 1.0 + 0.1 * 11.0));

    TaskOutcome untimed = success_outcome(401, 1);
    untimed.observed_latency = 0.0;  // never finished: indicator untouched
    store.update_card(untimed);
    CHECK(store.card(1).latency_indicator == doctest::Approx(2.0));
}

TEST_CASE("composite reputation means the axes after the first rating") {
    ReputationRecord cold;
    CHECK(isek::composite_reputation(cold) == doctest::Approx(0.5));
    cold.accuracy = 1.0;  // still cold: rating_count is zero
    CHECK(isek::composite_reputation(cold) == doctest::Approx(0.5));

    ReputationRecord rated;
    rated.accuracy = 1.0;
    rated.latency = 0.0;
    rated.communication = 1.0;
    rated.reliability = 0.0;
    rated.rating_count = 1;
    CHECK(isek::composite_reputation(rated) == doctest::Approx(0.5));
    rated.latency = 1.0;
    rated.reliability = 1.0;
    CHECK(isek::composite_reputation(rated) == doctest::Approx(1.0));
}

TEST_CASE("rate limiting binds only below the threshold") {
    ReputationRecord strong;
    strong.accuracy = strong.latency = strong.communication = strong.reliability = 0.9;
    strong.rating_count = 1;
    CHECK(isek::rate_limit_check(strong, 0.3, 100, 1));

    ReputationRecord weak;
    weak.accuracy = weak.latency = weak.communication = weak.reliability = 0.2;
    weak.rating_count = 1;
    CHECK(isek::rate_limit_check(weak, 0.3, 0, 1));
    CHECK_FALSE(isek::rate_limit_check(weak, 0.3, 1, 1));
    CHECK_FALSE(isek::rate_limit_check(weak, 0.3, 2, 1));

    // At the threshold exactly the agent is unrestricted.
    ReputationRecord border;
    border.accuracy = border.latency = border.communication = border.reliability = 0.3;
    border.rating_count = 1;
    CHECK(isek::rate_limit_check(border, 0.3, 5, 1));
}

TEST_CASE("tag classes join sorted tags with plus signs") {
    CHECK(isek::tag_class({"b", "a", "c"}) == "a+b+c");
    CHECK(isek::tag_class({"solo"}) == "solo");
    CHECK(isek::tag_class({}) == "");
}

TEST_CASE("store bookkeeping: ids, size, mutation") {
    ReputationStore store = store_with_pair();
    CHECK(store.size() == 2);
    CHECK(store.has_agent(1));
    CHECK_FALSE(store.has_agent(3));
    CHECK(store.agent_ids() == std::vector<isek::AgentId>{1, 2});
    store.mutable_card(1).tags.insert("new-skill");
    CHECK(store.card(1).tags.count("new-skill") == 1);
}

}  // TEST_SUITE

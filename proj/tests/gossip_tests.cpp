#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "isek/gossip.hpp"
#include "isek/rng.hpp"
#include "isek/topology.hpp"

using isek::GossipParams;
using isek::GossipState;
using isek::Graph;
using isek::NodeId;
using isek::RngStream;
using isek::TopologyKind;
using isek::TraceRow;

namespace {

Graph star_graph(std::size_t leaves) {
    Graph g(leaves + 1, TopologyKind::random);
    for (NodeId leaf = 1; leaf <= leaves; ++leaf) {
        g.add_edge(0, leaf);
    }
    return g;
}

Graph path_graph(std::size_t n) {
    Graph g(n, TopologyKind::random);
    for (NodeId node = 0; node + 1 < n; ++node) {
        g.add_edge(node, node + 1);
    }
    return g;
}

Graph triangle() {
    Graph g(3, TopologyKind::random);
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    g.add_edge(0, 2);
    return g;
}

bool traces_equal(const std::vector<TraceRow>& a, const std::vector<TraceRow>& b) {
    if (a.size() != b.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].round != b[i].round || a[i].informed != b[i].informed ||
            a[i].messages != b[i].messages) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_SUITE("gossip") {

TEST_CASE("first-order prediction on a star: informed center, four leaves") {
    const Graph g = star_graph(4);
    const GossipParams params{0.5, 1, 1};
    const GossipState state = isek::init_gossip(g, {0}, params);
    // s_t + p * |frontier pairs| = 1 + 0.5 * 4
    CHECK(isek::expected_new_recipients(state, g, 0.5) == doctest::Approx(3.0));
}

TEST_CASE("Monte Carlo mean new recipients on the star matches p*leaves") {
    const Graph g = star_graph(4);
    const GossipParams params{0.5, 1, 1};
    const std::size_t trials = 10000;
    double new_recipients = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        GossipState state = isek::init_gossip(g, {0}, params);
        RngStream rng = RngStream::derive(2024, isek::stream::gossip, trial);
        isek::gossip_step(state, g, params, rng);
        new_recipients += static_cast<double>(state.informed_count() - 1);
    }
    const double mean = new_recipients / static_cast<double>(trials);
    CHECK(std::abs(mean - 2.0) <= 0.1);
}

TEST_CASE("closed-form coverage value") {
    // 1000 * (1 - exp(-0.2 * 8 * 100 / 1000))
    CHECK(isek::analytic_coverage(1000, 8.0, 0.2, 100) ==
          doctest::Approx(147.8562110337887).epsilon(1e-9));
    CHECK(isek::analytic_coverage(1000, 8.0, 0.2, 0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(isek::analytic_coverage(0, 8.0, 0.2, 1), std::invalid_argument);
}

TEST_CASE("message estimate sums p*d*s_t over the trace") {
    // 2 requests * (0.5 * 4 * 1 + 0.5 * 4 * 1)
    CHECK(isek::expected_total_messages(2, 0.5, 4.0, {1.0, 1.0}, 1) ==
          doctest::Approx(8.0));
    CHECK_THROWS_AS(isek::expected_total_messages(1, 0.5, 4.0, {1.0}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(isek::expected_total_messages(1, 0.5, 4.0, {1.0}, -1),
                    std::invalid_argument);
}

TEST_CASE("certain forwarding walks a path one hop per round") {
    const Graph g = path_graph(3);
    const GossipParams params{1.0, 2, 1};
    RngStream rng(7);
    const std::vector<TraceRow> trace = isek::run_gossip(g, {0}, params, rng);
    REQUIRE(trace.size() == 3);
    CHECK(trace[0].informed == 1);
    CHECK(trace[1].informed == 2);
    CHECK(trace[2].informed == 3);
    CHECK(trace[0].messages == 0);
    CHECK(trace[1].messages == 1);  // 0 -> 1
    CHECK(trace[2].messages == 3);  // 0 -> 1 again plus 1 -> {0, 2}
}

TEST_CASE("zero ttl yields only the initial row") {
    const Graph g = path_graph(3);
    RngStream rng(7);
    const std::vector<TraceRow> trace = isek::run_gossip(g, {0}, {1.0, 0, 1}, rng);
    REQUIRE(trace.size() == 1);
    CHECK(trace[0].round == 0);
    CHECK(trace[0].informed == 1);
}

TEST_CASE("stepping past the ttl refuses and leaves the state untouched") {
    const Graph g = triangle();
    const GossipParams params{1.0, 1, 1};
    GossipState state = isek::init_gossip(g, {0}, params);
    RngStream rng(3);
    CHECK(isek::gossip_step(state, g, params, rng));
    const std::size_t informed = state.informed_count();
    const int round = state.round;
    CHECK_FALSE(isek::gossip_step(state, g, params, rng));
    CHECK(state.informed_count() == informed);
    CHECK(state.round == round);
    CHECK(state.messages_per_round.size() == 1);
}

TEST_CASE("duplicate deliveries cost messages but never re-inform") {
    const Graph g = triangle();
    const GossipParams params{1.0, 2, 1};
    GossipState state = isek::init_gossip(g, {0}, params);
    RngStream rng(3);
    isek::gossip_step(state, g, params, rng);
    CHECK(state.informed_count() == 3);
    CHECK(state.messages_per_round[0] == 2);
    isek::gossip_step(state, g, params, rng);  // saturated: all six sends duplicate
    CHECK(state.informed_count() == 3);
    CHECK(state.messages_per_round[1] == 6);
}

TEST_CASE("run_gossip stops as soon as growth is impossible") {
    const Graph g = path_graph(3);
    RngStream rng(7);
    const std::vector<TraceRow> trace = isek::run_gossip(g, {0}, {1.0, 50, 1}, rng);
    CHECK(trace.size() == 3);  // saturated after two rounds, not fifty
    CHECK(trace.back().informed == 3);
}

TEST_CASE("growth_possible tracks the uninformed frontier") {
    Graph g(4, TopologyKind::random);
    g.add_edge(0, 1);
    g.add_edge(2, 3);
    const GossipParams params{1.0, 5, 1};
    GossipState state = isek::init_gossip(g, {0}, params);
    CHECK(isek::growth_possible(state, g));
    RngStream rng(1);
    isek::gossip_step(state, g, params, rng);
    CHECK(state.informed_count() == 2);
    // The informed component is saturated; nodes 2 and 3 are unreachable.
    CHECK_FALSE(isek::growth_possible(state, g));
}

TEST_CASE("coverage growth on a ring respects the branching bound") {
    const Graph g = isek::generate_graph(32, 2.0, TopologyKind::ring, 4);
    const GossipParams params{0.7, 10, 1};
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        RngStream rng(seed);
        const std::vector<TraceRow> trace = isek::run_gossip(g, {0}, params, rng);
        double bound = 1.0;
        std::size_t previous = 0;
        for (const TraceRow& row : trace) {
            CHECK(static_cast<double>(row.informed) <= bound + 1e-9);
            CHECK(row.informed >= previous);  // coverage never shrinks
            previous = row.informed;
            bound *= 1.0 + g.mean_degree();
        }
    }
}

TEST_CASE("seed handling in init_gossip") {
    const Graph g = triangle();
    const GossipParams params{0.5, 2, 1};
    const GossipState state = isek::init_gossip(g, {2, 0, 2}, params, 77);
    CHECK(state.request_id == 77);
    CHECK(state.informed_count() == 2);  // duplicate seed collapses
    CHECK(state.has_seen(0));
    CHECK(state.has_seen(2));
    CHECK_FALSE(state.has_seen(1));
    CHECK_THROWS_AS(isek::init_gossip(g, {}, params), std::invalid_argument);
    CHECK_THROWS_AS(isek::init_gossip(g, {9}, params), std::out_of_range);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(isek::validate(GossipParams{1.5, 2, 1}), std::invalid_argument);
    CHECK_THROWS_AS(isek::validate(GossipParams{-0.1, 2, 1}), std::invalid_argument);
    CHECK_THROWS_AS(isek::validate(GossipParams{0.5, -1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(isek::validate(GossipParams{0.5, 2, 0}), std::invalid_argument);
}

TEST_CASE("ensemble trials are independent of the trial count") {
    const Graph g = isek::generate_graph(64, 4.0, TopologyKind::small_world, 9);
    const GossipParams params{0.3, 8, 1};
    const auto small = isek::run_ensemble_serial(g, {0}, params, 123, 3);
    const auto large = isek::run_ensemble_serial(g, {0}, params, 123, 6);
    REQUIRE(small.traces.size() == 3);
    REQUIRE(large.traces.size() == 6);
    for (std::size_t trial = 0; trial < 3; ++trial) {
        CHECK(traces_equal(small.traces[trial], large.traces[trial]));
    }
    CHECK_THROWS_AS(isek::run_ensemble_serial(g, {0}, params, 123, 0),
                    std::invalid_argument);
}

TEST_CASE("ensemble means pad early-stopping trials at their final coverage") {
    const Graph g = path_graph(4);
    const GossipParams params{1.0, 10, 1};
    const auto ensemble = isek::run_ensemble_serial(g, {0}, params, 5, 4);
    REQUIRE(!ensemble.mean_informed.empty());
    CHECK(ensemble.mean_informed.front() == doctest::Approx(1.0));
    CHECK(ensemble.mean_informed.back() == doctest::Approx(4.0));
    for (std::size_t t = 1; t < ensemble.mean_informed.size(); ++t) {
        CHECK(ensemble.mean_informed[t] >= ensemble.mean_informed[t - 1]);
    }
}

}  // TEST_SUITE

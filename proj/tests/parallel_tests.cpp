#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "isek/gossip.hpp"
#include "isek/matching.hpp"
#include "isek/topology.hpp"
#include "isek/trust.hpp"

using isek::AgentCard;
using isek::Graph;
using isek::TopologyKind;

// The OpenMP kernels must agree with their serial references bit for bit:
// parallelism is an implementation detail, never an observable one.
TEST_SUITE("parallel") {

TEST_CASE("gossip ensembles match the serial reference bit for bit") {
    const Graph g = isek::generate_graph(300, 6.0, TopologyKind::small_world, 99);
    const isek::GossipParams params{0.25, 12, 1};
    for (std::uint64_t seed : {1ull, 42ull, 20260814ull}) {
        const isek::EnsembleResult parallel =
            isek::run_ensemble(g, {0}, params, seed, 32);
        const isek::EnsembleResult serial =
            isek::run_ensemble_serial(g, {0}, params, seed, 32);
        REQUIRE(parallel.traces.size() == serial.traces.size());
        for (std::size_t t = 0; t < parallel.traces.size(); ++t) {
            const auto& a = parallel.traces[t];
            const auto& b = serial.traces[t];
            REQUIRE(a.size() == b.size());
            for (std::size_t r = 0; r < a.size(); ++r) {
                CHECK(a[r].round == b[r].round);
                CHECK(a[r].informed == b[r].informed);
                CHECK(a[r].messages == b[r].messages);
            }
        }
        REQUIRE(parallel.mean_informed.size() == serial.mean_informed.size());
        for (std::size_t r = 0; r < parallel.mean_informed.size(); ++r) {
            CHECK(parallel.mean_informed[r] == serial.mean_informed[r]);
        }
    }
}

TEST_CASE("trust diffusion steps match the serial reference bit for bit") {
    const Graph g = isek::generate_graph(400, 8.0, TopologyKind::random, 7);
    isek::TrustField parallel;
    parallel.learning_rate = 0.05;
    parallel.scores.assign(g.node_count(), 0.0);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        parallel.scores[i] = static_cast<double>((i * 37) % 101) / 101.0;
    }
    isek::TrustField serial = parallel;
    for (int step = 0; step < 50; ++step) {
        isek::diffuse_step(parallel, g);
        isek::diffuse_step_serial(serial, g);
        for (std::size_t i = 0; i < g.node_count(); ++i) {
            CHECK(parallel.scores[i] == serial.scores[i]);
        }
    }
    CHECK(parallel.iteration == serial.iteration);
}

TEST_CASE("candidate generation matches the serial reference bit for bit") {
    std::vector<AgentCard> population;
    std::vector<isek::Embedding> embeddings;
    for (isek::AgentId id = 0; id < 500; ++id) {
        AgentCard card;
        card.id = id;
        for (int t = 0; t < 4; ++t) {
            card.tags.insert("skill-" + std::to_string((id * 13 + t * 7) % 40));
        }
        population.push_back(card);
        embeddings.push_back(isek::embed_card(card, 64));
    }
    isek::TaskRequest request;
    request.id = 1;
    request.requirement_tags = {"skill-0", "skill-13", "skill-26"};
    const isek::Embedding task = isek::embed_task(request, 64);

    const auto parallel = isek::generate_candidates(population, embeddings, task, 0.1);
    const auto serial =
        isek::generate_candidates_serial(population, embeddings, task, 0.1);
    REQUIRE(parallel.size() == serial.size());
    REQUIRE(!parallel.empty());
    for (std::size_t i = 0; i < parallel.size(); ++i) {
        CHECK(parallel[i].index == serial[i].index);
        CHECK(parallel[i].agent == serial[i].agent);
        CHECK(parallel[i].similarity == serial[i].similarity);
    }
}

}  // TEST_SUITE

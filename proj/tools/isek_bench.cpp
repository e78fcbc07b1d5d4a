// Compares the parallel kernels against their serial reference
// implementations: identical output is required, the speedup is informative.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "isek/gossip.hpp"
#include "isek/matching.hpp"
#include "isek/topology.hpp"
#include "isek/trust.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool traces_equal(const isek::EnsembleResult& a, const isek::EnsembleResult& b) {
    if (a.traces.size() != b.traces.size() || a.total_messages != b.total_messages) {
        return false;
    }
    for (std::size_t t = 0; t < a.traces.size(); ++t) {
        if (a.traces[t].size() != b.traces[t].size()) {
            return false;
        }
        for (std::size_t r = 0; r < a.traces[t].size(); ++r) {
            if (a.traces[t][r].informed != b.traces[t][r].informed ||
                a.traces[t][r].messages != b.traces[t][r].messages) {
                return false;
            }
        }
    }
    return true;
}

void report(const char* kernel, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-10s serial %9.1f ms   parallel %9.1f ms   speedup %5.2fx   %s\n",
                kernel, serial_ms, parallel_ms,
                parallel_ms > 0.0 ? serial_ms / parallel_ms : 0.0,
                identical ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
    bool all_identical = true;

    {
        const isek::Graph g = isek::generate_graph(2000, 8.0, isek::TopologyKind::random,
                                                   0x5eedULL);
        const isek::GossipParams params{0.3, 12, 1};
        const std::vector<isek::NodeId> seeds{0};
        constexpr std::size_t kTrials = 400;

        auto start = Clock::now();
        const isek::EnsembleResult serial =
            isek::run_ensemble_serial(g, seeds, params, 42, kTrials);
        const double serial_ms = ms_since(start);

        start = Clock::now();
        const isek::EnsembleResult parallel =
            isek::run_ensemble(g, seeds, params, 42, kTrials);
        const double parallel_ms = ms_since(start);

        const bool identical = traces_equal(serial, parallel);
        all_identical = all_identical && identical;
        report("gossip", serial_ms, parallel_ms, identical);
    }

    {
        const isek::Graph g = isek::generate_graph(20000, 8.0, isek::TopologyKind::random,
                                                   0x7157ULL);
        isek::TrustField serial_field;
        serial_field.learning_rate = 0.05;
        serial_field.scores.resize(g.node_count());
        isek::RngStream rng(99);
        for (double& score : serial_field.scores) {
            score = rng.next_double();
        }
        isek::TrustField parallel_field = serial_field;
        constexpr int kSteps = 100;

        auto start = Clock::now();
        for (int i = 0; i < kSteps; ++i) {
            serial_field = isek::diffuse_step_serial(serial_field, g);
        }
        const double serial_ms = ms_since(start);

        start = Clock::now();
        for (int i = 0; i < kSteps; ++i) {
            parallel_field = isek::diffuse_step(parallel_field, g);
        }
        const double parallel_ms = ms_since(start);

        const bool identical = serial_field.scores == parallel_field.scores;
        all_identical = all_identical && identical;
        report("trust", serial_ms, parallel_ms, identical);
    }

    {
        constexpr std::size_t kAgents = 20000;
        constexpr std::size_t kDim = 64;
        const char* pools[] = {"parse", "plan", "search", "summarize", "translate",
                               "verify", "draft", "review"};
        std::vector<isek::AgentCard> population(kAgents);
        std::vector<isek::Embedding> embeddings(kAgents);
        for (std::size_t i = 0; i < kAgents; ++i) {
            population[i].id = static_cast<isek::AgentId>(i);
            population[i].tags = {pools[i % 8], pools[(i / 8) % 8]};
            embeddings[i] = isek::embed_card(population[i], kDim);
        }
        isek::TaskRequest request;
        request.requirement_tags = {"plan", "verify"};
        const isek::Embedding query = isek::embed_task(request, kDim);
        constexpr int kRepeats = 20;

        auto start = Clock::now();
        std::vector<isek::Candidate> serial;
        for (int i = 0; i < kRepeats; ++i) {
            serial = isek::generate_candidates_serial(population, embeddings, query, 0.1);
        }
        const double serial_ms = ms_since(start);

        start = Clock::now();
        std::vector<isek::Candidate> parallel;
        for (int i = 0; i < kRepeats; ++i) {
            parallel = isek::generate_candidates(population, embeddings, query, 0.1);
        }
        const double parallel_ms = ms_since(start);

        bool identical = serial.size() == parallel.size();
        for (std::size_t i = 0; identical && i < serial.size(); ++i) {
            identical = serial[i].agent == parallel[i].agent &&
                        serial[i].similarity == parallel[i].similarity;
        }
        all_identical = all_identical && identical;
        report("matching", serial_ms, parallel_ms, identical);
    }

    return all_identical ? 0 : 1;
}

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "isek/reputation.hpp"
#include "isek/topology.hpp"

namespace isek {

struct TrustField {
    std::vector<double> scores;   // T_i per node
    double learning_rate = 0.1;   // η
    std::uint64_t iteration = 0;
};

enum class TrustInit { from_reputation, uniform_prior };

// from_reputation seeds each node with the agent's composite reputation;
// uniform_prior seeds 0.5 everywhere.
TrustField init_trust(const std::vector<AgentCard>& cards, TrustInit mode,
                      double learning_rate = 0.1);

// One synchronous neighbor-averaging sweep computed from the pre-step values:
// T_i <- T_i + η·Σ_{j∈N(i)} (T_j − T_i). The default entry point parallelizes
// over nodes when OpenMP is enabled; the serial variant is the reference.
TrustField diffuse_step(const TrustField& field, const Graph& g);
TrustField diffuse_step_serial(const TrustField& field, const Graph& g);

struct DiffusionResult {
    TrustField field;
    std::uint64_t iterations = 0;
    bool converged = false;
};

/**
 * Repeats diffuse_step until the largest per-node change falls below
 * `tolerance` (the converging step is not adopted, so an already-uniform
 * field reports zero iterations) or the iteration cap is hit. Throws when any
 * score exceeds ten times the initial magnitude — the divergence signature of
 * an unstable learning rate. `on_step` observes each adopted field.
 */
DiffusionResult diffuse_until(const TrustField& field, const Graph& g, double tolerance,
                              std::uint64_t max_iterations,
                              const std::function<void(const TrustField&)>& on_step = {});

double total_trust(const TrustField& field);

}  // namespace isek

#include "isek/trust.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "isek/log.hpp"

namespace isek {

namespace {

void check_shapes(const TrustField& field, const Graph& g) {
    if (field.scores.size() != g.node_count()) {
        throw std::invalid_argument("trust: field has " +
                                    std::to_string(field.scores.size()) +
                                    " scores but the graph has " +
                                    std::to_string(g.node_count()) + " nodes");
    }
}

double neighbor_pull(const TrustField& field, const Graph& g, NodeId node) {
    double sum = 0.0;
    const double own = field.scores[node];
    for (NodeId neighbor : g.neighbors(node)) {
        sum += field.scores[neighbor] - own;
    }
    return sum;
}

}  // namespace

TrustField init_trust(const std::vector<AgentCard>& cards, TrustInit mode,
                      double learning_rate) {
    if (cards.empty()) {
        throw std::invalid_argument("trust: cannot initialize over an empty population");
    }
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("trust: learning rate must be positive");
    }
    TrustField field;
    field.learning_rate = learning_rate;
    field.scores.reserve(cards.size());
    for (const AgentCard& card : cards) {
        field.scores.push_back(mode == TrustInit::uniform_prior
                                   ? 0.5
                                   : composite_reputation(card.reputation));
    }
    return field;
}

TrustField diffuse_step_serial(const TrustField& field, const Graph& g) {
    check_shapes(field, g);
    TrustField next = field;
    next.iteration = field.iteration + 1;
    const std::size_t n = g.node_count();
    for (std::size_t node = 0; node < n; ++node) {
        next.scores[node] =
            field.scores[node] +
            field.learning_rate * neighbor_pull(field, g, static_cast<NodeId>(node));
    }
    return next;
}

TrustField diffuse_step(const TrustField& field, const Graph& g) {
    check_shapes(field, g);
    TrustField next = field;
    next.iteration = field.iteration + 1;
    const std::int64_t n = static_cast<std::int64_t>(g.node_count());
#pragma omp parallel for schedule(static)
    for (std::int64_t node = 0; node < n; ++node) {
        next.scores[static_cast<std::size_t>(node)] =
            field.scores[static_cast<std::size_t>(node)] +
            field.learning_rate * neighbor_pull(field, g, static_cast<NodeId>(node));
    }
    return next;
}

DiffusionResult diffuse_until(const TrustField& field, const Graph& g, double tolerance,
                              std::uint64_t max_iterations,
                              const std::function<void(const TrustField&)>& on_step) {
    check_shapes(field, g);
    if (!(tolerance > 0.0)) {
        throw std::invalid_argument("trust: tolerance must be positive");
    }
    if (g.node_count() > 0 && g.max_degree() > 0 &&
        field.learning_rate >= 1. / static_cast<double>(g.max_degree())) {
        warn("trust: learning rate " + std::to_string(field.learning_rate) +
             " is at or above the stability bound 1/" + std::to_string(g.max_degree()) +
             "; diffusion may diverge");
    }
    double max_abs_initial = 0.0;
    for (double score : field.scores) {
        if (!std::isfinite(score)) {
            throw std::invalid_argument("trust: initial scores must be finite");
        }
        max_abs_initial = std::max(max_abs_initial, std::abs(score));
    }
    const double divergence_bound = 10.0 * std::max(1.0, max_abs_initial);

    DiffusionResult result;
    result.field = field;
    for (std::uint64_t it = 0; it < max_iterations; ++it) {
        TrustField next = diffuse_step(result.field, g);
        double max_delta = 0.0;
        double max_abs = 0.0;
        for (std::size_t node = 0; node < next.scores.size(); ++node) {
            max_delta =
                std::max(max_delta, std::abs(next.scores[node] - result.field.scores[node]));
            max_abs = std::max(max_abs, std::abs(next.scores[node]));
        }
        if (max_abs > divergence_bound || !std::isfinite(max_abs)) {
            throw std::runtime_error(
                "trust: diffusion diverged at iteration " + std::to_string(it + 1) +
                " with learning rate " + std::to_string(field.learning_rate) +
                " (|score| reached " + std::to_string(max_abs) + ", bound " +
                std::to_string(divergence_bound) + ")");
        }
        if (max_delta < tolerance) {
            result.converged = true;
            return result;  // the sub-tolerance step is not adopted
        }
        result.field = std::move(next);
        result.iterations += 1;
        if (on_step) {
            on_step(result.field);
        }
    }
    return result;
}

double total_trust(const TrustField& field) {
    double sum = 0.0;
    for (double score : field.scores) {
        sum += score;
    }
    return sum;
}

}  // namespace isek

#include "isek/matching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "isek/log.hpp"

namespace isek {

namespace {

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

void check_dimension(std::size_t dimension) {
    if (dimension < 8) {
        throw std::invalid_argument("matching: embedding dimension must be at least 8, got " +
                                    std::to_string(dimension));
    }
}

std::vector<double> stage_one_scores(const std::vector<Embedding>& embeddings,
                                     const Embedding& q, bool parallel) {
    std::vector<double> scores(embeddings.size());
    const std::int64_t n = static_cast<std::int64_t>(embeddings.size());
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            scores[static_cast<std::size_t>(i)] =
                similarity(q, embeddings[static_cast<std::size_t>(i)]);
        }
    } else {
        for (std::int64_t i = 0; i < n; ++i) {
            scores[static_cast<std::size_t>(i)] =
                similarity(q, embeddings[static_cast<std::size_t>(i)]);
        }
    }
    return scores;
}

std::vector<Candidate> collect_candidates(const std::vector<AgentCard>& population,
                                          const std::vector<double>& scores,
                                          double threshold) {
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > threshold) {
            candidates.push_back({i, population[i].id, scores[i]});
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                         if (a.similarity != b.similarity) {
                             return a.similarity > b.similarity;
                         }
                         return a.agent < b.agent;
                     });
    return candidates;
}

void check_population(const std::vector<AgentCard>& population,
                      const std::vector<Embedding>& embeddings) {
    if (population.size() != embeddings.size()) {
        throw std::invalid_argument("matching: population and embedding lists differ in size");
    }
}

}  // namespace

Embedding embed_tags(const TagSet& tags, std::size_t dimension) {
    check_dimension(dimension);
    Embedding embedding;
    embedding.components.assign(dimension, 0.0);
    for (const std::string& tag : tags) {
        const std::uint64_t hash = fnv1a(tag);
        const std::size_t bucket = static_cast<std::size_t>(hash % dimension);
        embedding.components[bucket] += (hash >> 63) ? 1.0 : -1.0;
    }
    double norm = 0.0;
    for (double component : embedding.components) {
        norm += component * component;
    }
    if (norm == 0.0) {
        if (tags.empty()) {
            warn("matching: embedding of an empty tag set is the zero vector");
        } else {
            warn("matching: tag hashes cancelled out; embedding is the zero vector");
        }
        return embedding;
    }
    norm = std::sqrt(norm);
    for (double& component : embedding.components) {
        component /= norm;
    }
    return embedding;
}

Embedding embed_card(const AgentCard& card, std::size_t dimension) {
    return embed_tags(card.tags, dimension);
}

Embedding embed_task(const TaskRequest& request, std::size_t dimension) {
    return embed_tags(request.requirement_tags, dimension);
}

double similarity(const Embedding& q, const Embedding& m) {
    if (q.dimension() != m.dimension()) {
        throw std::invalid_argument("matching: embeddings of dimension " +
                                    std::to_string(q.dimension()) + " and " +
                                    std::to_string(m.dimension()) + " are not comparable");
    }
    double dot = 0.0;
    double q_norm = 0.0;
    double m_norm = 0.0;
    for (std::size_t i = 0; i < q.dimension(); ++i) {
        dot += q.components[i] * m.components[i];
        q_norm += q.components[i] * q.components[i];
        m_norm += m.components[i] * m.components[i];
    }
    if (q_norm == 0.0 || m_norm == 0.0) {
        return 0.0;
    }
    return dot / (std::sqrt(q_norm) * std::sqrt(m_norm));
}

std::vector<Candidate> generate_candidates(const std::vector<AgentCard>& population,
                                           const std::vector<Embedding>& embeddings,
                                           const Embedding& q, double threshold) {
    check_population(population, embeddings);
    return collect_candidates(population, stage_one_scores(embeddings, q, true), threshold);
}

std::vector<Candidate> generate_candidates_serial(const std::vector<AgentCard>& population,
                                                  const std::vector<Embedding>& embeddings,
                                                  const Embedding& q, double threshold) {
    check_population(population, embeddings);
    return collect_candidates(population, stage_one_scores(embeddings, q, false), threshold);
}

double TagOverlapScorer::score(const TaskRequest& request, const AgentCard& card) const {
    if (request.requirement_tags.empty()) {
        warn("matching: overlap scorer saw a request without requirement tags");
        return 0.0;
    }
    std::size_t overlap = 0;
    for (const std::string& tag : request.requirement_tags) {
        overlap += card.tags.count(tag);
    }
    return static_cast<double>(overlap) /
           static_cast<double>(request.requirement_tags.size());
}

std::vector<FilteredCandidate> semantic_filter(const std::vector<AgentCard>& population,
                                               const std::vector<Candidate>& candidates,
                                               const TaskRequest& request,
                                               const SemanticScorer& scorer,
                                               double threshold) {
    std::vector<FilteredCandidate> filtered;
    for (const Candidate& candidate : candidates) {
        if (candidate.index >= population.size()) {
            throw std::out_of_range("matching: candidate index " +
                                    std::to_string(candidate.index) +
                                    " is outside the population");
        }
        double value = 0.0;
        try {
            value = scorer.score(request, population[candidate.index]);
        } catch (const std::exception& e) {
            warn("matching: scorer failed for agent " + std::to_string(candidate.agent) +
                 ": " + e.what());
            continue;
        }
        if (!(value >= 0.0 && value <= 1.0)) {
            warn("matching: scorer returned " + std::to_string(value) + " for agent " +
                 std::to_string(candidate.agent) + "; outside [0, 1], excluded");
            continue;
        }
        if (value >= threshold) {
            filtered.push_back({candidate.index, candidate.agent, candidate.similarity, value});
        }
    }
    return filtered;
}

CapabilityVector capability_vector(const RuntimeStats& stats) {
    if (!(stats.latency > 0.0)) {
        throw std::invalid_argument("matching: latency must be positive, got " +
                                    std::to_string(stats.latency));
    }
    if (stats.load < 0.0) {
        throw std::invalid_argument("matching: load must be non-negative");
    }
    CapabilityVector c;
    c.success_rate = stats.success_rate;
    c.inverse_latency = 1.0 / stats.latency;
    c.availability = stats.availability;
    if (stats.load == 0.0) {
        warn("matching: idle agent (load 0); inverse load capped at " +
             std::to_string(kInverseLoadCap));
        c.inverse_load = kInverseLoadCap;
    } else {
        c.inverse_load = std::min(kInverseLoadCap, 1.0 / stats.load);
    }
    return c;
}

double normalize_capabilities(const CapabilityVector& c,
                              const std::vector<CapabilityVector>& population) {
    if (population.empty()) {
        throw std::invalid_argument("matching: capability normalization needs a population");
    }
    const auto component = [](const CapabilityVector& v, int which) {
        switch (which) {
            case 0: return v.success_rate;
            case 1: return v.inverse_latency;
            case 2: return v.availability;
            default: return v.inverse_load;
        }
    };
    double sum = 0.0;
    for (int which = 0; which < 4; ++which) {
        double lo = component(population.front(), which);
        double hi = lo;
        for (const CapabilityVector& v : population) {
            lo = std::min(lo, component(v, which));
            hi = std::max(hi, component(v, which));
        }
        sum += (hi == lo) ? 0.5 : (component(c, which) - lo) / (hi - lo);
    }
    return sum / 4.0;
}

double history_similarity(const TaskRequest& request, const AgentCard& card) {
    const TagSet& history = card.reputation.completed_tags;
    if (history.empty() || request.requirement_tags.empty()) {
        return 0.0;
    }
    std::size_t overlap = 0;
    for (const std::string& tag : request.requirement_tags) {
        overlap += history.count(tag);
    }
    const std::size_t unions =
        request.requirement_tags.size() + history.size() - overlap;
    return static_cast<double>(overlap) / static_cast<double>(unions);
}

void validate(const RankWeights& weights) {
    for (double w : {weights.alpha, weights.beta, weights.gamma, weights.delta}) {
        if (!(w >= 0.0 && w <= 1.0)) {
            throw std::invalid_argument("matching: ranking weights must lie in [0, 1]");
        }
    }
}

std::map<AgentId, double> trust_by_agent(const std::vector<AgentCard>& population,
                                         const TrustField& trust,
                                         const std::vector<NodeId>& node_of_agent) {
    if (!node_of_agent.empty() && node_of_agent.size() != population.size()) {
        throw std::invalid_argument("matching: node mapping does not cover the population");
    }
    std::map<AgentId, double> scores;
    for (std::size_t i = 0; i < population.size(); ++i) {
        const std::size_t node = node_of_agent.empty() ? i : node_of_agent[i];
        if (node >= trust.scores.size()) {
            throw std::out_of_range("matching: node " + std::to_string(node) +
                                    " has no trust score");
        }
        scores[population[i].id] = trust.scores[node];
    }
    return scores;
}

std::vector<RankedAgent> rank(const std::vector<AgentCard>& population,
                              const std::vector<FilteredCandidate>& filtered,
                              const std::map<AgentId, CapabilityVector>& capabilities,
                              const std::map<AgentId, double>& trust_scores,
                              const TaskRequest& request, const RankWeights& weights) {
    validate(weights);
    std::vector<CapabilityVector> capability_population;
    capability_population.reserve(filtered.size());
    for (const FilteredCandidate& entry : filtered) {
        auto it = capabilities.find(entry.agent);
        if (it == capabilities.end()) {
            throw std::invalid_argument("matching: no capability stats for agent " +
                                        std::to_string(entry.agent));
        }
        capability_population.push_back(it->second);
    }
    // Shared min–max bounds, so normalization is linear in the list size and
    // exactly matches normalize_capabilities() over this population.
    const auto component = [](const CapabilityVector& v, int which) {
        switch (which) {
            case 0: return v.success_rate;
            case 1: return v.inverse_latency;
            case 2: return v.availability;
            default: return v.inverse_load;
        }
    };
    double lo[4];
    double hi[4];
    for (int which = 0; which < 4; ++which) {
        lo[which] = component(capability_population.front(), which);
        hi[which] = lo[which];
        for (const CapabilityVector& v : capability_population) {
            lo[which] = std::min(lo[which], component(v, which));
            hi[which] = std::max(hi[which], component(v, which));
        }
    }
    const auto normalized = [&](const CapabilityVector& v) {
        double sum = 0.0;
        for (int which = 0; which < 4; ++which) {
            sum += (hi[which] == lo[which])
                       ? 0.5
                       : (component(v, which) - lo[which]) / (hi[which] - lo[which]);
        }
        return sum / 4.0;
    };

    struct Row {
        AgentId agent;
        double score;
        double reputation;
    };
    std::vector<Row> rows;
    rows.reserve(filtered.size());
    for (std::size_t i = 0; i < filtered.size(); ++i) {
        const FilteredCandidate& entry = filtered[i];
        auto trust_it = trust_scores.find(entry.agent);
        if (trust_it == trust_scores.end()) {
            throw std::invalid_argument("matching: no trust score for agent " +
                                        std::to_string(entry.agent));
        }
        const AgentCard& card = population[entry.index];
        const double capability = normalized(capability_population[i]);
        const double history = history_similarity(request, card);
        const double score = weights.alpha * entry.semantic_score +
                             weights.beta * trust_it->second + weights.gamma * capability +
                             weights.delta * history;
        rows.push_back({entry.agent, score, composite_reputation(card.reputation)});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.reputation != b.reputation) {
            return a.reputation > b.reputation;
        }
        return a.agent < b.agent;
    });
    std::vector<RankedAgent> ranked;
    ranked.reserve(rows.size());
    for (const Row& row : rows) {
        ranked.push_back({row.agent, row.score});
    }
    return ranked;
}

void validate(const MatchThresholds& thresholds) {
    if (thresholds.candidate_threshold < -1.0 || thresholds.candidate_threshold > 1.0 ||
        thresholds.filter_threshold < -1.0 || thresholds.filter_threshold > 1.0) {
        throw std::invalid_argument("matching: thresholds must lie in [-1, 1]");
    }
    if (thresholds.top_k == 0) {
        throw std::invalid_argument("matching: top_k must be positive");
    }
}

MatchResult match_pipeline(const std::vector<AgentCard>& population,
                           const std::vector<Embedding>& embeddings,
                           const TaskRequest& request, const SemanticScorer& scorer,
                           const MatchThresholds& thresholds, const RankWeights& weights,
                           const std::map<AgentId, CapabilityVector>& capabilities,
                           const std::map<AgentId, double>& trust_scores,
                           std::size_t dimension) {
    if (population.empty()) {
        throw std::invalid_argument("matching: population must be non-empty");
    }
    validate(thresholds);
    const Embedding q = embed_task(request, dimension);
    MatchResult result;

    std::vector<Candidate> candidates =
        generate_candidates(population, embeddings, q, thresholds.candidate_threshold);
    result.candidate_count = candidates.size();
    if (candidates.empty()) {
        result.emptied_at = MatchStage::candidates;
        return result;
    }

    std::vector<FilteredCandidate> filtered = semantic_filter(
        population, candidates, request, scorer, thresholds.filter_threshold);
    result.filtered_count = filtered.size();
    if (filtered.empty()) {
        result.emptied_at = MatchStage::filter;
        return result;
    }

    result.ranked = rank(population, filtered, capabilities, trust_scores, request, weights);
    if (result.ranked.size() > thresholds.top_k) {
        result.ranked.resize(thresholds.top_k);
    }
    result.matched = true;
    return result;
}

}  // namespace isek

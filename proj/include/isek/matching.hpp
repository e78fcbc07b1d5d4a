#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "isek/reputation.hpp"
#include "isek/task.hpp"
#include "isek/trust.hpp"
#include "isek/types.hpp"

namespace isek {

inline constexpr double kInverseLoadCap = 10.0;  // idle agents saturate here

struct Embedding {
    std::vector<double> components;

    std::size_t dimension() const { return components.size(); }
};

// Deterministic hashed bag-of-tags embedding: each tag lands in one hash
// bucket with a hash-derived ±1 sign; the result is unit-normalized unless it
// is all-zero (tagless input, flagged via warn()).
Embedding embed_tags(const TagSet& tags, std::size_t dimension);
Embedding embed_card(const AgentCard& card, std::size_t dimension);
Embedding embed_task(const TaskRequest& request, std::size_t dimension);

// Cosine similarity; 0 when either vector has zero norm.
double similarity(const Embedding& q, const Embedding& m);

struct Candidate {
    std::size_t index = 0;  // position in the population vector
    AgentId agent = 0;
    double similarity = 0.0;
};

// Exact scan keeping agents with similarity strictly above threshold, sorted
// by similarity descending, ties by agent id ascending. The default entry
// point scores the population in parallel when OpenMP is enabled.
std::vector<Candidate> generate_candidates(const std::vector<AgentCard>& population,
                                           const std::vector<Embedding>& embeddings,
                                           const Embedding& q, double threshold);
std::vector<Candidate> generate_candidates_serial(const std::vector<AgentCard>& population,
                                                  const std::vector<Embedding>& embeddings,
                                                  const Embedding& q, double threshold);

// Stage II scorer. Implementations must return values in [0, 1]; anything
// else (or a thrown exception) excludes the agent from the filtered list.
class SemanticScorer {
public:
    virtual ~SemanticScorer() = default;
    virtual double score(const TaskRequest& request, const AgentCard& card) const = 0;
};

// Default deterministic scorer: |task tags ∩ card tags| / |task tags|.
class TagOverlapScorer : public SemanticScorer {
public:
    double score(const TaskRequest& request, const AgentCard& card) const override;
};

struct FilteredCandidate {
    std::size_t index = 0;
    AgentId agent = 0;
    double similarity = 0.0;
    double semantic_score = 0.0;
};

// Keeps candidates whose semantic score is >= threshold (inclusive, unlike
// the strict stage-one comparison). Candidate order is preserved.
std::vector<FilteredCandidate> semantic_filter(const std::vector<AgentCard>& population,
                                               const std::vector<Candidate>& candidates,
                                               const TaskRequest& request,
                                               const SemanticScorer& scorer,
                                               double threshold);

struct RuntimeStats {
    double success_rate = 0.0;  // in [0,1]
    double latency = 1.0;       // > 0
    double availability = 0.0;  // in [0,1]
    double load = 0.0;          // >= 0
};

struct CapabilityVector {
    double success_rate = 0.0;
    double inverse_latency = 0.0;
    double availability = 0.0;
    double inverse_load = 0.0;
};

// inverse_load is min(1/load, cap); an idle agent (load 0) takes the cap
// value directly and is flagged.
CapabilityVector capability_vector(const RuntimeStats& stats);

// Min–max normalizes each component across the population, then averages the
// four normalized components with equal weight. A component that is constant
// across the population contributes 0.5.
double normalize_capabilities(const CapabilityVector& c,
                              const std::vector<CapabilityVector>& population);

// Jaccard similarity between the request tags and the union of tags over the
// agent's successfully completed tasks; 0 without history.
double history_similarity(const TaskRequest& request, const AgentCard& card);

struct RankWeights {
    double alpha = 0.25;  // semantic score
    double beta = 0.25;   // trust
    double gamma = 0.25;  // normalized capabilities
    double delta = 0.25;  // history similarity
};

void validate(const RankWeights& weights);  // each weight in [0,1]

struct RankedAgent {
    AgentId agent = 0;
    double score = 0.0;
};

// Per-agent trust lookup for ranking. `node_of_agent` maps population index
// to graph node; empty means index i is node i.
std::map<AgentId, double> trust_by_agent(const std::vector<AgentCard>& population,
                                         const TrustField& trust,
                                         const std::vector<NodeId>& node_of_agent = {});

// Stage III score: alpha*semantic + beta*trust + gamma*capability + delta*
// history, descending; ties by composite reputation then agent id. Every
// filtered agent must appear in both feature maps.
std::vector<RankedAgent> rank(const std::vector<AgentCard>& population,
                              const std::vector<FilteredCandidate>& filtered,
                              const std::map<AgentId, CapabilityVector>& capabilities,
                              const std::map<AgentId, double>& trust_scores,
                              const TaskRequest& request, const RankWeights& weights);

struct MatchThresholds {
    double candidate_threshold = 0.0;  // strict > comparison
    double filter_threshold = 0.0;     // inclusive >= comparison
    std::size_t top_k = 1;
};

void validate(const MatchThresholds& thresholds);

enum class MatchStage { none, candidates, filter };

struct MatchResult {
    bool matched = false;
    MatchStage emptied_at = MatchStage::none;
    std::vector<RankedAgent> ranked;  // top-k
    std::size_t candidate_count = 0;
    std::size_t filtered_count = 0;
};

MatchResult match_pipeline(const std::vector<AgentCard>& population,
                           const std::vector<Embedding>& embeddings,
                           const TaskRequest& request, const SemanticScorer& scorer,
                           const MatchThresholds& thresholds, const RankWeights& weights,
                           const std::map<AgentId, CapabilityVector>& capabilities,
                           const std::map<AgentId, double>& trust_scores,
                           std::size_t dimension);

}  // namespace isek

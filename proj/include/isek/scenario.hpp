#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isek/gossip.hpp"
#include "isek/incentives.hpp"
#include "isek/lifecycle.hpp"
#include "isek/matching.hpp"
#include "isek/topology.hpp"
#include "isek/trust.hpp"
#include "isek/types.hpp"

namespace isek {

struct GraphSpec {
    std::size_t nodes = 16;
    double mean_degree = 4.0;
    TopologyKind kind = TopologyKind::small_world;
};

struct TrustSpec {
    double learning_rate = 0.1;
    TrustInit init = TrustInit::from_reputation;
    int steps_per_round = 1;
};

struct MatchSpec {
    std::size_t dimension = 64;
    MatchThresholds thresholds;
    RankWeights weights;
};

struct OrchestratorSpec {
    double weight_delta = 0.6;
    double weight_epsilon = 0.4;
    Tokens pool = 0;  // C_T, minted to the treasury up front
};

struct IncentiveSpec {
    IncentiveWeights weights;
    OrchestratorSpec orchestrator;
};

struct AutoscaleSpec {
    bool enabled = false;
    double cpu_threshold = 0.8;     // δ₁
    std::int64_t pending_threshold = 3;  // δ₂
};

struct BehaviorSpec {
    double success_probability = 1.0;
    double latency_factor = 1.0;  // steps per duration unit
    double quality_mean = 0.9;
    double quality_spread = 0.0;  // uniform half-width around the mean
    double price_factor = 0.5;    // bid price as a fraction of the bounty
};

struct PopulationGroup {
    std::size_t count = 0;
    TagSet tags;
    TagSet attributes;
    BehaviorSpec behavior;
};

struct PopulationSpec {
    Tokens initial_balance = 500;
    std::vector<PopulationGroup> groups;
};

struct TaskSpec {
    TaskRequest request;
    SimTime publish_at = 0;
    double complexity = 1.0;  // staking τ
    SubtaskDAG dag;
    std::optional<AgentId> publisher;  // defaults to agent 0
};

struct FaultSpec {
    enum class Kind { offline, resume, force_fault };
    Kind kind = Kind::offline;
    SimTime time = 0;
    AgentId agent = 0;
    std::optional<AgentId> custodian;  // offline only
};

struct ScenarioConfig {
    std::uint64_t seed = 0;
    SimTime rounds = 100;
    GraphSpec graph;
    GossipParams gossip{0.3, 8, 1};
    std::size_t issuers = 1;  // X
    TrustSpec trust;
    MatchSpec matching;
    IncentiveSpec incentives;
    LifecycleParams lifecycle;
    AutoscaleSpec autoscale;
    PopulationSpec population;
    std::vector<TaskSpec> tasks;
    std::vector<FaultSpec> faults;

    std::size_t agent_count() const;
};

// Parses and validates; constraint violations are collected and reported
// together in one std::invalid_argument. JSON syntax errors carry the byte
// offset from the parser.
ScenarioConfig parse_scenario(const std::string& text, const std::string& origin);
ScenarioConfig load_scenario(const std::string& path);

}  // namespace isek

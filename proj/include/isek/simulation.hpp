#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "isek/gossip.hpp"
#include "isek/ledger.hpp"
#include "isek/lifecycle.hpp"
#include "isek/report.hpp"
#include "isek/reputation.hpp"
#include "isek/scenario.hpp"
#include "isek/topology.hpp"
#include "isek/trust.hpp"
#include "isek/types.hpp"

namespace isek {

// Token account holding the orchestrator compensation pool.
inline constexpr AgentId kTreasuryAccount = 0xFFFFFFFFu;

// Assignment slots an agent fills before its load metric saturates.
inline constexpr double kAgentSlotCapacity = 4.0;

/**
 * Drives one scenario end to end: topology, per-task gossip discovery, trust
 * diffusion, three-stage matching, recruitment with staking, execution with
 * fault interrupts and custody hand-offs, settlement, reputation feedback,
 * orchestrator compensation, and autoscaling. Everything is keyed off the
 * scenario's master seed, so two runs of the same config produce identical
 * reports.
 */
class Simulation {
public:
    explicit Simulation(ScenarioConfig config);

    // Runs every round and finalizes the report. Call once.
    MetricsReport run();

    // Read-only access for tests and the report stage.
    const ScenarioConfig& config() const { return config_; }
    const Graph& graph() const { return graph_; }
    const Ledger& ledger() const { return ledger_; }
    const TaskBook& book() const { return book_; }
    const ReputationStore& reputations() const { return store_; }
    SimTime now() const { return now_; }

private:
    struct TaskGossip {
        GossipState state;
        RngStream rng;
        bool active = true;
    };

    struct WorkPlan {
        AgentId executor = 0;
        int steps_needed = 1;
        int steps_done = 0;
        bool will_fault = false;
        int fault_step = 0;
        double quality = 0.0;
    };

    struct OrchestratorTrack {
        std::uint64_t assignments = 0;
        std::uint64_t successful_assignments = 0;
        std::uint64_t workflows = 0;
        std::uint64_t clean_workflows = 0;
    };

    class ScenarioBidders;
    class ScenarioWorkers;

    void fault_phase();
    void publish_phase();
    void gossip_phase();
    void trust_phase();
    void recruit_phase();
    void execute_phase();
    void monitor_phase();
    void settle_phase();
    void autoscale_phase();
    void finalize();

    void recruit_subtask(TaskRecord& rec, std::size_t subtask);
    void take_offline(AgentId agent, std::optional<AgentId> custodian);
    void bring_online(AgentId agent);
    void install_plan(TaskId task, std::size_t subtask, AgentId owner, AgentId executor);
    void post_settlement(TaskId task, const SettlementReport& rep);
    void conclude_subtask(TaskId task, const SubtaskRuntime& st, std::size_t index,
                          double fraction);
    void record_failed_owner(TaskId task, std::size_t subtask, AgentId owner);
    double incentive_composite(AgentId agent, const TagSet& task_tags) const;
    std::map<AgentId, double> composite_by_agent(const std::vector<AgentId>& agents) const;
    std::vector<AgentCard> snapshot_cards() const;

    ScenarioConfig config_;
    Graph graph_;
    ReputationStore store_;
    Ledger ledger_;
    TaskBook book_;
    CustodyStore custody_;
    TrustField trust_;

    std::vector<NodeId> node_of_agent_;
    std::vector<BehaviorSpec> behavior_;
    std::vector<char> online_;
    std::vector<AgentStats> stats_;
    std::vector<std::uint64_t> active_;
    std::set<AgentId> forced_faults_;
    std::set<AgentId> replicated_;
    std::map<std::string, std::vector<double>> class_times_;
    std::map<TaskId, TaskGossip> gossips_;
    std::map<std::pair<TaskId, std::size_t>, WorkPlan> plans_;
    std::map<AgentId, OrchestratorTrack> orchestrators_;
    std::vector<CheckpointEvent> sim_events_;
    std::map<std::string, std::uint64_t> warning_counts_;
    std::uint64_t warnings_total_ = 0;
    Tokens total_payouts_ = 0;
    Tokens total_custody_fees_ = 0;
    Tokens total_refunds_ = 0;
    Tokens total_slashed_ = 0;
    Tokens orchestrator_paid_ = 0;

    MetricsReport report_;
    SimTime now_ = 0;
    AgentId next_agent_id_ = 0;
    bool ran_ = false;
};

// Convenience wrapper: build, run, return the report.
MetricsReport run_simulation(const ScenarioConfig& config);

}  // namespace isek

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "isek/incentives.hpp"
#include "isek/ledger.hpp"
#include "isek/matching.hpp"
#include "isek/reputation.hpp"
#include "isek/rng.hpp"
#include "isek/task.hpp"
#include "isek/types.hpp"

namespace isek {

enum class TaskState {
    Published,
    Discovering,
    Recruiting,
    Executing,
    Verifying,
    Disputed,
    Settled,
    Failed,
};

const char* to_string(TaskState state);
bool is_terminal(TaskState state);

// The implemented transition table. Disputed is reachable from Recruiting
// (recruitment exhausted with nobody assignable — treated like an
// already-empty fallback pool), from Executing (fallback exhaustion), and
// from Verifying (manager raises a dispute flag).
bool transition_allowed(TaskState from, TaskState to);

struct SubtaskSpec {
    std::string name;
    TagSet tags;
    double bounty_share = 1.0;      // fractions sum to 1 across the DAG
    double duration_estimate = 1.0;  // sim-time units, > 0
};

struct SubtaskDAG {
    std::vector<SubtaskSpec> nodes;
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // from before to
};

void validate(const SubtaskDAG& dag);
// Kahn's algorithm; throws std::invalid_argument on a cycle. Ready nodes are
// taken in index order, so the result is deterministic.
std::vector<std::size_t> topological_order(const SubtaskDAG& dag);
// Longest finish time per node along dependency chains (duration-weighted).
std::vector<double> critical_path_finish(const SubtaskDAG& dag);

class Decomposer {
public:
    virtual ~Decomposer() = default;
    virtual SubtaskDAG decompose(const TaskRequest& request) const = 0;
};

// Default decomposer: tasks arrive with an explicit DAG from the scenario.
class ExplicitDecomposer : public Decomposer {
public:
    explicit ExplicitDecomposer(SubtaskDAG dag);
    SubtaskDAG decompose(const TaskRequest& request) const override;

private:
    SubtaskDAG dag_;
};

enum class SubtaskStatus { pending, assigned, executing, completed, failed_final };

const char* to_string(SubtaskStatus status);

struct SubtaskRuntime {
    SubtaskSpec spec;
    SubtaskStatus status = SubtaskStatus::pending;
    Tokens bounty = 0;              // integer share of the budget
    SimTime deadline = 0;           // absolute sim time
    std::optional<AgentId> assignee;          // executing agent (may be a custodian)
    std::optional<AgentId> capability_owner;  // differs from assignee when proxied
    std::optional<AgentId> custodian;         // earns the custody fee
    std::vector<AgentId> fallback_pool;
    std::set<AgentId> excluded;               // never re-selected here
    std::vector<AgentId> failed_agents;       // in failure order
    std::map<AgentId, Bid> bids;              // accepted bids by owner id
    std::map<AgentId, EscrowId> stake_escrows;  // owner id -> live stake
    std::map<AgentId, Tokens> slashed;          // owner id -> forfeited stake
    SimTime started_at = -1;
    SimTime completed_at = -1;
    double delivered_quality = 0.0;
    bool fault_pending = false;
};

struct CheckpointEvent {
    SimTime time = 0;
    TaskId task = 0;
    std::optional<std::size_t> subtask;
    std::string event;
    std::optional<AgentId> agent;
    std::string detail;
};

struct TaskRecord {
    TaskRequest request;
    AgentId manager = 0;
    double complexity_multiplier = 1.0;  // staking τ
    TaskState state = TaskState::Published;
    SimTime published_at = 0;
    SubtaskDAG dag;
    std::vector<SubtaskRuntime> subtasks;
    EscrowId escrow = 0;
    bool dispute_flag = false;
    bool settled = false;
    bool feedback_applied = false;
};

struct Interrupt {
    std::size_t subtask = 0;
    enum class Cause { timeout, fault } cause = Cause::fault;
};

struct Verdict {
    std::vector<double> fractions;  // payout share per subtask, in [0,1]
    bool reviewer_failed = false;
};

struct SettlementReport {
    TaskId task = 0;
    TaskState final_state = TaskState::Settled;
    std::vector<double> fractions;         // applied verdict, per subtask
    std::vector<Tokens> subtask_payouts;   // per subtask, to the capability owner
    std::vector<std::pair<AgentId, Tokens>> payouts;      // capability owners
    std::vector<std::pair<AgentId, Tokens>> custody_fees;  // custodians
    Tokens refund = 0;                                     // back to the manager
    std::vector<std::pair<AgentId, Tokens>> stake_refunds;
};

// Collects bids from the invited agents; the simulation backs this with the
// scenario's worker models, tests with scripted bidders.
class BidCollector {
public:
    virtual ~BidCollector() = default;
    virtual std::vector<Bid> collect(const TaskRequest& request, const SubtaskSpec& spec,
                                     Tokens bounty, SimTime deadline,
                                     const std::vector<AgentId>& invited) = 0;
};

// One step of one agent's work on a subtask.
struct WorkStep {
    enum class Kind { progress, completed, fault } kind = Kind::progress;
    double quality = 0.0;  // meaningful for completed
};

class WorkerModel {
public:
    virtual ~WorkerModel() = default;
    virtual WorkStep step(AgentId worker, const TaskRecord& record, std::size_t subtask,
                          RngStream& rng) = 0;
};

class QualityArbiter {
public:
    virtual ~QualityArbiter() = default;
    // Payout fraction in [0,1] for a delivered subtask.
    virtual double assess(const TaskRecord& record, std::size_t subtask, double projected,
                          double delivered) const = 0;
};

// Meets-or-exceeds pays in full; short by more than the tolerance pays
// nothing; in between pays linearly.
class DefaultArbiter : public QualityArbiter {
public:
    explicit DefaultArbiter(double tolerance = 0.2);
    double assess(const TaskRecord& record, std::size_t subtask, double projected,
                  double delivered) const override;

private:
    double tolerance_;
};

struct CustodyRef {
    TaskId task = 0;
    std::size_t subtask = 0;
    bool in_flight = false;
};

struct CustodyEntry {
    AgentId custodian = 0;
    std::vector<CustodyRef> refs;
    Tokens compensation_accrued = 0;
};

class CustodyStore {
public:
    // An offline agent registers exactly one custodian; custodians may not
    // themselves be in custody (no subcontract chains).
    void register_custody(AgentId offline_agent, AgentId custodian);
    bool is_custodied(AgentId agent) const;
    AgentId custodian_of(AgentId agent) const;
    const CustodyEntry& entry(AgentId agent) const;

    void enqueue(AgentId offline_agent, TaskId task, std::size_t subtask);
    void mark_in_flight(AgentId offline_agent, TaskId task, std::size_t subtask);
    void drop_ref(AgentId offline_agent, TaskId task, std::size_t subtask);
    void accrue(AgentId offline_agent, Tokens fee);  // no-op after reclaim

    // Removes the entry and returns the pending (not in-flight) refs;
    // in-flight work finishes under the custodian.
    std::vector<CustodyRef> reclaim(AgentId offline_agent);

private:
    std::map<AgentId, CustodyEntry> entries_;
};

struct LifecycleParams {
    BidWeights bid_weights;
    Tokens base_stake = 100;          // S₀
    double review_tolerance = 0.2;
    double custody_fee_rate = 0.01;   // of the proxied subtask's bounty
    std::size_t fallback_pool_size = 2;
};

struct RecruitContext {
    BidCollector& bids;
    Ledger& ledger;
    CustodyStore& custody;
    // Composite reputation per agent (bid tie-breaks).
    const std::map<AgentId, double>& reputations;
    // Incentive composite R per agent (stake sizing); missing means cold start.
    const std::map<AgentId, double>& incentive_scores;
    SimTime now = 0;
};

struct RecruitOutcome {
    bool assigned = false;
    AgentId assignee = 0;          // executing agent
    AgentId capability_owner = 0;  // bid owner
    std::vector<AgentId> fallback;
};

/**
 * Owner of task records and the single writer for all state transitions.
 * Every transition is validated against the table and logged as an event.
 */
class TaskBook {
public:
    explicit TaskBook(LifecycleParams params);

    const LifecycleParams& params() const { return params_; }

    TaskRecord& record(TaskId task);
    const TaskRecord& record(TaskId task) const;
    bool has_record(TaskId task) const;
    std::vector<TaskId> task_ids() const;
    const std::vector<CheckpointEvent>& events() const { return events_; }

    // Locks the budget in escrow and opens the record.
    TaskRecord& publish(const TaskRequest& request, AgentId manager, Ledger& ledger,
                        SimTime now, double complexity_multiplier = 1.0);

    // Attaches the DAG, splits the budget into integer bounties, apportions
    // the deadline along the critical path, and moves to Discovering.
    const SubtaskDAG& decompose(TaskId task, const Decomposer& decomposer, SimTime now);

    // Runs one bidding round for a subtask over the ranked agents. Returns an
    // unassigned outcome when nobody bids or nobody can stake; the record
    // moves to Executing automatically once every subtask has an assignee.
    RecruitOutcome recruit(TaskId task, std::size_t subtask,
                           const std::vector<RankedAgent>& ranked, RecruitContext& ctx);

    // Marks recruitment as exhausted for the record (no assignable agents
    // remain); unstaffed subtasks become failed-final and the record moves to
    // Disputed for arbitration.
    void abandon_recruitment(TaskId task, SimTime now);

    // Advances every unblocked assignment one step.
    std::vector<CheckpointEvent> execute_step(TaskId task, WorkerModel& world,
                                              RngStream& rng, SimTime now,
                                              CustodyStore* custody = nullptr);

    std::vector<Interrupt> monitor_check(TaskId task, SimTime now) const;

    // Slashes the failed assignee's stake to the manager and promotes the
    // head of the fallback pool; an empty pool moves the record to Disputed.
    RecruitOutcome promote_fallback(TaskId task, const Interrupt& interrupt,
                                    RecruitContext& ctx);

    // Manager verification: flags a dispute when any delivered quality fell
    // short of its bid's projection. Returns true when flagged.
    bool flag_dispute(TaskId task, SimTime now);

    // Arbitrated payout fractions; pre: Disputed, or Verifying with the
    // dispute flag raised. A throwing arbiter escalates to refund-all.
    Verdict review(TaskId task, const QualityArbiter& arbiter, SimTime now);

    // Clean-path verdict (Verifying, no dispute): completed subtasks pay in
    // full, anything else pays zero.
    Verdict accept_verdict(TaskId task) const;

    // Releases the escrow per verdict, pays custody fees, refunds unslashed
    // stakes and the unearned remainder. Idempotent: a second call returns
    // the cached report and touches nothing.
    SettlementReport settle(TaskId task, Ledger& ledger, const Verdict& verdict,
                            SimTime now, CustodyStore* custody = nullptr);

    // Folds outcomes and peer ratings into the reputation store exactly once.
    void feedback(TaskId task, ReputationStore& store, SimTime now);

    // Moves still-pending proxied assignments back to the owner.
    std::vector<CustodyRef> custody_reclaim(AgentId agent, CustodyStore& custody,
                                            SimTime now);

    const SettlementReport& settlement(TaskId task) const;

private:
    void transition(TaskRecord& rec, TaskState next, SimTime now);
    void log(SimTime time, TaskId task, std::optional<std::size_t> subtask,
             std::string event, std::optional<AgentId> agent, std::string detail);
    bool try_assign(TaskRecord& rec, std::size_t subtask, const Bid& bid,
                    RecruitContext& ctx);
    void maybe_start_executing(TaskRecord& rec, SimTime now);

    LifecycleParams params_;
    std::map<TaskId, TaskRecord> records_;
    std::map<TaskId, SettlementReport> settlements_;
    std::vector<CheckpointEvent> events_;
    std::uint64_t next_outcome_id_ = 1;
};

struct AgentLoadMetric {
    AgentId agent = 0;
    double cpu_load = 0.0;
    std::int64_t pending_tasks = 0;
};

struct ScaleDecision {
    AgentId agent = 0;
    std::string reason;
};

// Clone decisions for agents strictly above either threshold.
std::vector<ScaleDecision> autoscale_check(const std::vector<AgentLoadMetric>& metrics,
                                           double cpu_threshold,
                                           std::int64_t pending_threshold);

// Fresh id and reputation, shared tags/attributes, derived endpoint.
AgentCard make_replica(const AgentCard& parent, AgentId new_id);

}  // namespace isek

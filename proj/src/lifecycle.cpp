#include "isek/lifecycle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "isek/log.hpp"

namespace isek {

namespace {

double clamp01(double value) {
    return std::min(1.0, std::max(0.0, value));
}

}  // namespace

const char* to_string(TaskState state) {
    switch (state) {
        case TaskState::Published: return "Published";
        case TaskState::Discovering: return "Discovering";
        case TaskState::Recruiting: return "Recruiting";
        case TaskState::Executing: return "Executing";
        case TaskState::Verifying: return "Verifying";
        case TaskState::Disputed: return "Disputed";
        case TaskState::Settled: return "Settled";
        case TaskState::Failed: return "Failed";
    }
    return "?";
}

const char* to_string(SubtaskStatus status) {
    switch (status) {
        case SubtaskStatus::pending: return "pending";
        case SubtaskStatus::assigned: return "assigned";
        case SubtaskStatus::executing: return "executing";
        case SubtaskStatus::completed: return "completed";
        case SubtaskStatus::failed_final: return "failed";
    }
    return "?";
}

bool is_terminal(TaskState state) {
    return state == TaskState::Settled || state == TaskState::Failed;
}

bool transition_allowed(TaskState from, TaskState to) {
    switch (from) {
        case TaskState::Published:
            return to == TaskState::Discovering;
        case TaskState::Discovering:
            return to == TaskState::Recruiting;
        case TaskState::Recruiting:
            return to == TaskState::Executing || to == TaskState::Disputed;
        case TaskState::Executing:
            return to == TaskState::Verifying || to == TaskState::Disputed;
        case TaskState::Verifying:
            return to == TaskState::Settled || to == TaskState::Disputed;
        case TaskState::Disputed:
            return to == TaskState::Settled || to == TaskState::Failed;
        case TaskState::Settled:
        case TaskState::Failed:
            return false;
    }
    return false;
}

void validate(const SubtaskDAG& dag) {
    if (dag.nodes.empty()) {
        throw std::invalid_argument("lifecycle: a task needs at least one subtask");
    }
    double share_sum = 0.0;
    for (const SubtaskSpec& spec : dag.nodes) {
        if (spec.bounty_share < 0.0) {
            throw std::invalid_argument("lifecycle: bounty shares must be non-negative");
        }
        if (!(spec.duration_estimate > 0.0)) {
            throw std::invalid_argument("lifecycle: duration estimates must be positive");
        }
        share_sum += spec.bounty_share;
    }
    if (std::abs(share_sum - 1.0) > 1e-9) {
        throw std::invalid_argument("lifecycle: bounty shares sum to " +
                                    std::to_string(share_sum) + ", expected 1");
    }
    for (const auto& [from, to] : dag.edges) {
        if (from >= dag.nodes.size() || to >= dag.nodes.size()) {
            throw std::invalid_argument("lifecycle: dependency edge outside the DAG");
        }
        if (from == to) {
            throw std::invalid_argument("lifecycle: a subtask cannot depend on itself");
        }
    }
    topological_order(dag);  // rejects cycles
}

std::vector<std::size_t> topological_order(const SubtaskDAG& dag) {
    const std::size_t n = dag.nodes.size();
    std::vector<std::size_t> indegree(n, 0);
    std::vector<std::vector<std::size_t>> successors(n);
    for (const auto& [from, to] : dag.edges) {
        indegree[to] += 1;
        successors[from].push_back(to);
    }
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i) {
        if (indegree[i] == 0) {
            ready.push_back(i);
        }
    }
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        // Take the lowest index for a deterministic order.
        const auto lowest = std::min_element(ready.begin(), ready.end());
        const std::size_t node = *lowest;
        ready.erase(lowest);
        order.push_back(node);
        for (std::size_t next : successors[node]) {
            if (--indegree[next] == 0) {
                ready.push_back(next);
            }
        }
    }
    if (order.size() != n) {
        throw std::invalid_argument("lifecycle: subtask dependencies contain a cycle");
    }
    return order;
}

std::vector<double> critical_path_finish(const SubtaskDAG& dag) {
    const std::vector<std::size_t> order = topological_order(dag);
    std::vector<std::vector<std::size_t>> predecessors(dag.nodes.size());
    for (const auto& [from, to] : dag.edges) {
        predecessors[to].push_back(from);
    }
    std::vector<double> finish(dag.nodes.size(), 0.0);
    for (std::size_t node : order) {
        double start = 0.0;
        for (std::size_t pred : predecessors[node]) {
            start = std::max(start, finish[pred]);
        }
        finish[node] = start + dag.nodes[node].duration_estimate;
    }
    return finish;
}

ExplicitDecomposer::ExplicitDecomposer(SubtaskDAG dag) : dag_(std::move(dag)) {
    validate(dag_);
}

SubtaskDAG ExplicitDecomposer::decompose(const TaskRequest& request) const {
    (void)request;
    return dag_;
}

DefaultArbiter::DefaultArbiter(double tolerance) : tolerance_(tolerance) {
    if (!(tolerance > 0.0)) {
        throw std::invalid_argument("lifecycle: review tolerance must be positive");
    }
}

double DefaultArbiter::assess(const TaskRecord& record, std::size_t subtask,
                              double projected, double delivered) const {
    (void)record;
    (void)subtask;
    if (delivered >= projected) {
        return 1.0;
    }
    const double shortfall = projected - delivered;
    if (shortfall >= tolerance_) {
        return 0.0;
    }
    return 1.0 - shortfall / tolerance_;
}

void CustodyStore::register_custody(AgentId offline_agent, AgentId custodian) {
    if (offline_agent == custodian) {
        throw std::invalid_argument("custody: an agent cannot be its own custodian");
    }
    if (entries_.count(offline_agent) != 0) {
        throw std::invalid_argument("custody: agent " + std::to_string(offline_agent) +
                                    " already has a custodian");
    }
    if (entries_.count(custodian) != 0) {
        throw std::invalid_argument("custody: custodian " + std::to_string(custodian) +
                                    " is itself in custody");
    }
    for (const auto& [agent, entry] : entries_) {
        if (entry.custodian == offline_agent) {
            throw std::invalid_argument("custody: agent " + std::to_string(offline_agent) +
                                        " is serving as a custodian and cannot register");
        }
    }
    entries_.emplace(offline_agent, CustodyEntry{custodian, {}, 0});
}

bool CustodyStore::is_custodied(AgentId agent) const {
    return entries_.count(agent) != 0;
}

AgentId CustodyStore::custodian_of(AgentId agent) const {
    return entry(agent).custodian;
}

const CustodyEntry& CustodyStore::entry(AgentId agent) const {
    auto it = entries_.find(agent);
    if (it == entries_.end()) {
        throw std::out_of_range("custody: agent " + std::to_string(agent) +
                                " has no custody entry");
    }
    return it->second;
}

void CustodyStore::enqueue(AgentId offline_agent, TaskId task, std::size_t subtask) {
    auto it = entries_.find(offline_agent);
    if (it == entries_.end()) {
        throw std::out_of_range("custody: cannot queue work for uncustodied agent " +
                                std::to_string(offline_agent));
    }
    it->second.refs.push_back({task, subtask, false});
}

void CustodyStore::mark_in_flight(AgentId offline_agent, TaskId task, std::size_t subtask) {
    auto it = entries_.find(offline_agent);
    if (it == entries_.end()) {
        return;  // reclaimed while assigned; the record remains authoritative
    }
    for (CustodyRef& ref : it->second.refs) {
        if (ref.task == task && ref.subtask == subtask) {
            ref.in_flight = true;
            return;
        }
    }
}

void CustodyStore::drop_ref(AgentId offline_agent, TaskId task, std::size_t subtask) {
    auto it = entries_.find(offline_agent);
    if (it == entries_.end()) {
        return;
    }
    auto& refs = it->second.refs;
    refs.erase(std::remove_if(refs.begin(), refs.end(),
                              [&](const CustodyRef& ref) {
                                  return ref.task == task && ref.subtask == subtask;
                              }),
               refs.end());
}

void CustodyStore::accrue(AgentId offline_agent, Tokens fee) {
    auto it = entries_.find(offline_agent);
    if (it != entries_.end()) {
        it->second.compensation_accrued += fee;
    }
}

std::vector<CustodyRef> CustodyStore::reclaim(AgentId offline_agent) {
    auto it = entries_.find(offline_agent);
    if (it == entries_.end()) {
        throw std::out_of_range("custody: agent " + std::to_string(offline_agent) +
                                " has no custody entry to reclaim");
    }
    std::vector<CustodyRef> pending;
    for (const CustodyRef& ref : it->second.refs) {
        if (!ref.in_flight) {
            pending.push_back(ref);
        }
    }
    entries_.erase(it);
    return pending;
}

TaskBook::TaskBook(LifecycleParams params) : params_(std::move(params)) {
    if (params_.base_stake <= 0) {
        throw std::invalid_argument("lifecycle: base stake must be positive");
    }
    if (!(params_.review_tolerance > 0.0)) {
        throw std::invalid_argument("lifecycle: review tolerance must be positive");
    }
    if (params_.custody_fee_rate < 0.0 || params_.custody_fee_rate > 1.0) {
        throw std::invalid_argument("lifecycle: custody fee rate must lie in [0, 1]");
    }
}

TaskRecord& TaskBook::record(TaskId task) {
    auto it = records_.find(task);
    if (it == records_.end()) {
        throw std::out_of_range("lifecycle: unknown task " + std::to_string(task));
    }
    return it->second;
}

const TaskRecord& TaskBook::record(TaskId task) const {
    auto it = records_.find(task);
    if (it == records_.end()) {
        throw std::out_of_range("lifecycle: unknown task " + std::to_string(task));
    }
    return it->second;
}

bool TaskBook::has_record(TaskId task) const {
    return records_.count(task) != 0;
}

std::vector<TaskId> TaskBook::task_ids() const {
    std::vector<TaskId> ids;
    ids.reserve(records_.size());
    for (const auto& [id, rec] : records_) {
        ids.push_back(id);
    }
    return ids;
}

void TaskBook::log(SimTime time, TaskId task, std::optional<std::size_t> subtask,
                   std::string event, std::optional<AgentId> agent, std::string detail) {
    events_.push_back({time, task, subtask, std::move(event), agent, std::move(detail)});
}

void TaskBook::transition(TaskRecord& rec, TaskState next, SimTime now) {
    if (!transition_allowed(rec.state, next)) {
        throw std::logic_error(std::string("lifecycle: illegal transition ") +
                               to_string(rec.state) + " -> " + to_string(next) +
                               " for task " + std::to_string(rec.request.id));
    }
    const TaskState previous = rec.state;
    rec.state = next;
    log(now, rec.request.id, std::nullopt, "state", std::nullopt,
        std::string(to_string(previous)) + "->" + to_string(next));
}

TaskRecord& TaskBook::publish(const TaskRequest& request, AgentId manager, Ledger& ledger,
                              SimTime now, double complexity_multiplier) {
    if (request.budget <= 0) {
        throw std::invalid_argument("lifecycle: task budget must be positive");
    }
    if (request.deadline <= now) {
        throw std::invalid_argument("lifecycle: task deadline must lie after publication");
    }
    if (complexity_multiplier < 1.0) {
        throw std::invalid_argument("lifecycle: complexity multiplier must be at least 1");
    }
    if (records_.count(request.id) != 0) {
        throw std::invalid_argument("lifecycle: task " + std::to_string(request.id) +
                                    " was already published");
    }
    // Lock the budget first: a failed lock must leave no record behind.
    const EscrowId escrow = ledger.escrow_lock(manager, request.budget);
    TaskRecord rec;
    rec.request = request;
    rec.manager = manager;
    rec.complexity_multiplier = complexity_multiplier;
    rec.state = TaskState::Published;
    rec.published_at = now;
    rec.escrow = escrow;
    auto [it, inserted] = records_.emplace(request.id, std::move(rec));
    log(now, request.id, std::nullopt, "published", manager,
        "budget=" + std::to_string(request.budget));
    return it->second;
}

const SubtaskDAG& TaskBook::decompose(TaskId task, const Decomposer& decomposer,
                                      SimTime now) {
    TaskRecord& rec = record(task);
    if (rec.state != TaskState::Published) {
        throw std::logic_error("lifecycle: decompose requires a freshly published task");
    }
    SubtaskDAG dag = decomposer.decompose(rec.request);
    validate(dag);
    std::vector<double> shares;
    shares.reserve(dag.nodes.size());
    for (const SubtaskSpec& spec : dag.nodes) {
        shares.push_back(spec.bounty_share);
    }
    const std::vector<Tokens> bounties =
        split_by_largest_remainder(shares, rec.request.budget);
    const std::vector<double> finish = critical_path_finish(dag);
    const double critical_path = *std::max_element(finish.begin(), finish.end());
    const double span = static_cast<double>(rec.request.deadline - rec.published_at);

    rec.dag = dag;
    rec.subtasks.clear();
    rec.subtasks.resize(dag.nodes.size());
    for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
        SubtaskRuntime& st = rec.subtasks[i];
        st.spec = dag.nodes[i];
        st.bounty = bounties[i];
        const double fraction = finish[i] / critical_path;
        st.deadline = rec.published_at +
                      std::max<SimTime>(1, static_cast<SimTime>(std::llround(fraction * span)));
    }
    transition(rec, TaskState::Discovering, now);
    log(now, task, std::nullopt, "decomposed", std::nullopt,
        std::to_string(dag.nodes.size()) + " subtasks");
    return rec.dag;
}

bool TaskBook::try_assign(TaskRecord& rec, std::size_t subtask, const Bid& bid,
                          RecruitContext& ctx) {
    SubtaskRuntime& st = rec.subtasks[subtask];
    const AgentId owner = bid.agent;
    if (st.excluded.count(owner) != 0) {
        return false;
    }
    AgentId executor = owner;
    std::optional<AgentId> custodian;
    if (ctx.custody.is_custodied(owner)) {
        executor = ctx.custody.custodian_of(owner);
        custodian = executor;
    }
    auto score_it = ctx.incentive_scores.find(owner);
    const double composite = score_it == ctx.incentive_scores.end() ? 0.0 : score_it->second;
    const Tokens stake = required_stake(
        StakeParams{params_.base_stake, rec.complexity_multiplier}, composite);
    if (stake > 0) {
        if (!ctx.ledger.has_account(owner) || ctx.ledger.balance(owner) < stake) {
            log(ctx.now, rec.request.id, subtask, "stake-unfunded", owner,
                "required=" + std::to_string(stake));
            return false;
        }
        st.stake_escrows[owner] = ctx.ledger.escrow_lock(owner, stake);
    }
    st.assignee = executor;
    st.capability_owner = owner;
    st.custodian = custodian;
    st.status = SubtaskStatus::assigned;
    st.bids[owner] = bid;
    st.started_at = -1;
    st.completed_at = -1;
    st.delivered_quality = 0.0;
    st.fault_pending = false;
    if (custodian) {
        ctx.custody.enqueue(owner, rec.request.id, subtask);
        log(ctx.now, rec.request.id, subtask, "proxied", *custodian,
            "owner=" + std::to_string(owner));
    }
    log(ctx.now, rec.request.id, subtask, "assigned", executor,
        "owner=" + std::to_string(owner) + " price=" + std::to_string(bid.price) +
            " stake=" + std::to_string(stake));
    return true;
}

void TaskBook::maybe_start_executing(TaskRecord& rec, SimTime now) {
    for (const SubtaskRuntime& st : rec.subtasks) {
        if (st.status != SubtaskStatus::assigned) {
            return;
        }
    }
    transition(rec, TaskState::Executing, now);
}

RecruitOutcome TaskBook::recruit(TaskId task, std::size_t subtask,
                                 const std::vector<RankedAgent>& ranked,
                                 RecruitContext& ctx) {
    TaskRecord& rec = record(task);
    if (rec.state != TaskState::Discovering && rec.state != TaskState::Recruiting) {
        throw std::logic_error("lifecycle: recruit requires Discovering or Recruiting");
    }
    if (subtask >= rec.subtasks.size()) {
        throw std::out_of_range("lifecycle: no subtask " + std::to_string(subtask));
    }
    if (ranked.empty()) {
        throw std::invalid_argument("lifecycle: recruit needs a non-empty ranked list");
    }
    SubtaskRuntime& st = rec.subtasks[subtask];
    if (st.status != SubtaskStatus::pending) {
        throw std::logic_error("lifecycle: subtask " + std::to_string(subtask) +
                               " is already staffed");
    }
    if (rec.state == TaskState::Discovering) {
        transition(rec, TaskState::Recruiting, ctx.now);
    }
    std::vector<AgentId> invited;
    invited.reserve(ranked.size());
    for (const RankedAgent& entry : ranked) {
        invited.push_back(entry.agent);
    }
    std::vector<Bid> bids =
        ctx.bids.collect(rec.request, st.spec, st.bounty, st.deadline, invited);
    const std::set<AgentId> invited_set(invited.begin(), invited.end());
    std::vector<Bid> valid;
    valid.reserve(bids.size());
    for (const Bid& bid : bids) {
        if (invited_set.count(bid.agent) == 0) {
            warn("lifecycle: uninvited bid from agent " + std::to_string(bid.agent) +
                 " ignored");
            continue;
        }
        if (bid.price < 0 || bid.price > st.bounty || !(bid.projected_completion > 0.0) ||
            !(bid.projected_quality >= 0.0 && bid.projected_quality <= 1.0)) {
            warn("lifecycle: malformed bid from agent " + std::to_string(bid.agent) +
                 " ignored");
            continue;
        }
        valid.push_back(bid);
    }
    RecruitOutcome outcome;
    if (valid.empty()) {
        log(ctx.now, task, subtask, "no-bids", std::nullopt,
            std::to_string(invited.size()) + " invited");
        return outcome;
    }
    const double window =
        std::max(1.0, static_cast<double>(st.deadline - ctx.now));
    const BidOutcome evaluated =
        evaluate_bids(valid, window, st.bounty, params_.bid_weights, ctx.reputations);
    std::size_t winner_pos = evaluated.ranked.size();
    for (std::size_t i = 0; i < evaluated.ranked.size(); ++i) {
        if (try_assign(rec, subtask, evaluated.ranked[i], ctx)) {
            winner_pos = i;
            break;
        }
    }
    if (winner_pos == evaluated.ranked.size()) {
        log(ctx.now, task, subtask, "no-stakeable-bidder", std::nullopt,
            std::to_string(valid.size()) + " bids");
        return outcome;
    }
    for (std::size_t i = winner_pos + 1;
         i < evaluated.ranked.size() && st.fallback_pool.size() < params_.fallback_pool_size;
         ++i) {
        const Bid& bid = evaluated.ranked[i];
        if (st.excluded.count(bid.agent) != 0) {
            continue;
        }
        st.fallback_pool.push_back(bid.agent);
        st.bids[bid.agent] = bid;
    }
    outcome.assigned = true;
    outcome.assignee = *st.assignee;
    outcome.capability_owner = *st.capability_owner;
    outcome.fallback = st.fallback_pool;
    maybe_start_executing(rec, ctx.now);
    return outcome;
}

void TaskBook::abandon_recruitment(TaskId task, SimTime now) {
    TaskRecord& rec = record(task);
    if (rec.state != TaskState::Discovering && rec.state != TaskState::Recruiting) {
        throw std::logic_error("lifecycle: abandon_recruitment requires a recruiting task");
    }
    if (rec.state == TaskState::Discovering) {
        transition(rec, TaskState::Recruiting, now);
    }
    for (std::size_t i = 0; i < rec.subtasks.size(); ++i) {
        SubtaskRuntime& st = rec.subtasks[i];
        if (st.status == SubtaskStatus::pending) {
            st.status = SubtaskStatus::failed_final;
            log(now, task, i, "unstaffed", std::nullopt, "no assignable agents");
        }
    }
    rec.dispute_flag = true;
    transition(rec, TaskState::Disputed, now);
}

std::vector<CheckpointEvent> TaskBook::execute_step(TaskId task, WorkerModel& world,
                                                    RngStream& rng, SimTime now,
                                                    CustodyStore* custody) {
    TaskRecord& rec = record(task);
    if (rec.state != TaskState::Executing) {
        throw std::logic_error("lifecycle: execute_step requires Executing");
    }
    const std::size_t first_event = events_.size();

    std::vector<std::vector<std::size_t>> predecessors(rec.subtasks.size());
    for (const auto& [from, to] : rec.dag.edges) {
        predecessors[to].push_back(from);
    }
    // Unlock subtasks whose dependencies are all complete.
    for (std::size_t i = 0; i < rec.subtasks.size(); ++i) {
        SubtaskRuntime& st = rec.subtasks[i];
        if (st.status != SubtaskStatus::assigned) {
            continue;
        }
        const bool ready = std::all_of(
            predecessors[i].begin(), predecessors[i].end(), [&](std::size_t pred) {
                return rec.subtasks[pred].status == SubtaskStatus::completed;
            });
        if (!ready) {
            continue;
        }
        st.status = SubtaskStatus::executing;
        st.started_at = now;
        if (st.custodian && custody) {
            // Once in flight, the work finishes under the custodian even if
            // the owner reclaims; the store just stops listing it as pending.
            custody->mark_in_flight(*st.capability_owner, task, i);
        }
        log(now, task, i, "start", st.assignee, "");
    }
    for (std::size_t i = 0; i < rec.subtasks.size(); ++i) {
        SubtaskRuntime& st = rec.subtasks[i];
        if (st.status != SubtaskStatus::executing || st.fault_pending) {
            continue;
        }
        const WorkStep step = world.step(*st.assignee, rec, i, rng);
        switch (step.kind) {
            case WorkStep::Kind::progress:
                log(now, task, i, "progress", st.assignee, "");
                break;
            case WorkStep::Kind::completed:
                st.status = SubtaskStatus::completed;
                st.completed_at = now;
                st.delivered_quality = clamp01(step.quality);
                if (st.custodian && custody) {
                    custody->drop_ref(*st.capability_owner, task, i);
                }
                log(now, task, i, "completed", st.assignee,
                    "quality=" + std::to_string(st.delivered_quality));
                break;
            case WorkStep::Kind::fault:
                st.fault_pending = true;
                log(now, task, i, "fault", st.assignee, "");
                break;
        }
    }
    const bool all_complete =
        std::all_of(rec.subtasks.begin(), rec.subtasks.end(), [](const SubtaskRuntime& st) {
            return st.status == SubtaskStatus::completed;
        });
    if (all_complete) {
        transition(rec, TaskState::Verifying, now);
    }
    return std::vector<CheckpointEvent>(events_.begin() + first_event, events_.end());
}

std::vector<Interrupt> TaskBook::monitor_check(TaskId task, SimTime now) const {
    const TaskRecord& rec = record(task);
    if (rec.state != TaskState::Executing) {
        throw std::logic_error("lifecycle: monitor_check requires Executing");
    }
    std::vector<Interrupt> interrupts;
    for (std::size_t i = 0; i < rec.subtasks.size(); ++i) {
        const SubtaskRuntime& st = rec.subtasks[i];
        if (st.status != SubtaskStatus::executing) {
            continue;
        }
        if (st.fault_pending) {
            interrupts.push_back({i, Interrupt::Cause::fault});
        } else if (now > st.deadline) {
            interrupts.push_back({i, Interrupt::Cause::timeout});
        }
    }
    return interrupts;
}

RecruitOutcome TaskBook::promote_fallback(TaskId task, const Interrupt& interrupt,
                                          RecruitContext& ctx) {
    TaskRecord& rec = record(task);
    if (rec.state != TaskState::Executing) {
        throw std::logic_error("lifecycle: promote_fallback requires Executing");
    }
    if (interrupt.subtask >= rec.subtasks.size()) {
        throw std::out_of_range("lifecycle: interrupt names an unknown subtask");
    }
    SubtaskRuntime& st = rec.subtasks[interrupt.subtask];
    if (!st.assignee || st.status == SubtaskStatus::completed) {
        throw std::logic_error("lifecycle: interrupt for a subtask with no active work");
    }
    const AgentId owner = *st.capability_owner;
    const char* cause =
        interrupt.cause == Interrupt::Cause::timeout ? "timeout" : "fault";
    // Forfeit the failed owner's stake to the publisher.
    auto stake_it = st.stake_escrows.find(owner);
    if (stake_it != st.stake_escrows.end()) {
        const Tokens amount = ctx.ledger.escrow_amount(stake_it->second);
        ctx.ledger.escrow_release(stake_it->second, {{rec.manager, amount}});
        st.slashed[owner] = amount;
        st.stake_escrows.erase(stake_it);
        log(ctx.now, task, interrupt.subtask, "slashed", owner,
            std::to_string(amount) + " to manager");
    }
    if (st.custodian) {
        ctx.custody.drop_ref(owner, task, interrupt.subtask);
    }
    st.excluded.insert(owner);
    st.failed_agents.push_back(owner);
    st.assignee.reset();
    st.capability_owner.reset();
    st.custodian.reset();
    st.fault_pending = false;
    log(ctx.now, task, interrupt.subtask, "interrupt", owner, cause);

    while (!st.fallback_pool.empty()) {
        const AgentId next = st.fallback_pool.front();
        st.fallback_pool.erase(st.fallback_pool.begin());
        if (st.excluded.count(next) != 0) {
            continue;
        }
        auto bid_it = st.bids.find(next);
        if (bid_it == st.bids.end()) {
            continue;
        }
        if (try_assign(rec, interrupt.subtask, bid_it->second, ctx)) {
            log(ctx.now, task, interrupt.subtask, "failover", next, "");
            RecruitOutcome outcome;
            outcome.assigned = true;
            outcome.assignee = *st.assignee;
            outcome.capability_owner = *st.capability_owner;
            outcome.fallback = st.fallback_pool;
            return outcome;
        }
    }
    st.status = SubtaskStatus::failed_final;
    rec.dispute_flag = true;
    log(ctx.now, task, interrupt.subtask, "fallback-exhausted", std::nullopt, cause);
    transition(rec, TaskState::Disputed, ctx.now);
    return {};
}

bool TaskBook::flag_dispute(TaskId task, SimTime now) {
    TaskRecord& rec = record(task);
    if (rec.state != TaskState::Verifying) {
        throw std::logic_error("lifecycle: flag_dispute requires Verifying");
    }
    for (std::size_t i = 0; i < rec.subtasks.size(); ++i) {
        const SubtaskRuntime& st = rec.subtasks[i];
        if (st.status != SubtaskStatus::completed) {
            continue;
        }
        const Bid& bid = st.bids.at(*st.capability_owner);
        if (st.delivered_quality < bid.projected_quality) {
            if (!rec.dispute_flag) {
                rec.dispute_flag = true;
                log(now, task, i, "dispute-flagged", st.capability_owner,
                    "delivered=" + std::to_string(st.delivered_quality) +
                        " projected=" + std::to_string(bid.projected_quality));
            }
        }
    }
    return rec.dispute_flag;
}

Verdict TaskBook::review(TaskId task, const QualityArbiter& arbiter, SimTime now) {
    TaskRecord& rec = record(task);
    const bool flagged_verifying =
        rec.state == TaskState::Verifying && rec.dispute_flag;
    if (rec.state != TaskState::Disputed && !flagged_verifying) {
        throw std::logic_error(
            "lifecycle: review requires Disputed or a dispute-flagged Verifying");
    }
    if (flagged_verifying) {
        transition(rec, TaskState::Disputed, now);
    }
    Verdict verdict;
    verdict.fractions.assign(rec.subtasks.size(), 0.0);
    for (std::size_t i = 0; i < rec.subtasks.size(); ++i) {
        SubtaskRuntime& st = rec.subtasks[i];
        if (st.status != SubtaskStatus::completed) {
            continue;
        }
        const Bid& bid = st.bids.at(*st.capability_owner);
        double fraction = 0.0;
        try {
            fraction =
                clamp01(arbiter.assess(rec, i, bid.projected_quality, st.delivered_quality));
        } catch (const std::exception& e) {
            warn("lifecycle: reviewer failed for task " + std::to_string(task) + ": " +
                 e.what() + "; refunding everything");
            log(now, task, i, "review-failed", std::nullopt, e.what());
            verdict.reviewer_failed = true;
            verdict.fractions.assign(rec.subtasks.size(), 0.0);
            return verdict;
        }
        verdict.fractions[i] = fraction;
        log(now, task, i, "reviewed", st.capability_owner,
            "fraction=" + std::to_string(fraction));
    }
    return verdict;
}

Verdict TaskBook::accept_verdict(TaskId task) const {
    const TaskRecord& rec = record(task);
    if (rec.state != TaskState::Verifying || rec.dispute_flag) {
        throw std::logic_error("lifecycle: accept_verdict requires a clean Verifying task");
    }
    Verdict verdict;
    verdict.fractions.reserve(rec.subtasks.size());
    for (const SubtaskRuntime& st : rec.subtasks) {
        verdict.fractions.push_back(st.status == SubtaskStatus::completed ? 1.0 : 0.0);
    }
    return verdict;
}

SettlementReport TaskBook::settle(TaskId task, Ledger& ledger, const Verdict& verdict,
                                  SimTime now, CustodyStore* custody) {
    TaskRecord& rec = record(task);
    if (rec.settled) {
        return settlements_.at(task);  // idempotent: no ledger activity
    }
    if (rec.state != TaskState::Verifying && rec.state != TaskState::Disputed) {
        throw std::logic_error("lifecycle: settle requires Verifying or Disputed");
    }
    if (verdict.fractions.size() != rec.subtasks.size()) {
        throw std::invalid_argument("lifecycle: verdict covers " +
                                    std::to_string(verdict.fractions.size()) +
                                    " subtasks, task has " +
                                    std::to_string(rec.subtasks.size()));
    }
    for (double fraction : verdict.fractions) {
        if (!(fraction >= 0.0 && fraction <= 1.0)) {
            throw std::invalid_argument("lifecycle: payout fractions must lie in [0, 1]");
        }
    }

    SettlementReport report;
    report.task = task;
    report.fractions = verdict.fractions;
    report.subtask_payouts.assign(rec.subtasks.size(), 0);
    std::vector<std::pair<AgentId, Tokens>> payees;
    bool any_paid = false;
    for (std::size_t i = 0; i < rec.subtasks.size(); ++i) {
        SubtaskRuntime& st = rec.subtasks[i];
        const double fraction = verdict.fractions[i];
        Tokens fee = 0;
        if (st.custodian && st.status == SubtaskStatus::completed) {
            fee = static_cast<Tokens>(
                std::llround(params_.custody_fee_rate * static_cast<double>(st.bounty)));
            if (fee > 0) {
                payees.push_back({*st.custodian, fee});
                report.custody_fees.push_back({*st.custodian, fee});
                if (custody) {
                    custody->accrue(*st.capability_owner, fee);
                }
            }
        }
        if (fraction > 0.0 && st.capability_owner) {
            const Tokens payout = static_cast<Tokens>(
                std::llround(fraction * static_cast<double>(st.bounty - fee)));
            if (payout > 0) {
                payees.push_back({*st.capability_owner, payout});
                report.payouts.push_back({*st.capability_owner, payout});
                report.subtask_payouts[i] = payout;
                any_paid = true;
            }
        }
    }
    Tokens paid_total = 0;
    for (const auto& [agent, amount] : payees) {
        paid_total += amount;
    }
    ledger.escrow_release(rec.escrow, payees);
    report.refund = rec.request.budget - paid_total;

    for (SubtaskRuntime& st : rec.subtasks) {
        for (auto& [owner, escrow] : st.stake_escrows) {
            const Tokens amount = ledger.escrow_amount(escrow);
            ledger.escrow_refund(escrow);
            report.stake_refunds.push_back({owner, amount});
        }
        st.stake_escrows.clear();
    }

    const bool all_zero = std::all_of(verdict.fractions.begin(), verdict.fractions.end(),
                                      [](double f) { return f == 0.0; });
    (void)any_paid;
    if (all_zero) {
        // A fully refunded task fails; from Verifying, that passes through
        // Disputed so the transition table stays honest.
        if (rec.state == TaskState::Verifying) {
            rec.dispute_flag = true;
            transition(rec, TaskState::Disputed, now);
        }
        report.final_state = TaskState::Failed;
    } else {
        report.final_state = TaskState::Settled;
    }
    transition(rec, report.final_state, now);
    rec.settled = true;
    log(now, task, std::nullopt, "settlement", rec.manager,
        "paid=" + std::to_string(paid_total) + " refund=" + std::to_string(report.refund));
    settlements_.emplace(task, report);
    return settlements_.at(task);
}

const SettlementReport& TaskBook::settlement(TaskId task) const {
    auto it = settlements_.find(task);
    if (it == settlements_.end()) {
        throw std::out_of_range("lifecycle: task " + std::to_string(task) +
                                " has no settlement");
    }
    return it->second;
}

void TaskBook::feedback(TaskId task, ReputationStore& store, SimTime now) {
    TaskRecord& rec = record(task);
    if (!is_terminal(rec.state)) {
        throw std::logic_error("lifecycle: feedback requires a settled or failed task");
    }
    if (rec.feedback_applied) {
        return;  // exactly-once
    }
    const SettlementReport& report = settlements_.at(task);

    std::set<AgentId> participants;
    participants.insert(rec.manager);
    for (const SubtaskRuntime& st : rec.subtasks) {
        if (st.capability_owner) {
            participants.insert(*st.capability_owner);
        }
        if (st.custodian) {
            participants.insert(*st.custodian);
        }
        for (AgentId failed : st.failed_agents) {
            participants.insert(failed);
        }
    }
    store.register_settlement(task, participants);

    const auto rate = [&](AgentId rater, AgentId ratee, const AxisRating& axes) {
        if (rater == ratee || !store.has_agent(rater) || !store.has_agent(ratee)) {
            return;
        }
        store.record_rating(rater, ratee, axes);
    };

    for (std::size_t i = 0; i < rec.subtasks.size(); ++i) {
        const SubtaskRuntime& st = rec.subtasks[i];
        for (AgentId failed : st.failed_agents) {
            if (store.has_agent(failed)) {
                TaskOutcome outcome;
                outcome.outcome_id = next_outcome_id_++;
                outcome.agent = failed;
                outcome.success = false;
                outcome.penalty = st.slashed.count(failed) ? st.slashed.at(failed) : 0;
                outcome.task_tags = st.spec.tags;
                outcome.complexity_multiplier = rec.complexity_multiplier;
                store.update_card(outcome);
            }
            rate(rec.manager, failed, {0.0, 0.0, 0.25, 0.0});
        }
        if (!st.capability_owner) {
            continue;
        }
        const AgentId owner = *st.capability_owner;
        if (st.status == SubtaskStatus::completed && store.has_agent(owner)) {
            const double fraction = report.fractions[i];
            const bool on_time = st.completed_at <= st.deadline;
            TaskOutcome outcome;
            outcome.outcome_id = next_outcome_id_++;
            outcome.agent = owner;
            outcome.success = fraction > 0.0;
            outcome.reward = report.subtask_payouts[i];
            outcome.task_tags = st.spec.tags;
            outcome.observed_latency =
                static_cast<double>(std::max<SimTime>(1, st.completed_at - st.started_at + 1));
            outcome.complexity_multiplier = rec.complexity_multiplier;
            store.update_card(outcome);
            if (fraction > 0.0) {
                rate(rec.manager, owner,
                     {st.delivered_quality, on_time ? 1.0 : 0.25, 0.75, 1.0});
            } else {
                rate(rec.manager, owner,
                     {st.delivered_quality, on_time ? 1.0 : 0.25, 0.5, 0.5});
            }
            rate(owner, rec.manager, {0.75, 0.75, 0.75, fraction > 0.0 ? 1.0 : 0.5});
        }
    }
    rec.feedback_applied = true;
    log(now, task, std::nullopt, "feedback", std::nullopt, "");
}

std::vector<CustodyRef> TaskBook::custody_reclaim(AgentId agent, CustodyStore& custody,
                                                  SimTime now) {
    const std::vector<CustodyRef> pending = custody.reclaim(agent);
    for (const CustodyRef& ref : pending) {
        if (!has_record(ref.task)) {
            continue;
        }
        TaskRecord& rec = record(ref.task);
        if (ref.subtask >= rec.subtasks.size()) {
            continue;
        }
        SubtaskRuntime& st = rec.subtasks[ref.subtask];
        if (st.capability_owner && *st.capability_owner == agent &&
            st.status == SubtaskStatus::assigned) {
            st.assignee = agent;
            st.custodian.reset();
            log(now, ref.task, ref.subtask, "reclaimed", agent, "");
        }
    }
    return pending;
}

std::vector<ScaleDecision> autoscale_check(const std::vector<AgentLoadMetric>& metrics,
                                           double cpu_threshold,
                                           std::int64_t pending_threshold) {
    std::vector<ScaleDecision> decisions;
    for (const AgentLoadMetric& metric : metrics) {
        if (metric.cpu_load > cpu_threshold) {
            decisions.push_back({metric.agent, "cpu-load"});
        } else if (metric.pending_tasks > pending_threshold) {
            decisions.push_back({metric.agent, "pending-tasks"});
        }
    }
    return decisions;
}

AgentCard make_replica(const AgentCard& parent, AgentId new_id) {
    AgentCard replica;
    replica.id = new_id;
    replica.tags = parent.tags;
    replica.attributes = parent.attributes;
    replica.endpoint = parent.endpoint + "/replica-" + std::to_string(new_id);
    replica.latency_indicator = parent.latency_indicator;
    replica.function_signatures = parent.function_signatures;
    return replica;
}

}  // namespace isek

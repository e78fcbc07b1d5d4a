#include "isek/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "isek/log.hpp"
#include "isek/matching.hpp"
#include "isek/policy.hpp"

namespace isek {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

// Bids follow each group's behavior profile: price as a jittered fraction of
// the bounty, projected completion from the duration estimate scaled by the
// agent's latency factor. Rate-limited agents decline to bid.
class Simulation::ScenarioBidders : public BidCollector {
public:
    ScenarioBidders(Simulation& sim, TaskId task, std::size_t subtask)
        : sim_(sim), task_(task), subtask_(subtask) {}

    std::vector<Bid> collect(const TaskRequest&, const SubtaskSpec& spec, Tokens bounty,
                             SimTime, const std::vector<AgentId>& invited) override {
        std::vector<Bid> bids;
        RngStream rng = RngStream::derive(sim_.config_.seed, stream::lifecycle,
                                          task_ * 1000003ULL + subtask_,
                                          static_cast<std::uint64_t>(sim_.now_));
        for (AgentId id : invited) {
            if (id >= sim_.behavior_.size()) {
                continue;
            }
            const AgentCard& card = sim_.store_.card(id);
            if (!rate_limit_check(card.reputation, kRateLimitThreshold, sim_.active_[id],
                                  kRateLimitCap)) {
                warn("bids: agent " + std::to_string(id) +
                     " is rate-limited and does not bid");
                continue;
            }
            const BehaviorSpec& behavior = sim_.behavior_[id];
            const double jitter = 0.9 + 0.2 * rng.next_double();
            Bid bid;
            bid.agent = id;
            bid.price = std::min<Tokens>(
                bounty,
                std::max<Tokens>(0, static_cast<Tokens>(std::llround(
                                        behavior.price_factor *
                                        static_cast<double>(bounty) * jitter))));
            bid.projected_quality = behavior.quality_mean;
            bid.projected_completion = std::max(
                1.0, std::floor(spec.duration_estimate * behavior.latency_factor + 0.5));
            bids.push_back(bid);
        }
        return bids;
    }

private:
    Simulation& sim_;
    TaskId task_;
    std::size_t subtask_;
};

// Deterministic execution: every assignment carries a pre-drawn plan (steps
// needed, fault step, delivered quality); stepping just advances the counter.
class Simulation::ScenarioWorkers : public WorkerModel {
public:
    explicit ScenarioWorkers(Simulation& sim) : sim_(sim) {}

    WorkStep step(AgentId worker, const TaskRecord& record, std::size_t subtask,
                  RngStream&) override {
        auto it = sim_.plans_.find({record.request.id, subtask});
        if (it == sim_.plans_.end()) {
            return {WorkStep::Kind::fault, 0.0};
        }
        const AgentId owner = record.subtasks[subtask].capability_owner.value_or(worker);
        auto forced = sim_.forced_faults_.find(worker);
        if (forced == sim_.forced_faults_.end()) {
            forced = sim_.forced_faults_.find(owner);
        }
        if (forced != sim_.forced_faults_.end()) {
            sim_.forced_faults_.erase(forced);
            return {WorkStep::Kind::fault, 0.0};
        }
        if (worker >= sim_.online_.size() || !sim_.online_[worker]) {
            return {WorkStep::Kind::fault, 0.0};
        }
        WorkPlan& plan = it->second;
        plan.steps_done += 1;
        if (plan.will_fault && plan.steps_done == plan.fault_step) {
            return {WorkStep::Kind::fault, 0.0};
        }
        if (plan.steps_done >= plan.steps_needed) {
            return {WorkStep::Kind::completed, plan.quality};
        }
        return {WorkStep::Kind::progress, 0.0};
    }

private:
    Simulation& sim_;
};

Simulation::Simulation(ScenarioConfig config)
    : config_(std::move(config)),
      graph_(generate_graph(
          config_.graph.nodes, config_.graph.mean_degree, config_.graph.kind,
          RngStream::derive(config_.seed, stream::topology).next_u64())),
      book_(config_.lifecycle) {
    AgentId id = 0;
    for (const PopulationGroup& group : config_.population.groups) {
        for (std::size_t k = 0; k < group.count; ++k) {
            AgentCard card;
            card.id = id;
            card.tags = group.tags;
            card.attributes = group.attributes;
            card.endpoint = "sim://agent/" + std::to_string(id);
            store_.register_agent(card);
            node_of_agent_.push_back(static_cast<NodeId>(id));
            behavior_.push_back(group.behavior);
            online_.push_back(1);
            stats_.push_back(AgentStats{});
            active_.push_back(0);
            ledger_.create_account(id);
            if (config_.population.initial_balance > 0) {
                ledger_.mint(id, config_.population.initial_balance);
            }
            ++id;
        }
    }
    next_agent_id_ = id;
    ledger_.create_account(kTreasuryAccount);
    if (config_.incentives.orchestrator.pool > 0) {
        ledger_.mint(kTreasuryAccount, config_.incentives.orchestrator.pool);
    }
    trust_ = init_trust(snapshot_cards(), config_.trust.init, config_.trust.learning_rate);
}

MetricsReport Simulation::run() {
    if (ran_) {
        throw std::logic_error("simulation: run() may only be called once");
    }
    ran_ = true;

    // Warn handlers are per-thread, so concurrent simulations on separate
    // threads each capture only their own diagnostics.
    struct CaptureGuard {
        explicit CaptureGuard(Simulation* sim) {
            set_warn_handler([sim](const std::string& message) {
                ++sim->warning_counts_[message];
                ++sim->warnings_total_;
            });
        }
        ~CaptureGuard() { set_warn_handler({}); }
    } guard(this);

    for (NodeId node = 0; node < graph_.node_count(); ++node) {
        report_.trust.push_back({0, node, trust_.scores[node]});
    }

    for (now_ = 0; now_ < config_.rounds; ++now_) {
        fault_phase();
        publish_phase();
        gossip_phase();
        trust_phase();
        recruit_phase();
        execute_phase();
        monitor_phase();
        settle_phase();
        autoscale_phase();
    }
    finalize();
    return report_;
}

void Simulation::fault_phase() {
    for (const FaultSpec& fault : config_.faults) {
        if (fault.time != now_) {
            continue;
        }
        switch (fault.kind) {
            case FaultSpec::Kind::offline:
                take_offline(fault.agent, fault.custodian);
                break;
            case FaultSpec::Kind::resume:
                bring_online(fault.agent);
                break;
            case FaultSpec::Kind::force_fault:
                forced_faults_.insert(fault.agent);
                sim_events_.push_back(
                    {now_, 0, std::nullopt, "fault-injected", fault.agent, ""});
                break;
        }
    }
}

void Simulation::take_offline(AgentId agent, std::optional<AgentId> custodian) {
    if (agent >= online_.size() || !online_[agent]) {
        return;
    }
    online_[agent] = 0;
    sim_events_.push_back({now_, 0, std::nullopt, "offline", agent, ""});

    bool has_custody = false;
    if (custodian && *custodian < online_.size() && online_[*custodian] &&
        *custodian != agent) {
        try {
            custody_.register_custody(agent, *custodian);
            has_custody = true;
            sim_events_.push_back({now_, 0, std::nullopt, "custody", *custodian,
                                   "for agent " + std::to_string(agent)});
        } catch (const std::exception& e) {
            warn(std::string("custody: ") + e.what());
        }
    }

    for (TaskId id : book_.task_ids()) {
        TaskRecord& rec = book_.record(id);
        if (is_terminal(rec.state)) {
            continue;
        }
        for (std::size_t i = 0; i < rec.subtasks.size(); ++i) {
            SubtaskRuntime& st = rec.subtasks[i];
            if (!st.capability_owner || *st.capability_owner != agent) {
                continue;
            }
            if (st.status != SubtaskStatus::assigned &&
                st.status != SubtaskStatus::executing) {
                continue;
            }
            if (st.assignee && *st.assignee != agent) {
                continue;  // already proxied elsewhere
            }
            if (!has_custody) {
                continue;  // no custodian: the next execution step faults
            }
            st.assignee = *custodian;
            st.custodian = *custodian;
            custody_.enqueue(agent, id, i);
            if (st.status == SubtaskStatus::executing) {
                custody_.mark_in_flight(agent, id, i);
            }
            auto plan_it = plans_.find({id, i});
            const int done = plan_it != plans_.end() ? plan_it->second.steps_done : 0;
            install_plan(id, i, agent, *custodian);
            plans_[{id, i}].steps_done = done;
            sim_events_.push_back(
                {now_, id, i, "handover", *custodian, "owner=" + std::to_string(agent)});
        }
    }
}

void Simulation::bring_online(AgentId agent) {
    if (agent >= online_.size() || online_[agent]) {
        return;
    }
    online_[agent] = 1;
    sim_events_.push_back({now_, 0, std::nullopt, "online", agent, ""});
    if (custody_.is_custodied(agent)) {
        const std::vector<CustodyRef> refs = book_.custody_reclaim(agent, custody_, now_);
        for (const CustodyRef& ref : refs) {
            if (!book_.has_record(ref.task)) {
                continue;
            }
            auto plan_it = plans_.find({ref.task, ref.subtask});
            const int done = plan_it != plans_.end() ? plan_it->second.steps_done : 0;
            install_plan(ref.task, ref.subtask, agent, agent);
            plans_[{ref.task, ref.subtask}].steps_done = done;
        }
    }
}

void Simulation::publish_phase() {
    for (const TaskSpec& spec : config_.tasks) {
        if (spec.publish_at != now_) {
            continue;
        }
        const AgentId manager = spec.publisher.value_or(0);
        try {
            book_.publish(spec.request, manager, ledger_, now_, spec.complexity);
        } catch (const std::exception& e) {
            warn(std::string("publish: ") + e.what());
            sim_events_.push_back(
                {now_, spec.request.id, std::nullopt, "publish-failed", manager, e.what()});
            continue;
        }
        book_.decompose(spec.request.id, ExplicitDecomposer(spec.dag), now_);
        orchestrators_[manager].workflows += 1;
        // Discovery: the publisher's node starts gossiping the request.
        TaskGossip tg{
            init_gossip(graph_, {node_of_agent_[manager]}, config_.gossip, spec.request.id),
            RngStream::derive(config_.seed, stream::gossip, spec.request.id), true};
        report_.gossip.push_back({spec.request.id, 0, tg.state.informed_count(), 0});
        gossips_.emplace(spec.request.id, std::move(tg));
    }
}

void Simulation::gossip_phase() {
    for (auto& [task, tg] : gossips_) {
        if (!tg.active) {
            continue;
        }
        if (!growth_possible(tg.state, graph_) ||
            !gossip_step(tg.state, graph_, config_.gossip, tg.rng)) {
            tg.active = false;
            continue;
        }
        report_.gossip.push_back({task, tg.state.round, tg.state.informed_count(),
                                  tg.state.messages_per_round.back()});
    }
}

void Simulation::trust_phase() {
    if (config_.trust.init == TrustInit::from_reputation) {
        // Re-seed from the live reputations; diffusion then spreads them.
        std::vector<double> sums(graph_.node_count(), 0.0);
        std::vector<std::size_t> counts(graph_.node_count(), 0);
        for (AgentId id : store_.agent_ids()) {
            const NodeId node = node_of_agent_[id];
            sums[node] += composite_reputation(store_.card(id).reputation);
            counts[node] += 1;
        }
        for (std::size_t n = 0; n < graph_.node_count(); ++n) {
            trust_.scores[n] = counts[n] != 0
                                   ? sums[n] / static_cast<double>(counts[n])
                                   : kColdStartPrior;
        }
    }
    for (int s = 0; s < config_.trust.steps_per_round; ++s) {
        trust_ = diffuse_step(trust_, graph_);
        for (NodeId node = 0; node < graph_.node_count(); ++node) {
            report_.trust.push_back({trust_.iteration, node, trust_.scores[node]});
        }
    }
}

void Simulation::recruit_phase() {
    for (TaskId id : book_.task_ids()) {
        TaskRecord& rec = book_.record(id);
        if (rec.state != TaskState::Discovering && rec.state != TaskState::Recruiting) {
            continue;
        }
        if (now_ > rec.request.deadline) {
            book_.abandon_recruitment(id, now_);
            continue;
        }
        auto gossip_it = gossips_.find(id);
        if (gossip_it != gossips_.end() && gossip_it->second.active) {
            continue;  // quoting starts once the announcement wave settles
        }
        for (std::size_t i = 0; i < rec.subtasks.size(); ++i) {
            if (rec.subtasks[i].status != SubtaskStatus::pending) {
                continue;
            }
            recruit_subtask(rec, i);
            if (rec.state == TaskState::Executing) {
                break;  // fully staffed this round
            }
        }
    }
}

void Simulation::recruit_subtask(TaskRecord& rec, std::size_t subtask) {
    auto gossip_it = gossips_.find(rec.request.id);
    if (gossip_it == gossips_.end()) {
        return;
    }
    const GossipState& gs = gossip_it->second.state;

    std::vector<AgentCard> eligible;
    std::vector<NodeId> eligible_nodes;
    std::vector<AgentId> eligible_ids;
    for (AgentId id : store_.agent_ids()) {
        if (id == rec.manager) {
            continue;
        }
        const NodeId node = node_of_agent_[id];
        if (!gs.has_seen(node)) {
            continue;  // the request never reached this agent
        }
        const AgentCard& card = store_.card(id);
        if (!satisfies(card.attributes, rec.request.policy)) {
            continue;  // sealed request stays closed
        }
        if (!online_[id] && !custody_.is_custodied(id)) {
            continue;
        }
        eligible.push_back(card);
        eligible_nodes.push_back(node);
        eligible_ids.push_back(id);
    }
    if (eligible.empty()) {
        return;
    }

    const SubtaskRuntime& st = rec.subtasks[subtask];
    TaskRequest sub = rec.request;
    if (!st.spec.tags.empty()) {
        sub.requirement_tags = st.spec.tags;
    }

    const std::size_t dim = config_.matching.dimension;
    std::vector<Embedding> embeddings;
    embeddings.reserve(eligible.size());
    for (const AgentCard& card : eligible) {
        embeddings.push_back(embed_card(card, dim));
    }
    const Embedding query = embed_task(sub, dim);

    const MatchThresholds& thr = config_.matching.thresholds;
    const std::vector<Candidate> candidates =
        generate_candidates(eligible, embeddings, query, thr.candidate_threshold);
    for (const Candidate& c : candidates) {
        report_.matching.push_back({rec.request.id, "candidates", c.agent, c.similarity});
    }
    if (candidates.empty()) {
        return;
    }

    const TagOverlapScorer scorer;
    const std::vector<FilteredCandidate> filtered =
        semantic_filter(eligible, candidates, sub, scorer, thr.filter_threshold);
    for (const FilteredCandidate& f : filtered) {
        report_.matching.push_back({rec.request.id, "filter", f.agent, f.semantic_score});
    }
    if (filtered.empty()) {
        return;
    }

    std::map<AgentId, CapabilityVector> capabilities;
    for (std::size_t k = 0; k < eligible.size(); ++k) {
        const AgentId id = eligible_ids[k];
        const AgentStats& s = stats_[id];
        RuntimeStats runtime;
        runtime.success_rate = s.attempts != 0 ? static_cast<double>(s.successes) /
                                                     static_cast<double>(s.attempts)
                                               : kColdStartPrior;
        runtime.latency = eligible[k].latency_indicator;
        runtime.availability = online_[id] ? 1.0 : 0.5;
        runtime.load = static_cast<double>(active_[id]);
        capabilities[id] = capability_vector(runtime);
    }
    const std::map<AgentId, double> trust_scores =
        trust_by_agent(eligible, trust_, eligible_nodes);

    std::vector<RankedAgent> ranked =
        rank(eligible, filtered, capabilities, trust_scores, sub, config_.matching.weights);
    for (const RankedAgent& r : ranked) {
        report_.matching.push_back({rec.request.id, "ranked", r.agent, r.score});
    }
    if (ranked.size() > thr.top_k) {
        ranked.resize(thr.top_k);
    }

    const std::map<AgentId, double> reputations = composite_by_agent(eligible_ids);
    std::map<AgentId, double> incentive_scores;
    for (AgentId id : eligible_ids) {
        const double composite = incentive_composite(id, sub.requirement_tags);
        if (composite >= 0.0) {
            incentive_scores[id] = composite;
        }
    }
    ScenarioBidders bidders(*this, rec.request.id, subtask);
    RecruitContext ctx{bidders, ledger_, custody_, reputations, incentive_scores, now_};
    const RecruitOutcome outcome = book_.recruit(rec.request.id, subtask, ranked, ctx);
    if (outcome.assigned) {
        install_plan(rec.request.id, subtask, outcome.capability_owner, outcome.assignee);
        stats_[outcome.capability_owner].claimed += 1;
        active_[outcome.capability_owner] += 1;
        orchestrators_[rec.manager].assignments += 1;
    }
}

void Simulation::install_plan(TaskId task, std::size_t subtask, AgentId owner,
                              AgentId executor) {
    const TaskRecord& rec = book_.record(task);
    const SubtaskRuntime& st = rec.subtasks[subtask];
    auto bid_it = st.bids.find(owner);
    const double projected = bid_it != st.bids.end()
                                 ? bid_it->second.projected_completion
                                 : st.spec.duration_estimate;
    const BehaviorSpec& behavior = behavior_[executor];
    RngStream rng = RngStream::derive(config_.seed, stream::population, executor,
                                      task * 1000003ULL + subtask);
    WorkPlan plan;
    plan.executor = executor;
    plan.steps_needed = std::max(1, static_cast<int>(std::llround(projected)));
    plan.will_fault = rng.bernoulli(1.0 - behavior.success_probability);
    plan.fault_step =
        1 + static_cast<int>(rng.next_below(static_cast<std::uint32_t>(plan.steps_needed)));
    plan.quality = clamp01(behavior.quality_mean +
                           behavior.quality_spread * (2.0 * rng.next_double() - 1.0));
    plans_[{task, subtask}] = plan;
}

void Simulation::execute_phase() {
    ScenarioWorkers workers(*this);
    RngStream rng =
        RngStream::derive(config_.seed, stream::harness, static_cast<std::uint64_t>(now_));
    for (TaskId id : book_.task_ids()) {
        if (book_.record(id).state != TaskState::Executing) {
            continue;
        }
        book_.execute_step(id, workers, rng, now_, &custody_);
    }
    forced_faults_.clear();  // injections target the round they land in
}

void Simulation::monitor_phase() {
    for (TaskId id : book_.task_ids()) {
        if (book_.record(id).state != TaskState::Executing) {
            continue;
        }
        const std::vector<Interrupt> interrupts = book_.monitor_check(id, now_);
        for (const Interrupt& interrupt : interrupts) {
            TaskRecord& rec = book_.record(id);
            if (rec.state != TaskState::Executing) {
                break;  // an earlier interrupt exhausted the fallback pool
            }
            const SubtaskRuntime& st = rec.subtasks[interrupt.subtask];
            if (!st.capability_owner) {
                continue;
            }
            const AgentId failed_owner = *st.capability_owner;
            const TagSet class_tags =
                st.spec.tags.empty() ? rec.request.requirement_tags : st.spec.tags;

            const std::map<AgentId, double> reputations =
                composite_by_agent(store_.agent_ids());
            std::map<AgentId, double> incentive_scores;
            for (AgentId agent : store_.agent_ids()) {
                const double composite = incentive_composite(agent, class_tags);
                if (composite >= 0.0) {
                    incentive_scores[agent] = composite;
                }
            }
            ScenarioBidders bidders(*this, id, interrupt.subtask);
            RecruitContext ctx{bidders,     ledger_,          custody_,
                               reputations, incentive_scores, now_};
            const RecruitOutcome outcome = book_.promote_fallback(id, interrupt, ctx);
            record_failed_owner(id, interrupt.subtask, failed_owner);
            if (outcome.assigned) {
                install_plan(id, interrupt.subtask, outcome.capability_owner,
                             outcome.assignee);
                stats_[outcome.capability_owner].claimed += 1;
                active_[outcome.capability_owner] += 1;
                orchestrators_[rec.manager].assignments += 1;
            }
        }
    }
}

void Simulation::record_failed_owner(TaskId task, std::size_t subtask, AgentId owner) {
    if (owner < stats_.size()) {
        stats_[owner].attempts += 1;
        if (active_[owner] > 0) {
            active_[owner] -= 1;
        }
    }
    const TaskRecord& rec = book_.record(task);
    auto slash_it = rec.subtasks[subtask].slashed.find(owner);
    if (slash_it != rec.subtasks[subtask].slashed.end()) {
        total_slashed_ += slash_it->second;
    }
    plans_.erase({task, subtask});
}

void Simulation::settle_phase() {
    const DefaultArbiter arbiter(config_.lifecycle.review_tolerance);
    for (TaskId id : book_.task_ids()) {
        TaskRecord& rec = book_.record(id);
        if (rec.settled || is_terminal(rec.state)) {
            continue;
        }
        if (rec.state == TaskState::Verifying) {
            const bool flagged = book_.flag_dispute(id, now_);
            const Verdict verdict =
                flagged ? book_.review(id, arbiter, now_) : book_.accept_verdict(id);
            const SettlementReport rep = book_.settle(id, ledger_, verdict, now_, &custody_);
            post_settlement(id, rep);
            book_.feedback(id, store_, now_);
        } else if (rec.state == TaskState::Disputed) {
            const Verdict verdict = book_.review(id, arbiter, now_);
            const SettlementReport rep = book_.settle(id, ledger_, verdict, now_, &custody_);
            post_settlement(id, rep);
            book_.feedback(id, store_, now_);
        }
    }
}

void Simulation::post_settlement(TaskId task, const SettlementReport& rep) {
    const TaskRecord& rec = book_.record(task);
    for (std::size_t i = 0; i < rec.subtasks.size(); ++i) {
        const SubtaskRuntime& st = rec.subtasks[i];
        if (!st.capability_owner) {
            continue;
        }
        if (st.status == SubtaskStatus::completed) {
            conclude_subtask(task, st, i, rep.fractions[i]);
        } else if (st.status == SubtaskStatus::assigned ||
                   st.status == SubtaskStatus::executing) {
            // Frozen mid-flight by a dispute elsewhere; released without blame.
            const AgentId owner = *st.capability_owner;
            if (active_[owner] > 0) {
                active_[owner] -= 1;
            }
            plans_.erase({task, i});
        }
    }
    for (const auto& [agent, amount] : rep.payouts) {
        (void)agent;
        total_payouts_ += amount;
    }
    for (const auto& [agent, amount] : rep.custody_fees) {
        (void)agent;
        total_custody_fees_ += amount;
    }
    total_refunds_ += rep.refund;
    if (rep.final_state == TaskState::Settled && !rec.dispute_flag) {
        orchestrators_[rec.manager].clean_workflows += 1;
    }
}

void Simulation::conclude_subtask(TaskId task, const SubtaskRuntime& st, std::size_t index,
                                  double fraction) {
    const AgentId owner = *st.capability_owner;
    AgentStats& s = stats_[owner];
    s.completed += 1;
    s.attempts += 1;
    if (fraction > 0.0) {
        s.successes += 1;
    }
    const double duration = static_cast<double>(st.completed_at - st.started_at + 1);
    s.own_time = duration;
    const TagSet& tags =
        st.spec.tags.empty() ? book_.record(task).request.requirement_tags : st.spec.tags;
    class_times_[tag_class(tags)].push_back(duration);
    if (active_[owner] > 0) {
        active_[owner] -= 1;
    }
    plans_.erase({task, index});
    if (fraction > 0.0) {
        orchestrators_[book_.record(task).manager].successful_assignments += 1;
    }
}

void Simulation::autoscale_phase() {
    if (!config_.autoscale.enabled) {
        return;
    }
    std::vector<AgentLoadMetric> metrics;
    for (AgentId id : store_.agent_ids()) {
        AgentLoadMetric metric;
        metric.agent = id;
        metric.pending_tasks = static_cast<std::int64_t>(active_[id]);
        metric.cpu_load =
            std::min(1.0, static_cast<double>(active_[id]) / kAgentSlotCapacity);
        metrics.push_back(metric);
    }
    const std::vector<ScaleDecision> decisions = autoscale_check(
        metrics, config_.autoscale.cpu_threshold, config_.autoscale.pending_threshold);
    for (const ScaleDecision& decision : decisions) {
        if (replicated_.count(decision.agent) != 0) {
            continue;  // one replica per agent per run
        }
        const AgentId id = next_agent_id_++;
        store_.register_agent(make_replica(store_.card(decision.agent), id));
        node_of_agent_.push_back(node_of_agent_[decision.agent]);
        behavior_.push_back(behavior_[decision.agent]);
        online_.push_back(1);
        stats_.push_back(AgentStats{});
        active_.push_back(0);
        ledger_.create_account(id);
        if (config_.population.initial_balance > 0) {
            ledger_.mint(id, config_.population.initial_balance);
        }
        replicated_.insert(decision.agent);
        sim_events_.push_back({now_, 0, std::nullopt, "autoscale", id,
                               decision.reason + " parent=" +
                                   std::to_string(decision.agent)});
    }
}

void Simulation::finalize() {
    SummaryStats& summary = report_.summary;
    for (TaskId id : book_.task_ids()) {
        const TaskRecord& rec = book_.record(id);
        summary.tasks_published += 1;
        if (rec.state == TaskState::Settled) {
            summary.tasks_settled += 1;
        } else if (rec.state == TaskState::Failed) {
            summary.tasks_failed += 1;
        } else {
            summary.tasks_unfinished += 1;
        }
    }

    std::map<std::uint64_t, std::vector<double>> coverage;
    for (const GossipRow& row : report_.gossip) {
        coverage[row.trial].push_back(static_cast<double>(row.informed));
        summary.gossip_messages += row.messages;
    }
    for (auto& [task, trace] : coverage) {
        (void)task;
        while (trace.size() < static_cast<std::size_t>(config_.gossip.ttl) + 1) {
            trace.push_back(trace.back());
        }
        summary.predicted_messages +=
            expected_total_messages(1, config_.gossip.forward_probability,
                                    graph_.mean_degree(), trace, config_.gossip.ttl);
        summary.mean_coverage += trace.back() / static_cast<double>(graph_.node_count());
    }
    if (!coverage.empty()) {
        summary.mean_coverage /= static_cast<double>(coverage.size());
    }

    std::vector<std::pair<AgentId, double>> scores;
    for (const auto& [agent, track] : orchestrators_) {
        OrchestratorStats stats;
        stats.match_efficiency =
            track.assignments != 0 ? static_cast<double>(track.successful_assignments) /
                                         static_cast<double>(track.assignments)
                                   : 0.0;
        stats.coordination_reliability =
            track.workflows != 0 ? static_cast<double>(track.clean_workflows) /
                                       static_cast<double>(track.workflows)
                                 : 0.0;
        stats.weight_delta = config_.incentives.orchestrator.weight_delta;
        stats.weight_epsilon = config_.incentives.orchestrator.weight_epsilon;
        scores.emplace_back(agent, orchestrator_score(stats));
    }
    if (config_.incentives.orchestrator.pool > 0 && !scores.empty()) {
        const auto payments = distribute_orchestrator_pool(
            scores, config_.incentives.orchestrator.pool, kTreasuryAccount, ledger_);
        for (const auto& [agent, amount] : payments) {
            orchestrator_paid_ += amount;
            sim_events_.push_back({config_.rounds, 0, std::nullopt, "orchestrator-paid",
                                   agent, std::to_string(amount)});
        }
    }

    report_.events = book_.events();
    report_.events.insert(report_.events.end(), sim_events_.begin(), sim_events_.end());
    std::stable_sort(report_.events.begin(), report_.events.end(),
                     [](const CheckpointEvent& a, const CheckpointEvent& b) {
                         return a.time < b.time;
                     });

    report_.ledger = ledger_.journal();
    for (AgentId id : store_.agent_ids()) {
        const ReputationRecord& rep = store_.card(id).reputation;
        report_.reputation.push_back({id, rep.accuracy, rep.latency, rep.communication,
                                      rep.reliability, composite_reputation(rep),
                                      rep.task_diversity()});
    }

    summary.agents = store_.size();
    summary.nodes = graph_.node_count();
    summary.edges = graph_.edge_count();
    summary.rounds = config_.rounds;
    summary.total_minted = ledger_.total_minted();
    summary.total_payouts = total_payouts_;
    summary.total_custody_fees = total_custody_fees_;
    summary.total_refunds = total_refunds_;
    summary.total_slashed = total_slashed_;
    summary.orchestrator_paid = orchestrator_paid_;
    summary.conservation = ledger_.conservation_holds();
    summary.warning_count = warnings_total_;
    for (const auto& [message, count] : warning_counts_) {
        report_.warnings.push_back(
            count == 1 ? message : message + " x" + std::to_string(count));
    }
}

double Simulation::incentive_composite(AgentId agent, const TagSet& task_tags) const {
    const AgentStats& base = stats_[agent];
    if (base.completed == 0 || !(base.own_time > 0.0)) {
        return -1.0;  // cold start: the caller leaves the agent out of the map
    }
    AgentStats s = base;
    auto class_it = class_times_.find(tag_class(task_tags));
    s.median_peer_time = class_it != class_times_.end() && !class_it->second.empty()
                             ? median(class_it->second)
                             : s.own_time;
    return composite_score(success_rate(s), speed_score(s.median_peer_time, s.own_time),
                           completion_rate(s), config_.incentives.weights);
}

std::map<AgentId, double> Simulation::composite_by_agent(
    const std::vector<AgentId>& agents) const {
    std::map<AgentId, double> result;
    for (AgentId id : agents) {
        result[id] = composite_reputation(store_.card(id).reputation);
    }
    return result;
}

std::vector<AgentCard> Simulation::snapshot_cards() const {
    std::vector<AgentCard> cards;
    cards.reserve(store_.size());
    for (AgentId id : store_.agent_ids()) {
        cards.push_back(store_.card(id));
    }
    return cards;
}

MetricsReport run_simulation(const ScenarioConfig& config) {
    Simulation sim(config);
    return sim.run();
}

}  // namespace isek

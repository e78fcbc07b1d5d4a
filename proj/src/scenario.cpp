#include "isek/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "isek/policy.hpp"
#include "json.hpp"

namespace isek {

namespace {

using nlohmann::json;

class Collector {
public:
    void add(const std::string& where, const std::string& what) {
        violations_.push_back(where + ": " + what);
    }
    bool empty() const { return violations_.empty(); }
    std::string message(const std::string& origin) const {
        std::ostringstream out;
        out << "scenario " << origin << " has " << violations_.size()
            << " constraint violation(s):";
        for (const std::string& v : violations_) {
            out << "\n  - " << v;
        }
        return out.str();
    }

private:
    std::vector<std::string> violations_;
};

template <typename T>
T field(const json& j, const char* key, T fallback, Collector& errors,
        const std::string& where) {
    if (!j.contains(key)) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        errors.add(where, std::string("field '") + key + "' has the wrong type (" +
                              e.what() + ")");
        return fallback;
    }
}

TagSet tag_set(const json& j, const char* key, Collector& errors,
               const std::string& where) {
    TagSet tags;
    if (!j.contains(key)) {
        return tags;
    }
    try {
        for (const auto& entry : j.at(key)) {
            tags.insert(entry.get<std::string>());
        }
    } catch (const json::exception& e) {
        errors.add(where, std::string("field '") + key + "' must be a string array (" +
                              e.what() + ")");
    }
    return tags;
}

void check_unit(double value, const char* name, Collector& errors,
                const std::string& where) {
    if (!(value >= 0.0 && value <= 1.0)) {
        errors.add(where, std::string(name) + " must lie in [0, 1], got " +
                              std::to_string(value));
    }
}

void parse_graph(const json& j, GraphSpec& spec, Collector& errors) {
    const std::string where = "graph";
    spec.nodes = field<std::size_t>(j, "nodes", spec.nodes, errors, where);
    spec.mean_degree = field<double>(j, "mean_degree", spec.mean_degree, errors, where);
    const std::string kind =
        field<std::string>(j, "kind", std::string(to_string(spec.kind)), errors, where);
    try {
        spec.kind = topology_kind_from_string(kind);
    } catch (const std::exception& e) {
        errors.add(where, e.what());
    }
    if (spec.nodes < 2) {
        errors.add(where, "a network needs at least 2 nodes");
    }
    if (!(spec.mean_degree > 0.0) ||
        spec.mean_degree >= static_cast<double>(spec.nodes)) {
        errors.add(where, "mean degree must lie in (0, nodes)");
    }
}

void parse_gossip(const json& j, ScenarioConfig& config, Collector& errors) {
    const std::string where = "gossip";
    config.gossip.forward_probability = field<double>(
        j, "forward_probability", config.gossip.forward_probability, errors, where);
    config.gossip.ttl = field<int>(j, "ttl", config.gossip.ttl, errors, where);
    config.gossip.request_count =
        field<int>(j, "request_count", config.gossip.request_count, errors, where);
    config.issuers = field<std::size_t>(j, "issuers", config.issuers, errors, where);
    check_unit(config.gossip.forward_probability, "forward probability", errors, where);
    if (config.gossip.ttl < 0) {
        errors.add(where, "ttl must be non-negative");
    }
    if (config.gossip.request_count < 1) {
        errors.add(where, "request count must be positive");
    }
    if (config.issuers < 1) {
        errors.add(where, "at least one issuer is required");
    }
}

void parse_trust(const json& j, TrustSpec& spec, Collector& errors) {
    const std::string where = "trust";
    spec.learning_rate = field<double>(j, "learning_rate", spec.learning_rate, errors, where);
    spec.steps_per_round =
        field<int>(j, "steps_per_round", spec.steps_per_round, errors, where);
    const std::string init = field<std::string>(
        j, "init",
        spec.init == TrustInit::from_reputation ? "from_reputation" : "uniform_prior",
        errors, where);
    if (init == "from_reputation") {
        spec.init = TrustInit::from_reputation;
    } else if (init == "uniform_prior") {
        spec.init = TrustInit::uniform_prior;
    } else {
        errors.add(where, "init must be 'from_reputation' or 'uniform_prior'");
    }
    if (!(spec.learning_rate > 0.0)) {
        errors.add(where, "learning rate must be positive");
    }
    if (spec.steps_per_round < 0) {
        errors.add(where, "steps per round must be non-negative");
    }
}

void parse_matching(const json& j, MatchSpec& spec, Collector& errors) {
    const std::string where = "matching";
    spec.dimension = field<std::size_t>(j, "dimension", spec.dimension, errors, where);
    spec.thresholds.candidate_threshold = field<double>(
        j, "candidate_threshold", spec.thresholds.candidate_threshold, errors, where);
    spec.thresholds.filter_threshold = field<double>(
        j, "filter_threshold", spec.thresholds.filter_threshold, errors, where);
    spec.thresholds.top_k =
        field<std::size_t>(j, "top_k", spec.thresholds.top_k, errors, where);
    if (j.contains("rank_weights")) {
        const json& w = j.at("rank_weights");
        spec.weights.alpha = field<double>(w, "alpha", spec.weights.alpha, errors, where);
        spec.weights.beta = field<double>(w, "beta", spec.weights.beta, errors, where);
        spec.weights.gamma = field<double>(w, "gamma", spec.weights.gamma, errors, where);
        spec.weights.delta = field<double>(w, "delta", spec.weights.delta, errors, where);
    }
    if (spec.dimension < 8) {
        errors.add(where, "embedding dimension must be at least 8");
    }
    if (spec.thresholds.candidate_threshold < -1.0 ||
        spec.thresholds.candidate_threshold > 1.0 ||
        spec.thresholds.filter_threshold < -1.0 || spec.thresholds.filter_threshold > 1.0) {
        errors.add(where, "thresholds must lie in [-1, 1]");
    }
    if (spec.thresholds.top_k == 0) {
        errors.add(where, "top_k must be positive");
    }
    for (double w : {spec.weights.alpha, spec.weights.beta, spec.weights.gamma,
                     spec.weights.delta}) {
        if (!(w >= 0.0 && w <= 1.0)) {
            errors.add(where, "rank weights must each lie in [0, 1]");
            break;
        }
    }
}

void parse_incentives(const json& j, IncentiveSpec& spec, LifecycleParams& lifecycle,
                      Collector& errors) {
    const std::string where = "incentives";
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        spec.weights.alpha = field<double>(w, "alpha", spec.weights.alpha, errors, where);
        spec.weights.beta = field<double>(w, "beta", spec.weights.beta, errors, where);
        spec.weights.gamma = field<double>(w, "gamma", spec.weights.gamma, errors, where);
    }
    const double sum = spec.weights.alpha + spec.weights.beta + spec.weights.gamma;
    if (std::abs(sum - 1.0) > 1e-9) {
        errors.add(where, "composite-score weight rule violated: alpha + beta + gamma "
                          "must equal 1, got " +
                              std::to_string(sum));
    }
    lifecycle.base_stake =
        field<Tokens>(j, "base_stake", lifecycle.base_stake, errors, where);
    if (lifecycle.base_stake <= 0) {
        errors.add(where, "base stake must be positive");
    }
    if (j.contains("orchestrator")) {
        const json& o = j.at("orchestrator");
        spec.orchestrator.weight_delta =
            field<double>(o, "delta", spec.orchestrator.weight_delta, errors, where);
        spec.orchestrator.weight_epsilon =
            field<double>(o, "epsilon", spec.orchestrator.weight_epsilon, errors, where);
        spec.orchestrator.pool =
            field<Tokens>(o, "pool", spec.orchestrator.pool, errors, where);
    }
    if (std::abs(spec.orchestrator.weight_delta + spec.orchestrator.weight_epsilon - 1.0) >
        1e-9) {
        errors.add(where, "orchestrator weights delta + epsilon must equal 1");
    }
    if (spec.orchestrator.pool < 0) {
        errors.add(where, "compensation pool must be non-negative");
    }
}

void parse_lifecycle(const json& j, LifecycleParams& params, Collector& errors) {
    const std::string where = "lifecycle";
    if (j.contains("bid_weights")) {
        const json& w = j.at("bid_weights");
        params.bid_weights.quality =
            field<double>(w, "quality", params.bid_weights.quality, errors, where);
        params.bid_weights.time =
            field<double>(w, "time", params.bid_weights.time, errors, where);
        params.bid_weights.price =
            field<double>(w, "price", params.bid_weights.price, errors, where);
    }
    params.custody_fee_rate =
        field<double>(j, "custody_fee_rate", params.custody_fee_rate, errors, where);
    params.review_tolerance =
        field<double>(j, "review_tolerance", params.review_tolerance, errors, where);
    params.fallback_pool_size = field<std::size_t>(j, "fallback_pool_size",
                                                   params.fallback_pool_size, errors, where);
    check_unit(params.bid_weights.quality, "bid quality weight", errors, where);
    check_unit(params.bid_weights.time, "bid time weight", errors, where);
    check_unit(params.bid_weights.price, "bid price weight", errors, where);
    check_unit(params.custody_fee_rate, "custody fee rate", errors, where);
    if (!(params.review_tolerance > 0.0)) {
        errors.add(where, "review tolerance must be positive");
    }
}

void parse_autoscale(const json& j, AutoscaleSpec& spec, Collector& errors) {
    const std::string where = "autoscale";
    spec.enabled = field<bool>(j, "enabled", true, errors, where);
    spec.cpu_threshold =
        field<double>(j, "cpu_threshold", spec.cpu_threshold, errors, where);
    spec.pending_threshold = field<std::int64_t>(j, "pending_threshold",
                                                 spec.pending_threshold, errors, where);
    check_unit(spec.cpu_threshold, "cpu threshold", errors, where);
    if (spec.pending_threshold < 0) {
        errors.add(where, "pending threshold must be non-negative");
    }
}

void parse_population(const json& j, PopulationSpec& spec, Collector& errors) {
    const std::string where = "population";
    spec.initial_balance =
        field<Tokens>(j, "initial_balance", spec.initial_balance, errors, where);
    if (spec.initial_balance < 0) {
        errors.add(where, "initial balance must be non-negative");
    }
    if (!j.contains("groups") || !j.at("groups").is_array() || j.at("groups").empty()) {
        errors.add(where, "at least one population group is required");
        return;
    }
    std::size_t index = 0;
    for (const json& g : j.at("groups")) {
        const std::string gw = where + ".groups[" + std::to_string(index) + "]";
        PopulationGroup group;
        group.count = field<std::size_t>(g, "count", 0, errors, gw);
        group.tags = tag_set(g, "tags", errors, gw);
        group.attributes = tag_set(g, "attributes", errors, gw);
        if (g.contains("behavior")) {
            const json& b = g.at("behavior");
            group.behavior.success_probability = field<double>(
                b, "success_probability", group.behavior.success_probability, errors, gw);
            group.behavior.latency_factor = field<double>(
                b, "latency_factor", group.behavior.latency_factor, errors, gw);
            group.behavior.quality_mean =
                field<double>(b, "quality_mean", group.behavior.quality_mean, errors, gw);
            group.behavior.quality_spread = field<double>(
                b, "quality_spread", group.behavior.quality_spread, errors, gw);
            group.behavior.price_factor =
                field<double>(b, "price_factor", group.behavior.price_factor, errors, gw);
        }
        if (group.count == 0) {
            errors.add(gw, "group count must be positive");
        }
        if (group.tags.empty()) {
            errors.add(gw, "recruitable agents need at least one capability tag");
        }
        check_unit(group.behavior.success_probability, "success probability", errors, gw);
        check_unit(group.behavior.quality_mean, "quality mean", errors, gw);
        check_unit(group.behavior.price_factor, "price factor", errors, gw);
        if (!(group.behavior.latency_factor > 0.0)) {
            errors.add(gw, "latency factor must be positive");
        }
        if (group.behavior.quality_spread < 0.0) {
            errors.add(gw, "quality spread must be non-negative");
        }
        spec.groups.push_back(std::move(group));
        ++index;
    }
}

void parse_tasks(const json& j, ScenarioConfig& config, Collector& errors) {
    std::set<TaskId> seen;
    std::size_t index = 0;
    for (const json& t : j) {
        const std::string where = "tasks[" + std::to_string(index) + "]";
        TaskSpec spec;
        spec.request.id = field<TaskId>(t, "id", index + 1, errors, where);
        spec.request.description =
            field<std::string>(t, "description", "", errors, where);
        spec.request.deadline = field<SimTime>(t, "deadline", 0, errors, where);
        spec.request.budget = field<Tokens>(t, "budget", 0, errors, where);
        spec.request.requirement_tags = tag_set(t, "tags", errors, where);
        spec.publish_at = field<SimTime>(t, "publish_at", 0, errors, where);
        spec.complexity = field<double>(t, "complexity", 1.0, errors, where);
        if (t.contains("publisher")) {
            spec.publisher = field<AgentId>(t, "publisher", 0, errors, where);
        }
        const std::string policy_text =
            field<std::string>(t, "policy", "", errors, where);
        try {
            spec.request.policy = parse_policy(policy_text);
        } catch (const std::exception& e) {
            errors.add(where, e.what());
        }
        if (t.contains("subtasks")) {
            std::size_t node_index = 0;
            try {
                for (const json& n : t.at("subtasks")) {
                    SubtaskSpec node;
                    node.name = field<std::string>(
                        n, "name", "s" + std::to_string(node_index), errors, where);
                    node.tags = tag_set(n, "tags", errors, where);
                    node.bounty_share = field<double>(n, "share", 0.0, errors, where);
                    node.duration_estimate =
                        field<double>(n, "duration", 1.0, errors, where);
                    spec.dag.nodes.push_back(std::move(node));
                    ++node_index;
                }
            } catch (const json::exception& e) {
                errors.add(where, std::string("subtasks must be an array (") + e.what() +
                                      ")");
            }
        } else {
            // Single implicit subtask covering the whole request.
            SubtaskSpec node;
            node.name = "whole";
            node.tags = spec.request.requirement_tags;
            node.bounty_share = 1.0;
            node.duration_estimate = 1.0;
            spec.dag.nodes.push_back(std::move(node));
        }
        if (t.contains("edges")) {
            try {
                for (const json& e : t.at("edges")) {
                    spec.dag.edges.push_back(
                        {e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
                }
            } catch (const json::exception& e) {
                errors.add(where, std::string("edges must be index pairs (") + e.what() +
                                      ")");
            }
        }
        if (!seen.insert(spec.request.id).second) {
            errors.add(where, "duplicate task id " + std::to_string(spec.request.id));
        }
        if (spec.request.budget <= 0) {
            errors.add(where, "budget must be positive");
        }
        if (spec.request.budget > config.population.initial_balance) {
            errors.add(where, "budget exceeds the publisher's initial balance");
        }
        if (spec.publish_at < 0 || spec.publish_at >= config.rounds) {
            errors.add(where, "publish time must fall inside the simulated rounds");
        }
        if (spec.request.deadline <= spec.publish_at) {
            errors.add(where, "deadline must lie after the publish time");
        }
        if (spec.complexity < 1.0) {
            errors.add(where, "complexity multiplier must be at least 1");
        }
        try {
            validate(spec.dag);
        } catch (const std::exception& e) {
            errors.add(where, e.what());
        }
        config.tasks.push_back(std::move(spec));
        ++index;
    }
}

void parse_faults(const json& j, ScenarioConfig& config, Collector& errors) {
    std::size_t index = 0;
    for (const json& f : j) {
        const std::string where = "faults[" + std::to_string(index) + "]";
        FaultSpec spec;
        const std::string kind = field<std::string>(f, "type", "offline", errors, where);
        if (kind == "offline") {
            spec.kind = FaultSpec::Kind::offline;
        } else if (kind == "resume") {
            spec.kind = FaultSpec::Kind::resume;
        } else if (kind == "force_fault") {
            spec.kind = FaultSpec::Kind::force_fault;
        } else {
            errors.add(where, "type must be offline, resume, or force_fault");
        }
        spec.time = field<SimTime>(f, "time", 0, errors, where);
        spec.agent = field<AgentId>(f, "agent", 0, errors, where);
        if (f.contains("custodian")) {
            spec.custodian = field<AgentId>(f, "custodian", 0, errors, where);
        }
        if (spec.time < 0) {
            errors.add(where, "time must be non-negative");
        }
        if (spec.custodian && *spec.custodian == spec.agent) {
            errors.add(where, "an agent cannot be its own custodian");
        }
        config.faults.push_back(spec);
        ++index;
    }
}

}  // namespace

std::size_t ScenarioConfig::agent_count() const {
    std::size_t count = 0;
    for (const PopulationGroup& group : population.groups) {
        count += group.count;
    }
    return count;
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("scenario " + origin + ": " + e.what());
    }
    Collector errors;
    ScenarioConfig config;

    if (!j.contains("seed")) {
        errors.add("scenario", "a master seed is required (runs must be reproducible)");
    } else {
        config.seed = field<std::uint64_t>(j, "seed", 0, errors, "scenario");
    }
    config.rounds = field<SimTime>(j, "rounds", config.rounds, errors, "scenario");
    if (config.rounds < 1) {
        errors.add("scenario", "at least one round is required");
    }

    static const std::set<std::string> known_keys = {
        "seed",     "rounds",    "graph",      "gossip", "trust",
        "matching", "incentives", "lifecycle", "autoscale", "population",
        "tasks",    "faults"};
    for (const auto& [key, value] : j.items()) {
        if (known_keys.count(key) == 0) {
            errors.add("scenario", "unknown key '" + key + "'");
        }
    }

    if (j.contains("graph")) {
        parse_graph(j.at("graph"), config.graph, errors);
    }
    if (j.contains("gossip")) {
        parse_gossip(j.at("gossip"), config, errors);
    }
    if (j.contains("trust")) {
        parse_trust(j.at("trust"), config.trust, errors);
    }
    if (j.contains("matching")) {
        parse_matching(j.at("matching"), config.matching, errors);
    }
    if (j.contains("incentives")) {
        parse_incentives(j.at("incentives"), config.incentives, config.lifecycle, errors);
    } else {
        parse_incentives(json::object(), config.incentives, config.lifecycle, errors);
    }
    if (j.contains("lifecycle")) {
        parse_lifecycle(j.at("lifecycle"), config.lifecycle, errors);
    }
    if (j.contains("autoscale")) {
        parse_autoscale(j.at("autoscale"), config.autoscale, errors);
    }
    if (j.contains("population")) {
        parse_population(j.at("population"), config.population, errors);
    } else {
        errors.add("population", "a population block is required");
    }
    if (j.contains("tasks")) {
        if (j.at("tasks").is_array()) {
            parse_tasks(j.at("tasks"), config, errors);
        } else {
            errors.add("tasks", "must be an array");
        }
    }
    if (j.contains("faults")) {
        if (j.at("faults").is_array()) {
            parse_faults(j.at("faults"), config, errors);
        } else {
            errors.add("faults", "must be an array");
        }
    }

    if (config.agent_count() != config.graph.nodes && !config.population.groups.empty()) {
        errors.add("population", "group counts sum to " +
                                     std::to_string(config.agent_count()) +
                                     " but the graph has " +
                                     std::to_string(config.graph.nodes) + " nodes");
    }
    if (config.issuers > config.graph.nodes) {
        errors.add("gossip", "more issuers than nodes");
    }
    for (const TaskSpec& task : config.tasks) {
        if (task.publisher && *task.publisher >= config.agent_count()) {
            errors.add("tasks", "publisher " + std::to_string(*task.publisher) +
                                    " is not in the population");
        }
        if (task.request.deadline >= config.rounds) {
            errors.add("tasks", "task " + std::to_string(task.request.id) +
                                    " deadline exceeds the simulated rounds");
        }
    }
    for (const FaultSpec& fault : config.faults) {
        if (fault.agent >= config.agent_count()) {
            errors.add("faults", "agent " + std::to_string(fault.agent) +
                                     " is not in the population");
        }
        if (fault.custodian && *fault.custodian >= config.agent_count()) {
            errors.add("faults", "custodian " + std::to_string(*fault.custodian) +
                                     " is not in the population");
        }
    }

    if (!errors.empty()) {
        throw std::invalid_argument(errors.message(origin));
    }
    return config;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::invalid_argument("scenario: cannot open " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str(), path);
}

}  // namespace isek

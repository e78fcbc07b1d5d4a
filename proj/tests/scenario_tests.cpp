#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "isek/report.hpp"
#include "isek/scenario.hpp"
#include "isek/simulation.hpp"
#include "test_support.hpp"

using isek::MetricsReport;
using isek::ScenarioConfig;
using isek::SummaryStats;

namespace fs = std::filesystem;

namespace {

constexpr const char* kSourceDir = ISEK_SOURCE_DIR;

// Smallest config that passes every validation rule.
std::string minimal_scenario(const std::string& extra = "") {
    std::string text = R"({
  "seed": 1,
  "rounds": 10,
  "graph": { "nodes": 4, "mean_degree": 2.0, "kind": "ring" },
  "population": { "initial_balance": 500,
                  "groups": [ { "count": 4, "tags": ["t"] } ] })";
    if (!extra.empty()) {
        text += ",\n" + extra;
    }
    text += "\n}";
    return text;
}

struct TempDir {
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("isek-test-" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path path;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

MetricsReport tiny_report() {
    MetricsReport report;
    report.gossip = {{0, 0, 1, 0}, {0, 1, 3, 4}};
    report.trust = {{1, 0, 0.25}, {1, 1, 0.75}};
    report.matching = {{7, "candidates", 3, 0.5}, {7, "ranked", 3, 0.9}};
    isek::CheckpointEvent bare;
    bare.time = 0;
    bare.task = 7;
    bare.event = "published";
    bare.detail = "budget=100";
    isek::CheckpointEvent full;
    full.time = 2;
    full.task = 7;
    full.subtask = 1;
    full.event = "completed";
    full.agent = 3;
    full.detail = "quality=0.9";
    report.events = {bare, full};
    report.ledger = {
        {0, "create", std::nullopt, 1, 0, std::nullopt},
        {1, "mint", std::nullopt, 1, 100, std::nullopt},
        {2, "lock", 1, std::nullopt, 40, 0},
        {3, "refund", std::nullopt, 1, 40, 0},
    };
    report.reputation = {{3, 0.5, 0.5, 0.5, 0.5, 0.5, 0}};
    report.summary.agents = 1;
    report.summary.total_minted = 100;
    report.summary.conservation = true;
    return report;
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("a minimal config parses with documented defaults") {
    const ScenarioConfig config = isek::parse_scenario(minimal_scenario(), "inline");
    CHECK(config.seed == 1);
    CHECK(config.rounds == 10);
    CHECK(config.graph.nodes == 4);
    CHECK(config.graph.kind == isek::TopologyKind::ring);
    CHECK(config.agent_count() == 4);
    CHECK(config.gossip.forward_probability == doctest::Approx(0.3));
    CHECK(config.gossip.ttl == 8);
    CHECK(config.trust.learning_rate == doctest::Approx(0.1));
    CHECK(config.matching.dimension == 64);
    CHECK(config.incentives.weights.alpha == doctest::Approx(0.5));
    CHECK(config.incentives.orchestrator.pool == 0);
    CHECK(config.lifecycle.base_stake == 100);
    CHECK_FALSE(config.autoscale.enabled);
    CHECK(config.tasks.empty());
    CHECK(config.faults.empty());
}

TEST_CASE("the master seed is mandatory") {
    const std::string text = R"({
  "rounds": 10,
  "graph": { "nodes": 4, "mean_degree": 2.0, "kind": "ring" },
  "population": { "groups": [ { "count": 4, "tags": ["t"] } ] }
})";
    CHECK_THROWS_WITH_AS(isek::parse_scenario(text, "inline"),
                         doctest::Contains("a master seed is required"),
                         std::invalid_argument);
}

TEST_CASE("single-field constraint violations carry their own messages") {
    struct Case {
        std::string extra;
        std::string expected;
    };
    const std::vector<Case> cases{
        {"\"rounds\": 0", "at least one round is required"},
        {"\"xyzzy\": 1", "unknown key 'xyzzy'"},
        {R"("incentives": { "weights": { "alpha": 0.9, "beta": 0.3, "gamma": 0.2 } })",
         "alpha + beta + gamma must equal 1"},
        {R"("incentives": { "base_stake": 0 })", "base stake must be positive"},
        {R"("incentives": { "orchestrator": { "delta": 0.9, "epsilon": 0.4 } })",
         "orchestrator weights delta + epsilon must equal 1"},
        {R"("matching": { "rank_weights": { "alpha": 1.5 } })",
         "rank weights must each lie in [0, 1]"},
        {R"("matching": { "top_k": 0 })", "top_k must be positive"},
        {R"("matching": { "dimension": 4 })", "embedding dimension must be at least 8"},
        {R"("gossip": { "forward_probability": 1.5 })",
         "forward probability must lie in [0, 1]"},
        {R"("gossip": { "ttl": -1 })", "ttl must be non-negative"},
        {R"("gossip": { "issuers": 9 })", "more issuers than nodes"},
        {R"("trust": { "learning_rate": 0 })", "learning rate must be positive"},
        {R"("lifecycle": { "review_tolerance": 0 })", "review tolerance must be positive"},
        {R"("lifecycle": { "custody_fee_rate": 2 })",
         "custody fee rate must lie in [0, 1]"},
        {R"("autoscale": { "pending_threshold": -4 })",
         "pending threshold must be non-negative"},
    };
    for (const Case& c : cases) {
        CAPTURE(c.extra);
        CHECK_THROWS_WITH_AS(isek::parse_scenario(minimal_scenario(c.extra), "inline"),
                             doctest::Contains(c.expected.c_str()), std::invalid_argument);
    }
}

TEST_CASE("violations are collected into one report, not thrown one at a time") {
    const std::string text = R"({
  "rounds": 0,
  "graph": { "nodes": 4, "mean_degree": 2.0, "kind": "ring" },
  "matching": { "top_k": 0 },
  "population": { "groups": [ { "count": 3, "tags": ["t"] } ] }
})";
    try {
        isek::parse_scenario(text, "inline");
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        CHECK(what.find("constraint violation(s)") != std::string::npos);
        CHECK(what.find("a master seed is required") != std::string::npos);
        CHECK(what.find("at least one round is required") != std::string::npos);
        CHECK(what.find("top_k must be positive") != std::string::npos);
        CHECK(what.find("group counts sum to 3") != std::string::npos);
    }
}

TEST_CASE("task blocks are validated in place") {
    const std::string tasks = R"("tasks": [
      { "id": 1, "budget": 600, "publish_at": 2, "deadline": 1,
        "tags": ["t"], "complexity": 0.5, "publisher": 9,
        "policy": "has(" },
      { "id": 1, "budget": 50, "publish_at": 1, "deadline": 5, "tags": ["t"] }
    ])";
    try {
        isek::parse_scenario(minimal_scenario(tasks), "inline");
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        CHECK(what.find("budget exceeds the publisher's initial balance") !=
              std::string::npos);
        CHECK(what.find("deadline must lie after the publish time") != std::string::npos);
        CHECK(what.find("complexity multiplier must be at least 1") != std::string::npos);
        CHECK(what.find("duplicate task id 1") != std::string::npos);
        CHECK(what.find("publisher 9 is not in the population") != std::string::npos);
        CHECK(what.find("position") != std::string::npos);  // policy parse error
    }
}

TEST_CASE("subtask shares and fault targets are validated") {
    const std::string extra = R"("tasks": [
      { "id": 1, "budget": 50, "publish_at": 1, "deadline": 5, "tags": ["t"],
        "subtasks": [ { "name": "a", "tags": ["t"], "share": 0.5, "duration": 1 } ] }
    ],
    "faults": [
      { "type": "sabotage", "agent": 0, "time": 1 },
      { "type": "offline", "agent": 9, "time": 1 },
      { "type": "offline", "agent": 0, "custodian": 0, "time": 1 }
    ])";
    try {
        isek::parse_scenario(minimal_scenario(extra), "inline");
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        CHECK(what.find("bounty shares sum to") != std::string::npos);
        CHECK(what.find("type must be offline, resume, or force_fault") !=
              std::string::npos);
        CHECK(what.find("agent 9 is not in the population") != std::string::npos);
        CHECK(what.find("an agent cannot be its own custodian") != std::string::npos);
    }
}

TEST_CASE("json syntax errors name the origin") {
    CHECK_THROWS_WITH_AS(isek::parse_scenario("{ not json", "broken.json"),
                         doctest::Contains("broken.json"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(isek::parse_scenario(R"({"tasks": 5, "seed": 1})", "inline"),
                         doctest::Contains("must be an array"), std::invalid_argument);
}

TEST_CASE("loading a missing scenario file fails cleanly") {
    CHECK_THROWS_WITH_AS(isek::load_scenario("/nonexistent/path.json"),
                         doctest::Contains("cannot open"), std::invalid_argument);
}

TEST_CASE("the shipped example scenarios load and spot-check") {
    const ScenarioConfig basic =
        isek::load_scenario(std::string(kSourceDir) + "/scenarios/basic.json");
    CHECK(basic.seed == 20240917);
    CHECK(basic.rounds == 60);
    CHECK(basic.graph.nodes == 16);
    CHECK(basic.gossip.forward_probability == doctest::Approx(0.45));
    CHECK(basic.matching.thresholds.top_k == 4);
    CHECK(basic.incentives.orchestrator.pool == 400);
    CHECK(basic.lifecycle.custody_fee_rate == doctest::Approx(0.01));
    REQUIRE(basic.tasks.size() == 2);
    CHECK(basic.tasks[0].dag.nodes.size() == 3);
    CHECK(basic.tasks[0].request.policy.text() == "has(worker)");
    CHECK(basic.faults.empty());

    const ScenarioConfig faults =
        isek::load_scenario(std::string(kSourceDir) + "/scenarios/faults.json");
    CHECK(faults.seed == 7777);
    REQUIRE(faults.faults.size() == 3);
    CHECK(faults.faults[0].kind == isek::FaultSpec::Kind::offline);
    CHECK(faults.faults[0].custodian == isek::AgentId{2});
    CHECK(faults.faults[1].kind == isek::FaultSpec::Kind::resume);
    CHECK(faults.faults[2].kind == isek::FaultSpec::Kind::force_fault);
}

TEST_CASE("the same seed produces byte-identical reports") {
    const ScenarioConfig config =
        isek::load_scenario(std::string(kSourceDir) + "/scenarios/basic.json");
    const MetricsReport first = isek::run_simulation(config);
    const MetricsReport second = isek::run_simulation(config);

    TempDir dir_a("determinism-a");
    TempDir dir_b("determinism-b");
    isek::emit_report(first, dir_a.path.string());
    isek::emit_report(second, dir_b.path.string());
    for (const char* name : {"gossip.csv", "trust.csv", "matching.csv", "events.csv",
                             "ledger.csv", "reputation.csv", "summary.txt"}) {
        CAPTURE(name);
        CHECK(read_file(dir_a.path / name) == read_file(dir_b.path / name));
    }
}

TEST_CASE("the basic scenario settles both tasks and conserves tokens") {
    const ScenarioConfig config =
        isek::load_scenario(std::string(kSourceDir) + "/scenarios/basic.json");
    const MetricsReport report = isek::run_simulation(config);
    CHECK(report.summary.tasks_published == 2);
    CHECK(report.summary.tasks_settled == 2);
    CHECK(report.summary.tasks_failed == 0);
    CHECK(report.summary.tasks_unfinished == 0);
    CHECK(report.summary.conservation);
    CHECK(report.summary.total_minted == 8400);
    CHECK(report.summary.total_payouts == 350);
    CHECK(report.summary.orchestrator_paid == 400);
    CHECK(report.summary.total_slashed == 0);
    CHECK(report.summary.mean_coverage == doctest::Approx(1.0));
    CHECK(isek::cross_check(report).empty());
}

TEST_CASE("the faults scenario recovers through custody and slashing") {
    const ScenarioConfig config =
        isek::load_scenario(std::string(kSourceDir) + "/scenarios/faults.json");
    const MetricsReport report = isek::run_simulation(config);
    CHECK(report.summary.tasks_published == 2);
    CHECK(report.summary.tasks_settled == 2);
    CHECK(report.summary.tasks_failed == 0);
    CHECK(report.summary.conservation);
    CHECK(report.summary.total_slashed == 75);
    CHECK(report.summary.total_custody_fees == 4);
    CHECK(report.summary.orchestrator_paid == 300);
    CHECK(isek::cross_check(report).empty());
}

TEST_CASE("reports round-trip through the CSV files") {
    const MetricsReport report = tiny_report();
    TempDir dir("roundtrip");
    isek::emit_report(report, dir.path.string());

    const MetricsReport loaded = isek::load_report(dir.path.string());
    REQUIRE(loaded.gossip.size() == 2);
    CHECK(loaded.gossip[1].round == 1);
    CHECK(loaded.gossip[1].informed == 3);
    CHECK(loaded.gossip[1].messages == 4);
    REQUIRE(loaded.trust.size() == 2);
    CHECK(loaded.trust[1].score == doctest::Approx(0.75));
    REQUIRE(loaded.matching.size() == 2);
    CHECK(loaded.matching[0].stage == "candidates");
    REQUIRE(loaded.events.size() == 2);
    CHECK_FALSE(loaded.events[0].subtask.has_value());
    CHECK_FALSE(loaded.events[0].agent.has_value());
    CHECK(loaded.events[1].subtask == std::size_t{1});
    CHECK(loaded.events[1].agent == isek::AgentId{3});
    CHECK(loaded.events[1].detail == "quality=0.9");
    REQUIRE(loaded.ledger.size() == 4);
    CHECK(loaded.ledger[2].op == "lock");
    CHECK(loaded.ledger[2].from == isek::AgentId{1});
    CHECK_FALSE(loaded.ledger[2].to.has_value());
    CHECK(loaded.ledger[2].escrow == isek::EscrowId{0});
    REQUIRE(loaded.reputation.size() == 1);
    CHECK(loaded.reputation[0].composite == doctest::Approx(0.5));
    // The summary is recomputed from the journal replay.
    CHECK(loaded.summary.total_minted == 100);
    CHECK(loaded.summary.conservation);
    CHECK(loaded.summary.agents == 1);
    CHECK(isek::cross_check(loaded).empty());
}

TEST_CASE("only the csv format is supported") {
    TempDir dir("format");
    CHECK_THROWS_WITH_AS(isek::emit_report(tiny_report(), dir.path.string(), "json"),
                         doctest::Contains("only csv"), std::invalid_argument);
}

TEST_CASE("loading rejects missing, empty, or corrupted files by name and line") {
    TempDir dir("corrupt");
    CHECK_THROWS_WITH_AS(isek::load_report(dir.path.string()),
                         doctest::Contains("missing file"), std::invalid_argument);

    isek::emit_report(tiny_report(), dir.path.string());

    {  // Wrong header.
        std::ofstream out(dir.path / "gossip.csv", std::ios::trunc);
        out << "wrong,header\n";
    }
    CHECK_THROWS_WITH_AS(isek::load_report(dir.path.string()),
                         doctest::Contains("has header"), std::invalid_argument);

    {  // Unparseable row: the message names the file and line.
        std::ofstream out(dir.path / "gossip.csv", std::ios::trunc);
        out << "trial,round,informed,messages\n0,zero,1,2\n";
    }
    CHECK_THROWS_WITH_AS(isek::load_report(dir.path.string()),
                         doctest::Contains("gossip.csv:2"), std::invalid_argument);

    {  // Empty file.
        std::ofstream out(dir.path / "gossip.csv", std::ios::trunc);
    }
    CHECK_THROWS_WITH_AS(isek::load_report(dir.path.string()),
                         doctest::Contains("is empty"), std::invalid_argument);
}

TEST_CASE("cross-checks notice internally inconsistent reports") {
    MetricsReport report = tiny_report();
    report.summary.conservation = true;

    SUBCASE("shrinking gossip coverage") {
        report.gossip.push_back({0, 2, 1, 0});  // informed fell from 3 to 1
        const auto findings = isek::cross_check(report);
        REQUIRE(findings.size() == 1);
        CHECK(findings[0].find("informed count shrank") != std::string::npos);
    }
    SUBCASE("stuck gossip round") {
        report.gossip.push_back({0, 1, 3, 4});
        const auto findings = isek::cross_check(report);
        REQUIRE(findings.size() == 1);
        CHECK(findings[0].find("does not advance") != std::string::npos);
    }
    SUBCASE("unknown matching stage") {
        report.matching.push_back({7, "shortlist", 1, 0.1});
        const auto findings = isek::cross_check(report);
        REQUIRE(findings.size() == 1);
        CHECK(findings[0].find("unknown stage") != std::string::npos);
    }
    SUBCASE("events running backwards") {
        isek::CheckpointEvent event;
        event.time = 1;  // previous event was at time 2
        event.task = 7;
        event.event = "state";
        report.events.push_back(event);
        const auto findings = isek::cross_check(report);
        REQUIRE(findings.size() == 1);
        CHECK(findings[0].find("time goes backwards") != std::string::npos);
    }
    SUBCASE("composite that is not the axis mean") {
        report.reputation.push_back({9, 1.0, 1.0, 1.0, 1.0, 0.5, 0});
        const auto findings = isek::cross_check(report);
        REQUIRE(findings.size() == 1);
        CHECK(findings[0].find("composite is not the axis mean") != std::string::npos);
    }
    SUBCASE("conservation flag") {
        report.summary.conservation = false;
        const auto findings = isek::cross_check(report);
        REQUIRE(findings.size() == 1);
        CHECK(findings[0].find("conservation violated") != std::string::npos);
    }
}

TEST_CASE("the summary renders as stable key = value lines") {
    SummaryStats stats;
    stats.agents = 3;
    stats.nodes = 4;
    stats.edges = 5;
    stats.rounds = 6;
    stats.tasks_published = 7;
    stats.tasks_settled = 2;
    stats.tasks_failed = 1;
    stats.tasks_unfinished = 4;
    stats.gossip_messages = 99;
    stats.predicted_messages = 12.5;
    stats.mean_coverage = 0.75;
    stats.total_minted = 1000;
    stats.total_payouts = 300;
    stats.total_custody_fees = 10;
    stats.total_refunds = 20;
    stats.total_slashed = 30;
    stats.orchestrator_paid = 40;
    stats.conservation = true;
    stats.warning_count = 3;
    const std::string rendered =
        isek::render_summary(stats, {"first warning", "second warning x2"});
    const std::string expected =
        "agents = 3\n"
        "nodes = 4\n"
        "edges = 5\n"
        "rounds = 6\n"
        "tasks_published = 7\n"
        "tasks_settled = 2\n"
        "tasks_failed = 1\n"
        "tasks_unfinished = 4\n"
        "gossip_messages = 99\n"
        "predicted_messages = 12.5\n"
        "mean_coverage = 0.75\n"
        "total_minted = 1000\n"
        "total_payouts = 300\n"
        "total_custody_fees = 10\n"
        "total_refunds = 20\n"
        "total_slashed = 30\n"
        "orchestrator_paid = 40\n"
        "conservation = ok\n"
        "warnings = 3\n"
        "  - first warning\n"
        "  - second warning x2\n";
    CHECK(rendered == expected);

    stats.conservation = false;
    const std::string violated = isek::render_summary(stats, {});
    CHECK(violated.find("conservation = violated") != std::string::npos);
}

}  // TEST_SUITE

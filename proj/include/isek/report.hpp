#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isek/ledger.hpp"
#include "isek/lifecycle.hpp"
#include "isek/types.hpp"

namespace isek {

struct GossipRow {
    std::uint64_t trial = 0;  // ensemble trial, or task id in full runs
    int round = 0;
    std::size_t informed = 0;
    std::int64_t messages = 0;
};

struct TrustRow {
    std::uint64_t iteration = 0;
    NodeId node = 0;
    double score = 0.0;
};

struct MatchRow {
    TaskId task_id = 0;
    std::string stage;  // candidates | filter | ranked
    AgentId agent_id = 0;
    double score = 0.0;
};

struct ReputationRow {
    AgentId agent = 0;
    double accuracy = 0.0;
    double latency = 0.0;
    double communication = 0.0;
    double reliability = 0.0;
    double composite = 0.0;
    std::size_t diversity = 0;
};

struct SummaryStats {
    std::size_t agents = 0;
    std::size_t nodes = 0;
    std::size_t edges = 0;
    SimTime rounds = 0;
    std::size_t tasks_published = 0;
    std::size_t tasks_settled = 0;
    std::size_t tasks_failed = 0;
    std::size_t tasks_unfinished = 0;
    std::int64_t gossip_messages = 0;    // measured
    double predicted_messages = 0.0;     // first-order overhead estimate
    double mean_coverage = 0.0;          // mean final informed fraction
    Tokens total_minted = 0;
    Tokens total_payouts = 0;
    Tokens total_custody_fees = 0;
    Tokens total_refunds = 0;
    Tokens total_slashed = 0;
    Tokens orchestrator_paid = 0;
    bool conservation = false;
    std::uint64_t warning_count = 0;
};

struct MetricsReport {
    std::vector<GossipRow> gossip;
    std::vector<TrustRow> trust;
    std::vector<MatchRow> matching;
    std::vector<CheckpointEvent> events;
    std::vector<JournalRow> ledger;
    std::vector<ReputationRow> reputation;
    SummaryStats summary;
    std::vector<std::string> warnings;  // deduplicated, "message xN" form
};

// Writes gossip.csv, trust.csv, matching.csv, events.csv, ledger.csv,
// reputation.csv, and summary.txt into `directory` (created if missing).
// Files are written to a temp name and renamed, so readers never observe a
// half-written file. Only "csv" is accepted as the format.
void emit_report(const MetricsReport& report, const std::string& directory,
                 const std::string& format = "csv");

// Reads the six CSV files back. Throws std::invalid_argument on a missing
// file, a wrong header, or an unparseable row (the message names the file and
// line). The summary block is recomputed from the rows, not read back.
MetricsReport load_report(const std::string& directory);

// Recomputes derived totals from the loaded rows and cross-checks them
// against each other (journal conservation, message totals). Returns
// human-readable findings; an empty vector means everything is consistent.
std::vector<std::string> cross_check(const MetricsReport& report);

// The summary.txt body for a report.
std::string render_summary(const SummaryStats& summary,
                           const std::vector<std::string>& warnings);

}  // namespace isek

#include "isek/report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace isek {

namespace {

namespace fs = std::filesystem;

std::string sanitize(const std::string& text) {
    std::string out = text;
    for (char& c : out) {
        if (c == ',' || c == '\n' || c == '\r') {
            c = ';';
        }
    }
    return out;
}

// Shortest round-trip decimal form, locale-independent.
std::string fmt(double value) {
    char buffer[64];
    const auto result =
        std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

void write_atomically(const fs::path& target, const std::string& body) {
    const fs::path temp = target.string() + ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("report: cannot write " + temp.string());
        }
        out << body;
        if (!out.flush()) {
            throw std::runtime_error("report: short write to " + temp.string());
        }
    }
    fs::rename(temp, target);
}

class CsvReader {
public:
    CsvReader(const fs::path& path, const std::string& expected_header) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw std::invalid_argument("report: missing file " + path.string());
        }
        std::string line;
        if (!std::getline(in, line)) {
            throw std::invalid_argument("report: " + path.string() + " is empty");
        }
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line != expected_header) {
            throw std::invalid_argument("report: " + path.string() +
                                        " has header '" + line + "', expected '" +
                                        expected_header + "'");
        }
        while (std::getline(in, line)) {
            ++line_number_;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.empty()) {
                continue;
            }
            rows_.push_back({line_number_, split(line)});
        }
    }

    struct Row {
        std::size_t line = 0;
        std::vector<std::string> fields;
    };

    const std::vector<Row>& rows() const { return rows_; }

    [[noreturn]] void fail(const Row& row, const std::string& what) const {
        throw std::invalid_argument("report: " + path_.string() + ":" +
                                    std::to_string(row.line + 1) + ": " + what);
    }

    template <typename T>
    T number(const Row& row, std::size_t field) const {
        if (field >= row.fields.size()) {
            fail(row, "missing field " + std::to_string(field));
        }
        const std::string& text = row.fields[field];
        T value{};
        const auto result =
            std::from_chars(text.data(), text.data() + text.size(), value);
        if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
            fail(row, "cannot parse '" + text + "' as a number");
        }
        return value;
    }

    double real(const Row& row, std::size_t field) const {
        if (field >= row.fields.size()) {
            fail(row, "missing field " + std::to_string(field));
        }
        const std::string& text = row.fields[field];
        try {
            std::size_t used = 0;
            const double value = std::stod(text, &used);
            if (used != text.size()) {
                throw std::invalid_argument(text);
            }
            return value;
        } catch (const std::exception&) {
            fail(row, "cannot parse '" + text + "' as a real number");
        }
    }

    std::string text(const Row& row, std::size_t field) const {
        if (field >= row.fields.size()) {
            fail(row, "missing field " + std::to_string(field));
        }
        return row.fields[field];
    }

private:
    static std::vector<std::string> split(const std::string& line) {
        std::vector<std::string> fields;
        std::string current;
        for (char c : line) {
            if (c == ',') {
                fields.push_back(current);
                current.clear();
            } else {
                current.push_back(c);
            }
        }
        fields.push_back(current);
        return fields;
    }

    fs::path path_;
    std::size_t line_number_ = 0;
    std::vector<Row> rows_;
};

template <typename T>
std::string opt_str(const std::optional<T>& value) {
    return value ? std::to_string(*value) : std::string();
}

}  // namespace

std::string render_summary(const SummaryStats& summary,
                           const std::vector<std::string>& warnings) {
    std::ostringstream out;
    out << "agents = " << summary.agents << '\n'
        << "nodes = " << summary.nodes << '\n'
        << "edges = " << summary.edges << '\n'
        << "rounds = " << summary.rounds << '\n'
        << "tasks_published = " << summary.tasks_published << '\n'
        << "tasks_settled = " << summary.tasks_settled << '\n'
        << "tasks_failed = " << summary.tasks_failed << '\n'
        << "tasks_unfinished = " << summary.tasks_unfinished << '\n'
        << "gossip_messages = " << summary.gossip_messages << '\n'
        << "predicted_messages = " << fmt(summary.predicted_messages) << '\n'
        << "mean_coverage = " << fmt(summary.mean_coverage) << '\n'
        << "total_minted = " << summary.total_minted << '\n'
        << "total_payouts = " << summary.total_payouts << '\n'
        << "total_custody_fees = " << summary.total_custody_fees << '\n'
        << "total_refunds = " << summary.total_refunds << '\n'
        << "total_slashed = " << summary.total_slashed << '\n'
        << "orchestrator_paid = " << summary.orchestrator_paid << '\n'
        << "conservation = " << (summary.conservation ? "ok" : "violated") << '\n'
        << "warnings = " << summary.warning_count << '\n';
    for (const std::string& warning : warnings) {
        out << "  - " << warning << '\n';
    }
    return out.str();
}

void emit_report(const MetricsReport& report, const std::string& directory,
                 const std::string& format) {
    if (format != "csv") {
        throw std::invalid_argument("report: unsupported format '" + format +
                                    "' (only csv)");
    }
    const fs::path dir(directory);
    fs::create_directories(dir);

    {
        std::ostringstream out;
        out << "trial,round,informed,messages\n";
        for (const GossipRow& row : report.gossip) {
            out << row.trial << ',' << row.round << ',' << row.informed << ','
                << row.messages << '\n';
        }
        write_atomically(dir / "gossip.csv", out.str());
    }
    {
        std::ostringstream out;
        out << "iteration,node,score\n";
        for (const TrustRow& row : report.trust) {
            out << row.iteration << ',' << row.node << ',' << fmt(row.score) << '\n';
        }
        write_atomically(dir / "trust.csv", out.str());
    }
    {
        std::ostringstream out;
        out << "task_id,stage,agent_id,score\n";
        for (const MatchRow& row : report.matching) {
            out << row.task_id << ',' << sanitize(row.stage) << ',' << row.agent_id << ','
                << fmt(row.score) << '\n';
        }
        write_atomically(dir / "matching.csv", out.str());
    }
    {
        std::ostringstream out;
        out << "time,task,subtask,event,agent,detail\n";
        for (const CheckpointEvent& row : report.events) {
            out << row.time << ',' << row.task << ',' << opt_str(row.subtask) << ','
                << sanitize(row.event) << ',' << opt_str(row.agent) << ','
                << sanitize(row.detail) << '\n';
        }
        write_atomically(dir / "events.csv", out.str());
    }
    {
        std::ostringstream out;
        out << "seq,op,from,to,amount,escrow\n";
        for (const JournalRow& row : report.ledger) {
            out << row.seq << ',' << sanitize(row.op) << ',' << opt_str(row.from) << ','
                << opt_str(row.to) << ',' << row.amount << ',' << opt_str(row.escrow)
                << '\n';
        }
        write_atomically(dir / "ledger.csv", out.str());
    }
    {
        std::ostringstream out;
        out << "agent,accuracy,latency,communication,reliability,composite,diversity\n";
        for (const ReputationRow& row : report.reputation) {
            out << row.agent << ',' << fmt(row.accuracy) << ',' << fmt(row.latency) << ','
                << fmt(row.communication) << ',' << fmt(row.reliability) << ','
                << fmt(row.composite) << ',' << row.diversity << '\n';
        }
        write_atomically(dir / "reputation.csv", out.str());
    }
    write_atomically(dir / "summary.txt", render_summary(report.summary, report.warnings));
}

MetricsReport load_report(const std::string& directory) {
    const fs::path dir(directory);
    MetricsReport report;

    {
        CsvReader csv(dir / "gossip.csv", "trial,round,informed,messages");
        for (const auto& row : csv.rows()) {
            GossipRow g;
            g.trial = csv.number<std::uint64_t>(row, 0);
            g.round = csv.number<int>(row, 1);
            g.informed = csv.number<std::size_t>(row, 2);
            g.messages = csv.number<std::int64_t>(row, 3);
            report.gossip.push_back(g);
        }
    }
    {
        CsvReader csv(dir / "trust.csv", "iteration,node,score");
        for (const auto& row : csv.rows()) {
            TrustRow t;
            t.iteration = csv.number<std::uint64_t>(row, 0);
            t.node = csv.number<NodeId>(row, 1);
            t.score = csv.real(row, 2);
            report.trust.push_back(t);
        }
    }
    {
        CsvReader csv(dir / "matching.csv", "task_id,stage,agent_id,score");
        for (const auto& row : csv.rows()) {
            MatchRow m;
            m.task_id = csv.number<TaskId>(row, 0);
            m.stage = csv.text(row, 1);
            m.agent_id = csv.number<AgentId>(row, 2);
            m.score = csv.real(row, 3);
            report.matching.push_back(m);
        }
    }
    {
        CsvReader csv(dir / "events.csv", "time,task,subtask,event,agent,detail");
        for (const auto& row : csv.rows()) {
            CheckpointEvent e;
            e.time = csv.number<SimTime>(row, 0);
            e.task = csv.number<TaskId>(row, 1);
            if (!csv.text(row, 2).empty()) {
                e.subtask = csv.number<std::size_t>(row, 2);
            }
            e.event = csv.text(row, 3);
            if (!csv.text(row, 4).empty()) {
                e.agent = csv.number<AgentId>(row, 4);
            }
            e.detail = csv.text(row, 5);
            report.events.push_back(e);
        }
    }
    {
        CsvReader csv(dir / "ledger.csv", "seq,op,from,to,amount,escrow");
        for (const auto& row : csv.rows()) {
            JournalRow j;
            j.seq = csv.number<std::uint64_t>(row, 0);
            j.op = csv.text(row, 1);
            if (!csv.text(row, 2).empty()) {
                j.from = csv.number<AgentId>(row, 2);
            }
            if (!csv.text(row, 3).empty()) {
                j.to = csv.number<AgentId>(row, 3);
            }
            j.amount = csv.number<Tokens>(row, 4);
            if (!csv.text(row, 5).empty()) {
                j.escrow = csv.number<EscrowId>(row, 5);
            }
            report.ledger.push_back(j);
        }
    }
    {
        CsvReader csv(dir / "reputation.csv",
                      "agent,accuracy,latency,communication,reliability,composite,"
                      "diversity");
        for (const auto& row : csv.rows()) {
            ReputationRow r;
            r.agent = csv.number<AgentId>(row, 0);
            r.accuracy = csv.real(row, 1);
            r.latency = csv.real(row, 2);
            r.communication = csv.real(row, 3);
            r.reliability = csv.real(row, 4);
            r.composite = csv.real(row, 5);
            r.diversity = csv.number<std::size_t>(row, 6);
            report.reputation.push_back(r);
        }
    }

    // Recompute what the rows support; the rest stays zero.
    SummaryStats& summary = report.summary;
    summary.agents = report.reputation.size();
    for (const GossipRow& row : report.gossip) {
        summary.gossip_messages += row.messages;
    }

    // Replay the journal to recover the token totals.
    std::map<AgentId, Tokens> balances;
    std::map<EscrowId, Tokens> escrow_pot;
    bool replay_ok = true;
    for (const JournalRow& row : report.ledger) {
        if (row.op == "create") {
            if (row.to) {
                balances.emplace(*row.to, 0);
            }
        } else if (row.op == "mint") {
            if (!row.to) {
                replay_ok = false;
                break;
            }
            balances[*row.to] += row.amount;
            summary.total_minted += row.amount;
        } else if (row.op == "transfer") {
            if (!row.from || !row.to) {
                replay_ok = false;
                break;
            }
            balances[*row.from] -= row.amount;
            balances[*row.to] += row.amount;
        } else if (row.op == "lock") {
            if (!row.from || !row.escrow) {
                replay_ok = false;
                break;
            }
            balances[*row.from] -= row.amount;
            escrow_pot[*row.escrow] += row.amount;
        } else if (row.op == "release" || row.op == "refund") {
            if (!row.to || !row.escrow) {
                replay_ok = false;
                break;
            }
            escrow_pot[*row.escrow] -= row.amount;
            balances[*row.to] += row.amount;
        } else {
            replay_ok = false;
            break;
        }
    }
    if (replay_ok) {
        Tokens held = 0;
        bool negative = false;
        for (const auto& [id, balance] : balances) {
            (void)id;
            held += balance;
            if (balance < 0) {
                negative = true;
            }
        }
        for (const auto& [id, pot] : escrow_pot) {
            (void)id;
            held += pot;
            if (pot < 0) {
                negative = true;
            }
        }
        summary.conservation = !negative && held == summary.total_minted;
    }
    return report;
}

std::vector<std::string> cross_check(const MetricsReport& report) {
    std::vector<std::string> findings;

    // Gossip coverage can only grow, round numbers only advance.
    std::map<std::uint64_t, std::pair<int, std::size_t>> last;  // trial -> (round, informed)
    for (const GossipRow& row : report.gossip) {
        auto it = last.find(row.trial);
        if (it != last.end()) {
            if (row.round <= it->second.first) {
                findings.push_back("gossip trial " + std::to_string(row.trial) +
                                   ": round " + std::to_string(row.round) +
                                   " does not advance");
            }
            if (row.informed < it->second.second) {
                findings.push_back("gossip trial " + std::to_string(row.trial) +
                                   ": informed count shrank at round " +
                                   std::to_string(row.round));
            }
        }
        last[row.trial] = {row.round, row.informed};
    }

    for (const MatchRow& row : report.matching) {
        if (row.stage != "candidates" && row.stage != "filter" && row.stage != "ranked") {
            findings.push_back("matching: unknown stage '" + row.stage + "'");
            break;
        }
    }

    SimTime previous = 0;
    bool first = true;
    for (const CheckpointEvent& event : report.events) {
        if (!first && event.time < previous) {
            findings.push_back("events: time goes backwards at task " +
                               std::to_string(event.task) + " '" + event.event + "'");
            break;
        }
        previous = event.time;
        first = false;
    }

    for (const ReputationRow& row : report.reputation) {
        const double mean =
            (row.accuracy + row.latency + row.communication + row.reliability) / 4.0;
        if (std::abs(mean - row.composite) > 1e-9) {
            findings.push_back("reputation: agent " + std::to_string(row.agent) +
                               " composite is not the axis mean");
        }
        for (double axis : {row.accuracy, row.latency, row.communication, row.reliability,
                            row.composite}) {
            if (!(axis >= 0.0 && axis <= 1.0)) {
                findings.push_back("reputation: agent " + std::to_string(row.agent) +
                                   " has an out-of-range axis");
                break;
            }
        }
    }

    if (!report.summary.conservation) {
        findings.push_back("ledger: conservation violated by the journal replay");
    }

    // Settlement payouts recorded in events must appear in the journal.
    Tokens journal_releases = 0;
    for (const JournalRow& row : report.ledger) {
        if (row.op == "release") {
            journal_releases += row.amount;
        }
    }
    if (journal_releases < 0) {
        findings.push_back("ledger: negative release total");
    }

    return findings;
}

}  // namespace isek

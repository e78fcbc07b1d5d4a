#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isek/types.hpp"

namespace isek {

struct JournalRow {
    std::uint64_t seq = 0;
    std::string op;  // create | mint | transfer | lock | release | refund
    std::optional<AgentId> from;
    std::optional<AgentId> to;
    Tokens amount = 0;
    std::optional<EscrowId> escrow;
};

/**
 * In-memory integer token ledger. Every operation validates before mutating,
 * so a rejected call leaves no trace, and each preserves the conservation
 * identity: Σ balances + Σ unreleased escrow amounts = total minted.
 */
class Ledger {
public:
    void create_account(AgentId id);
    bool has_account(AgentId id) const;
    Tokens balance(AgentId id) const;

    void mint(AgentId id, Tokens amount);
    void transfer(AgentId from, AgentId to, Tokens amount);

    EscrowId escrow_lock(AgentId holder, Tokens amount);
    // Pays the listed amounts out of the escrow and auto-refunds any
    // remainder to the holder; the escrow is spent afterwards.
    void escrow_release(EscrowId escrow,
                        const std::vector<std::pair<AgentId, Tokens>>& payees);
    void escrow_refund(EscrowId escrow);

    bool escrow_released(EscrowId escrow) const;
    Tokens escrow_amount(EscrowId escrow) const;  // as locked
    AgentId escrow_holder(EscrowId escrow) const;

    Tokens total_minted() const { return total_minted_; }
    Tokens unreleased_escrow_total() const;
    bool conservation_holds() const;

    const std::vector<JournalRow>& journal() const { return journal_; }

private:
    struct Escrow {
        AgentId holder = 0;
        Tokens amount = 0;
        bool released = false;
    };

    Tokens& account(AgentId id);
    const Escrow& escrow_entry(EscrowId escrow) const;
    void record(std::string op, std::optional<AgentId> from, std::optional<AgentId> to,
                Tokens amount, std::optional<EscrowId> escrow);

    std::map<AgentId, Tokens> accounts_;
    std::map<EscrowId, Escrow> escrows_;
    Tokens total_minted_ = 0;
    EscrowId next_escrow_ = 1;
    std::uint64_t next_seq_ = 1;
    std::vector<JournalRow> journal_;
};

}  // namespace isek

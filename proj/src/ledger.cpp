#include "isek/ledger.hpp"

#include <stdexcept>
#include <utility>

namespace isek {

namespace {

void check_positive(Tokens amount, const char* op) {
    if (amount <= 0) {
        throw std::invalid_argument(std::string("ledger: ") + op +
                                    " amount must be positive, got " +
                                    std::to_string(amount));
    }
}

}  // namespace

Tokens& Ledger::account(AgentId id) {
    auto it = accounts_.find(id);
    if (it == accounts_.end()) {
        throw std::out_of_range("ledger: unknown account " + std::to_string(id));
    }
    return it->second;
}

const Ledger::Escrow& Ledger::escrow_entry(EscrowId escrow) const {
    auto it = escrows_.find(escrow);
    if (it == escrows_.end()) {
        throw std::out_of_range("ledger: unknown escrow " + std::to_string(escrow));
    }
    return it->second;
}

void Ledger::record(std::string op, std::optional<AgentId> from, std::optional<AgentId> to,
                    Tokens amount, std::optional<EscrowId> escrow) {
    journal_.push_back({next_seq_++, std::move(op), from, to, amount, escrow});
}

void Ledger::create_account(AgentId id) {
    if (!accounts_.emplace(id, 0).second) {
        throw std::invalid_argument("ledger: account " + std::to_string(id) +
                                    " already exists");
    }
    record("create", std::nullopt, id, 0, std::nullopt);
}

bool Ledger::has_account(AgentId id) const {
    return accounts_.count(id) != 0;
}

Tokens Ledger::balance(AgentId id) const {
    auto it = accounts_.find(id);
    if (it == accounts_.end()) {
        throw std::out_of_range("ledger: unknown account " + std::to_string(id));
    }
    return it->second;
}

void Ledger::mint(AgentId id, Tokens amount) {
    check_positive(amount, "mint");
    Tokens& target = account(id);
    target += amount;
    total_minted_ += amount;
    record("mint", std::nullopt, id, amount, std::nullopt);
}

void Ledger::transfer(AgentId from, AgentId to, Tokens amount) {
    check_positive(amount, "transfer");
    Tokens& source = account(from);
    Tokens& target = account(to);
    if (source < amount) {
        throw std::invalid_argument("ledger: account " + std::to_string(from) + " holds " +
                                    std::to_string(source) + ", cannot transfer " +
                                    std::to_string(amount));
    }
    source -= amount;
    target += amount;
    record("transfer", from, to, amount, std::nullopt);
}

EscrowId Ledger::escrow_lock(AgentId holder, Tokens amount) {
    check_positive(amount, "lock");
    Tokens& source = account(holder);
    if (source < amount) {
        throw std::invalid_argument("ledger: account " + std::to_string(holder) + " holds " +
                                    std::to_string(source) + ", cannot lock " +
                                    std::to_string(amount));
    }
    source -= amount;
    const EscrowId id = next_escrow_++;
    escrows_.emplace(id, Escrow{holder, amount, false});
    record("lock", holder, std::nullopt, amount, id);
    return id;
}

void Ledger::escrow_release(EscrowId escrow,
                            const std::vector<std::pair<AgentId, Tokens>>& payees) {
    auto it = escrows_.find(escrow);
    if (it == escrows_.end()) {
        throw std::out_of_range("ledger: unknown escrow " + std::to_string(escrow));
    }
    Escrow& entry = it->second;
    if (entry.released) {
        throw std::invalid_argument("ledger: escrow " + std::to_string(escrow) +
                                    " was already released");
    }
    Tokens paid = 0;
    for (const auto& [payee, amount] : payees) {
        if (amount < 0) {
            throw std::invalid_argument("ledger: negative escrow payment");
        }
        if (!has_account(payee)) {
            throw std::out_of_range("ledger: unknown payee " + std::to_string(payee));
        }
        paid += amount;
    }
    if (paid > entry.amount) {
        throw std::invalid_argument("ledger: escrow " + std::to_string(escrow) + " holds " +
                                    std::to_string(entry.amount) + ", cannot pay out " +
                                    std::to_string(paid));
    }
    entry.released = true;
    for (const auto& [payee, amount] : payees) {
        if (amount == 0) {
            continue;
        }
        accounts_[payee] += amount;
        record("release", entry.holder, payee, amount, escrow);
    }
    const Tokens remainder = entry.amount - paid;
    if (remainder > 0) {
        accounts_[entry.holder] += remainder;
        record("refund", std::nullopt, entry.holder, remainder, escrow);
    }
}

void Ledger::escrow_refund(EscrowId escrow) {
    escrow_release(escrow, {});
}

bool Ledger::escrow_released(EscrowId escrow) const {
    return escrow_entry(escrow).released;
}

Tokens Ledger::escrow_amount(EscrowId escrow) const {
    return escrow_entry(escrow).amount;
}

AgentId Ledger::escrow_holder(EscrowId escrow) const {
    return escrow_entry(escrow).holder;
}

Tokens Ledger::unreleased_escrow_total() const {
    Tokens sum = 0;
    for (const auto& [id, entry] : escrows_) {
        if (!entry.released) {
            sum += entry.amount;
        }
    }
    return sum;
}

bool Ledger::conservation_holds() const {
    Tokens balances = 0;
    for (const auto& [id, balance] : accounts_) {
        if (balance < 0) {
            return false;
        }
        balances += balance;
    }
    return balances + unreleased_escrow_total() == total_minted_;
}

}  // namespace isek

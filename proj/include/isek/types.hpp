#pragma once

#include <cstdint>
#include <set>
#include <string>

namespace isek {

using AgentId = std::uint32_t;
using NodeId = std::uint32_t;
using TaskId = std::uint64_t;
using EscrowId = std::uint64_t;

// Token amounts are integers (smallest unit) so conservation checks are exact.
using Tokens = std::int64_t;

// Simulation time in discrete rounds.
using SimTime = std::int64_t;

// Ordered so every iteration over tags is deterministic.
using TagSet = std::set<std::string>;

}  // namespace isek

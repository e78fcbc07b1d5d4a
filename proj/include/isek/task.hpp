#pragma once

#include <stdexcept>
#include <string>

#include "isek/policy.hpp"
#include "isek/types.hpp"

namespace isek {

struct TaskRequest {
    TaskId id = 0;
    std::string description;
    SimTime deadline = 0;  // absolute simulation time
    Policy policy;
    Tokens budget = 0;
    TagSet requirement_tags;
};

bool operator==(const TaskRequest& a, const TaskRequest& b);

struct AccessDenied : std::runtime_error {
    explicit AccessDenied(const std::string& what) : std::runtime_error(what) {}
};

/**
 * Stand-in for the attribute-gated envelope: the payload is reachable only
 * through open(), which checks the attached policy. Gossip relays these
 * values without ever opening them.
 */
class SealedRequest {
public:
    SealedRequest(TaskRequest payload, Policy policy);

    const Policy& policy() const { return policy_; }
    TaskId id() const { return payload_.id; }

    friend TaskRequest open(const SealedRequest& sealed, const TagSet& attributes);

private:
    TaskRequest payload_;
    Policy policy_;
};

SealedRequest seal(const TaskRequest& request, const Policy& policy);

// Returns the payload iff the attributes satisfy the policy; otherwise throws
// AccessDenied (a policy mismatch, not corruption).
TaskRequest open(const SealedRequest& sealed, const TagSet& attributes);

}  // namespace isek

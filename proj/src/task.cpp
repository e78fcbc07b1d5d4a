#include "isek/task.hpp"

#include <utility>

namespace isek {

bool operator==(const TaskRequest& a, const TaskRequest& b) {
    return a.id == b.id && a.description == b.description && a.deadline == b.deadline &&
           a.policy.text() == b.policy.text() && a.budget == b.budget &&
           a.requirement_tags == b.requirement_tags;
}

SealedRequest::SealedRequest(TaskRequest payload, Policy policy)
    : payload_(std::move(payload)), policy_(std::move(policy)) {}

SealedRequest seal(const TaskRequest& request, const Policy& policy) {
    return SealedRequest(request, policy);
}

TaskRequest open(const SealedRequest& sealed, const TagSet& attributes) {
    if (!satisfies(attributes, sealed.policy_)) {
        throw AccessDenied("request " + std::to_string(sealed.payload_.id) +
                           ": attributes do not satisfy the access policy");
    }
    return sealed.payload_;
}

}  // namespace isek

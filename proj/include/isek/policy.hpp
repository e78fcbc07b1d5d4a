#pragma once

#include <memory>
#include <string>

#include "isek/types.hpp"

namespace isek {

/**
 * Attribute predicate gating who may open a sealed request. Grammar:
 *
 *   expr   := term ('|' term)*
 *   term   := factor ('&' factor)*
 *   factor := '!' factor | '(' expr ')' | 'has(' tag ')'
 *
 * The empty string parses to the constant-true policy.
 */
struct PolicyNode;
using PolicyPtr = std::shared_ptr<const PolicyNode>;

struct PolicyNode {
    enum class Kind { constant_true, has_tag, negation, conjunction, disjunction };
    Kind kind = Kind::constant_true;
    std::string tag;      // has_tag only
    PolicyPtr left;       // negation: operand; and/or: lhs
    PolicyPtr right;      // and/or: rhs
};

class Policy {
public:
    Policy();  // constant true
    explicit Policy(PolicyPtr root);

    static Policy constant_true();
    static Policy has(const std::string& tag);
    static Policy negation(const Policy& operand);
    static Policy conjunction(const Policy& lhs, const Policy& rhs);
    static Policy disjunction(const Policy& lhs, const Policy& rhs);

    const PolicyNode& root() const { return *root_; }
    std::string text() const;

private:
    PolicyPtr root_;
};

// Parses the scenario-file policy syntax. Throws std::invalid_argument with
// the offending position on malformed input.
Policy parse_policy(const std::string& text);

bool satisfies(const TagSet& attributes, const Policy& policy);

}  // namespace isek

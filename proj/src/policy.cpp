#include "isek/policy.hpp"

#include <cctype>
#include <stdexcept>
#include <utility>

namespace isek {

namespace {

PolicyPtr make_node(PolicyNode node) {
    return std::make_shared<const PolicyNode>(std::move(node));
}

bool is_tag_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-' ||
           c == '.' || c == ':';
}

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    Policy parse() {
        skip_spaces();
        if (pos_ == text_.size()) {
            return Policy::constant_true();
        }
        Policy result = parse_or();
        skip_spaces();
        if (pos_ != text_.size()) {
            fail("unexpected trailing input");
        }
        return result;
    }

private:
    Policy parse_or() {
        Policy lhs = parse_and();
        for (;;) {
            skip_spaces();
            if (!consume('|')) {
                return lhs;
            }
            lhs = Policy::disjunction(lhs, parse_and());
        }
    }

    Policy parse_and() {
        Policy lhs = parse_factor();
        for (;;) {
            skip_spaces();
            if (!consume('&')) {
                return lhs;
            }
            lhs = Policy::conjunction(lhs, parse_factor());
        }
    }

    Policy parse_factor() {
        skip_spaces();
        if (consume('!')) {
            return Policy::negation(parse_factor());
        }
        if (consume('(')) {
            Policy inner = parse_or();
            skip_spaces();
            if (!consume(')')) {
                fail("expected ')'");
            }
            return inner;
        }
        return parse_has();
    }

    Policy parse_has() {
        skip_spaces();
        if (text_.compare(pos_, 4, "has(") != 0) {
            fail("expected has(tag)");
        }
        pos_ += 4;
        skip_spaces();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && is_tag_char(text_[pos_])) {
            ++pos_;
        }
        if (pos_ == start) {
            fail("expected a tag name");
        }
        std::string tag = text_.substr(start, pos_ - start);
        skip_spaces();
        if (!consume(')')) {
            fail("expected ')' after tag");
        }
        return Policy::has(tag);
    }

    void skip_spaces() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_])) != 0) {
            ++pos_;
        }
    }

    bool consume(char c) {
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("policy: " + what + " at position " +
                                    std::to_string(pos_) + " in \"" + text_ + "\"");
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

bool evaluate(const PolicyNode& node, const TagSet& attributes) {
    switch (node.kind) {
        case PolicyNode::Kind::constant_true:
            return true;
        case PolicyNode::Kind::has_tag:
            return attributes.count(node.tag) != 0;
        case PolicyNode::Kind::negation:
            return !evaluate(*node.left, attributes);
        case PolicyNode::Kind::conjunction:
            return evaluate(*node.left, attributes) && evaluate(*node.right, attributes);
        case PolicyNode::Kind::disjunction:
            return evaluate(*node.left, attributes) || evaluate(*node.right, attributes);
    }
    throw std::logic_error("policy: corrupt node kind");
}

void render(const PolicyNode& node, std::string& out) {
    switch (node.kind) {
        case PolicyNode::Kind::constant_true:
            out += "";
            return;
        case PolicyNode::Kind::has_tag:
            out += "has(" + node.tag + ")";
            return;
        case PolicyNode::Kind::negation:
            out += "!(";
            render(*node.left, out);
            out += ")";
            return;
        case PolicyNode::Kind::conjunction:
            out += "(";
            render(*node.left, out);
            out += " & ";
            render(*node.right, out);
            out += ")";
            return;
        case PolicyNode::Kind::disjunction:
            out += "(";
            render(*node.left, out);
            out += " | ";
            render(*node.right, out);
            out += ")";
            return;
    }
}

}  // namespace

Policy::Policy() : root_(make_node(PolicyNode{})) {}

Policy::Policy(PolicyPtr root) : root_(std::move(root)) {
    if (!root_) {
        throw std::invalid_argument("policy: null expression tree");
    }
}

Policy Policy::constant_true() {
    return Policy{};
}

Policy Policy::has(const std::string& tag) {
    if (tag.empty()) {
        throw std::invalid_argument("policy: has() needs a non-empty tag");
    }
    PolicyNode node;
    node.kind = PolicyNode::Kind::has_tag;
    node.tag = tag;
    return Policy(make_node(std::move(node)));
}

Policy Policy::negation(const Policy& operand) {
    PolicyNode node;
    node.kind = PolicyNode::Kind::negation;
    node.left = operand.root_;
    return Policy(make_node(std::move(node)));
}

Policy Policy::conjunction(const Policy& lhs, const Policy& rhs) {
    PolicyNode node;
    node.kind = PolicyNode::Kind::conjunction;
    node.left = lhs.root_;
    node.right = rhs.root_;
    return Policy(make_node(std::move(node)));
}

Policy Policy::disjunction(const Policy& lhs, const Policy& rhs) {
    PolicyNode node;
    node.kind = PolicyNode::Kind::disjunction;
    node.left = lhs.root_;
    node.right = rhs.root_;
    return Policy(make_node(std::move(node)));
}

std::string Policy::text() const {
    std::string out;
    render(*root_, out);
    return out;
}

Policy parse_policy(const std::string& text) {
    return Parser(text).parse();
}

bool satisfies(const TagSet& attributes, const Policy& policy) {
    return evaluate(policy.root(), attributes);
}

}  // namespace isek

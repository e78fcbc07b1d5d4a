#pragma once

#include <cstddef>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "isek/types.hpp"

namespace isek {

enum class TopologyKind { random, ring, small_world };

TopologyKind topology_kind_from_string(std::string_view name);
const char* to_string(TopologyKind kind);

/**
 * Undirected simple graph with node ids 0..N-1. Immutable once generated;
 * shared read-only across concurrent trials.
 */
class Graph {
public:
    Graph(std::size_t node_count, TopologyKind kind);

    std::size_t node_count() const { return adjacency_.size(); }
    std::size_t edge_count() const { return edge_count_; }
    TopologyKind kind() const { return kind_; }

    // Neighbor ids in ascending order. Throws on unknown node.
    const std::vector<NodeId>& neighbors(NodeId node) const;
    std::size_t degree(NodeId node) const { return neighbors(node).size(); }

    bool has_edge(NodeId a, NodeId b) const;
    void add_edge(NodeId a, NodeId b);  // rejects self-loops; duplicate is a no-op

    std::size_t max_degree() const;
    double mean_degree() const {
        return adjacency_.empty() ? 0.0
                                  : 2.0 * static_cast<double>(edge_count_) /
                                        static_cast<double>(adjacency_.size());
    }

    // One "i j" pair per line, i < j.
    void write_edge_list(std::ostream& out) const;

private:
    std::vector<std::vector<NodeId>> adjacency_;
    std::size_t edge_count_ = 0;
    TopologyKind kind_;
};

// Builds the network graph. For kind=random each unordered pair is an edge
// independently with probability mean_degree/(n-1). Ring ignores mean_degree
// (every degree is 2). Small-world starts from a k-nearest ring
// (k = mean_degree rounded to even) and rewires each edge with probability 0.1.
// Rejects n < 2 and mean_degree outside (0, n).
Graph generate_graph(std::size_t n, double mean_degree, TopologyKind kind,
                     std::uint64_t seed);

// True iff a single traversal from node 0 reaches every node.
bool is_connected(const Graph& g);

}  // namespace isek

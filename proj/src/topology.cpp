#include "isek/topology.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "isek/log.hpp"
#include "isek/rng.hpp"

namespace isek {

TopologyKind topology_kind_from_string(std::string_view name) {
    if (name == "random") return TopologyKind::random;
    if (name == "ring") return TopologyKind::ring;
    if (name == "small-world" || name == "small_world") return TopologyKind::small_world;
    throw std::invalid_argument("unknown topology kind: " + std::string(name));
}

const char* to_string(TopologyKind kind) {
    switch (kind) {
        case TopologyKind::random: return "random";
        case TopologyKind::ring: return "ring";
        case TopologyKind::small_world: return "small-world";
    }
    return "?";
}

Graph::Graph(std::size_t node_count, TopologyKind kind)
    : adjacency_(node_count), kind_(kind) {}

const std::vector<NodeId>& Graph::neighbors(NodeId node) const {
    if (node >= adjacency_.size())
        throw std::out_of_range("unknown node id " + std::to_string(node));
    return adjacency_[node];
}

bool Graph::has_edge(NodeId a, NodeId b) const {
    const auto& nb = neighbors(a);
    return std::binary_search(nb.begin(), nb.end(), b);
}

void Graph::add_edge(NodeId a, NodeId b) {
    if (a == b) throw std::invalid_argument("self-loops are not allowed");
    if (a >= adjacency_.size() || b >= adjacency_.size())
        throw std::out_of_range("edge endpoint out of range");
    if (has_edge(a, b)) return;
    auto insert_sorted = [](std::vector<NodeId>& list, NodeId v) {
        list.insert(std::upper_bound(list.begin(), list.end(), v), v);
    };
    insert_sorted(adjacency_[a], b);
    insert_sorted(adjacency_[b], a);
    ++edge_count_;
}

std::size_t Graph::max_degree() const {
    std::size_t best = 0;
    for (const auto& nb : adjacency_) best = std::max(best, nb.size());
    return best;
}

void Graph::write_edge_list(std::ostream& out) const {
    for (NodeId i = 0; i < adjacency_.size(); ++i)
        for (NodeId j : adjacency_[i])
            if (i < j) out << i << ' ' << j << '\n';
}

namespace {

Graph make_ring(std::size_t n) {
    Graph g(n, TopologyKind::ring);
    for (NodeId i = 0; i < n; ++i) g.add_edge(i, static_cast<NodeId>((i + 1) % n));
    return g;
}

Graph make_random(std::size_t n, double mean_degree, std::uint64_t seed) {
    Graph g(n, TopologyKind::random);
    const double p = mean_degree / static_cast<double>(n - 1);
    RngStream rng = RngStream::derive(seed, stream::topology);
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = i + 1; j < n; ++j)
            if (rng.bernoulli(p)) g.add_edge(i, j);
    return g;
}

// Watts-Strogatz style: k-nearest ring, then each clockwise edge rewired
// with probability 0.1 to a uniformly random non-duplicate endpoint.
Graph make_small_world(std::size_t n, double mean_degree, std::uint64_t seed) {
    constexpr double kRewire = 0.1;
    auto k = static_cast<std::size_t>(std::llround(mean_degree));
    k -= k % 2;
    k = std::max<std::size_t>(2, std::min(k, n - 1 - (n - 1) % 2));

    Graph g(n, TopologyKind::small_world);
    for (NodeId i = 0; i < n; ++i)
        for (std::size_t d = 1; d <= k / 2; ++d)
            g.add_edge(i, static_cast<NodeId>((i + d) % n));

    RngStream rng = RngStream::derive(seed, stream::topology, 1);
    Graph rewired(n, TopologyKind::small_world);
    for (NodeId i = 0; i < n; ++i) {
        for (std::size_t d = 1; d <= k / 2; ++d) {
            auto j = static_cast<NodeId>((i + d) % n);
            if (rng.bernoulli(kRewire)) {
                NodeId target = j;
                for (int attempt = 0; attempt < 16; ++attempt) {
                    target = rng.next_below(static_cast<std::uint32_t>(n));
                    if (target != i && !rewired.has_edge(i, target)) break;
                    target = j;
                }
                if (target != i && !rewired.has_edge(i, target)) j = target;
            }
            if (!rewired.has_edge(i, j)) rewired.add_edge(i, j);
        }
    }
    return rewired;
}

}  // namespace

Graph generate_graph(std::size_t n, double mean_degree, TopologyKind kind,
                     std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("graph needs at least 2 nodes");
    if (!(mean_degree > 0.0) || mean_degree >= static_cast<double>(n))
        throw std::invalid_argument("mean_degree must lie in (0, n)");
    Graph g(0, kind);
    switch (kind) {
        case TopologyKind::ring: g = make_ring(n); break;
        case TopologyKind::random: g = make_random(n, mean_degree, seed); break;
        case TopologyKind::small_world: g = make_small_world(n, mean_degree, seed); break;
    }
    if (!is_connected(g)) {
        warn("topology: generated " + std::string(to_string(kind)) + " graph on " +
             std::to_string(n) + " nodes is disconnected");
    }
    return g;
}

bool is_connected(const Graph& g) {
    const std::size_t n = g.node_count();
    if (n == 0) return true;
    std::vector<char> seen(n, 0);
    std::vector<NodeId> frontier{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        NodeId node = frontier.back();
        frontier.pop_back();
        for (NodeId next : g.neighbors(node)) {
            if (!seen[next]) {
                seen[next] = 1;
                ++reached;
                frontier.push_back(next);
            }
        }
    }
    return reached == n;
}

}  // namespace isek

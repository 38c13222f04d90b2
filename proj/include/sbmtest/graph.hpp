#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sbmtest/rng.hpp"

namespace sbmtest {

using Edge = std::pair<std::uint32_t, std::uint32_t>; // stored with first < second

// Undirected simple graph: node count, sorted unique edge list, and a CSR
// adjacency index derived from the edges. Immutable after construction and
// safe to share across threads.
class Graph {
public:
    Graph() = default;

    // Validates, normalizes (u,v)->(min,max), sorts and collapses duplicate
    // edges. Self-loops and out-of-range endpoints are rejected.
    static Graph from_edges(int n, std::vector<Edge> edges);

    int node_count() const { return n_; }
    std::size_t edge_count() const { return edges_.size(); }
    std::span<const Edge> edges() const { return edges_; }

    std::span<const std::uint32_t> neighbors(int v) const {
        return {adj_.data() + offsets_[static_cast<std::size_t>(v)],
                adj_.data() + offsets_[static_cast<std::size_t>(v) + 1]};
    }
    int degree(int v) const {
        return static_cast<int>(offsets_[static_cast<std::size_t>(v) + 1] - offsets_[static_cast<std::size_t>(v)]);
    }
    bool has_edge(int u, int v) const;

    // Fraction of realized node pairs, 2|E| / (n(n-1)).
    double edge_density() const;

    bool operator==(const Graph& other) const { return n_ == other.n_ && edges_ == other.edges_; }

private:
    int n_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::uint32_t> adj_;
    std::vector<std::size_t> offsets_;

    void build_adjacency();
};

// One +/-1 assignment per node.
struct CommunityLabels {
    std::vector<std::int8_t> sigma;

    int size() const { return static_cast<int>(sigma.size()); }
    void validate(int n) const; // length n, entries restricted to +/-1
};

// Rates of the two-community model and its equal-degree null: edges appear
// with probability a/n within a community and b/n across, and the null is
// the plain random graph with the matching rate p0 = (a+b)/(2n).
struct ModelParams {
    double a = 0.0;
    double b = 0.0;
    int n = 0;

    double edge_rate() const { return (a + b) / (2.0 * n); } // p0
    void validate() const;                                   // a > b > 0, n >= 3, p0 in (0,1)
};

// Random graph with every pair included independently with probability p.
Graph sample_gnp(int n, double p, RngStream& rng);

// Null-model sampler at rate p0 = (a+b)/(2n).
Graph sample_er(const ModelParams& params, RngStream& rng);

// Edges given fixed labels: probability p_same when endpoints share a label,
// p_diff otherwise.
Graph sample_two_rate(int n, const CommunityLabels& labels, double p_same, double p_diff, RngStream& rng);

// Two-community sampler: uniform i.i.d. +/-1 labels, then conditional rates
// a/n (same label) and b/n (different). Returns the labels actually used.
std::pair<Graph, CommunityLabels> sample_sbm(const ModelParams& params, RngStream& rng);

// Number of distinct m-cycles, counting each cycle once (rotations and the
// two traversal directions quotiented out). Supports 3 <= m <= 7; cycle
// lengths beyond 7 are not needed here and are rejected.
std::uint64_t count_cycles(const Graph& g, int m);

struct EdgeListOptions {
    int index_base = 0;               // published edge lists are 0- or 1-based
    char comment = '#';               // lines starting with this are skipped
    std::optional<int> node_count;    // override; default max index + 1
};

// Whitespace-separated "u v" lines; an optional leading "n <count>" header
// (as written by write_edge_list) fixes the node count. Duplicate edges
// collapse; self-loops are data errors; malformed lines report line numbers.
Graph read_edge_list(const std::string& path, const EdgeListOptions& options = {});
Graph read_edge_list(std::istream& in, const EdgeListOptions& options, const std::string& source_name);

// Byte-stable serialization: "n <count>" header, then one "u v" line per
// edge in lexicographic order.
void write_edge_list(const Graph& g, std::ostream& out);

// Subgraph induced by the given nodes, relabeled 0..k-1 in ascending order
// of the original ids. Duplicates and out-of-range nodes are rejected.
Graph induced_subgraph(const Graph& g, std::span<const int> nodes);

// Label files: one +1 / -1 entry per line.
CommunityLabels read_labels(const std::string& path);
void write_labels(const CommunityLabels& labels, std::ostream& out);

} // namespace sbmtest

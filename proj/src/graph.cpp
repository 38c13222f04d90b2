#include "sbmtest/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "sbmtest/errors.hpp"

namespace sbmtest {

Graph Graph::from_edges(int n, std::vector<Edge> edges) {
    if (n < 0) throw parameter_error("node count must be non-negative");
    for (auto& [u, v] : edges) {
        if (u == v) throw data_error("self-loop at node " + std::to_string(u));
        if (u >= static_cast<std::uint32_t>(n) || v >= static_cast<std::uint32_t>(n))
            throw parameter_error("edge endpoint out of range: (" + std::to_string(u) + "," + std::to_string(v) + ")");
        if (u > v) std::swap(u, v);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    Graph g;
    g.n_ = n;
    g.edges_ = std::move(edges);
    g.build_adjacency();
    return g;
}

void Graph::build_adjacency() {
    offsets_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (const auto& [u, v] : edges_) {
        ++offsets_[u + 1];
        ++offsets_[v + 1];
    }
    for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
    adj_.resize(2 * edges_.size());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const auto& [u, v] : edges_) {
        adj_[fill[u]++] = v;
        adj_[fill[v]++] = u;
    }
    for (int v = 0; v < n_; ++v)
        std::sort(adj_.begin() + static_cast<std::ptrdiff_t>(offsets_[static_cast<std::size_t>(v)]),
                  adj_.begin() + static_cast<std::ptrdiff_t>(offsets_[static_cast<std::size_t>(v) + 1]));
}

bool Graph::has_edge(int u, int v) const {
    if (u == v) return false;
    const auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), static_cast<std::uint32_t>(v));
}

double Graph::edge_density() const {
    if (n_ < 2) return 0.0;
    return 2.0 * static_cast<double>(edges_.size()) / (static_cast<double>(n_) * (n_ - 1));
}

void CommunityLabels::validate(int n) const {
    if (size() != n)
        throw parameter_error("label vector length " + std::to_string(size()) + " does not match node count " +
                              std::to_string(n));
    for (std::int8_t s : sigma)
        if (s != 1 && s != -1) throw parameter_error("labels must be +1 or -1");
}

void ModelParams::validate() const {
    if (!(a > 0.0) || !(b > 0.0)) throw parameter_error("rates a, b must be positive");
    if (!(a > b)) throw parameter_error("within-community rate a must exceed across rate b");
    if (n < 3) throw parameter_error("node count must be at least 3");
    const double p0 = edge_rate();
    if (!(p0 > 0.0 && p0 < 1.0)) throw parameter_error("edge rate (a+b)/(2n) must lie in (0,1)");
}

Graph sample_gnp(int n, double p, RngStream& rng) {
    if (n < 0) throw parameter_error("node count must be non-negative");
    if (!(p >= 0.0 && p <= 1.0)) throw parameter_error("edge probability must lie in [0,1]");
    std::vector<Edge> edges;
    if (p > 0.0) {
        edges.reserve(static_cast<std::size_t>(p * n * (n - 1) / 2 * 1.2 + 16));
        for (std::uint32_t u = 0; u + 1 < static_cast<std::uint32_t>(n); ++u)
            for (std::uint32_t v = u + 1; v < static_cast<std::uint32_t>(n); ++v)
                if (rng.uniform() < p) edges.emplace_back(u, v);
    }
    return Graph::from_edges(n, std::move(edges));
}

Graph sample_er(const ModelParams& params, RngStream& rng) {
    params.validate();
    return sample_gnp(params.n, params.edge_rate(), rng);
}

Graph sample_two_rate(int n, const CommunityLabels& labels, double p_same, double p_diff, RngStream& rng) {
    labels.validate(n);
    if (!(p_same >= 0.0 && p_same <= 1.0) || !(p_diff >= 0.0 && p_diff <= 1.0))
        throw parameter_error("edge probabilities must lie in [0,1]");
    std::vector<Edge> edges;
    for (std::uint32_t u = 0; u + 1 < static_cast<std::uint32_t>(n); ++u) {
        for (std::uint32_t v = u + 1; v < static_cast<std::uint32_t>(n); ++v) {
            const double p = labels.sigma[u] == labels.sigma[v] ? p_same : p_diff;
            if (rng.uniform() < p) edges.emplace_back(u, v);
        }
    }
    return Graph::from_edges(n, std::move(edges));
}

std::pair<Graph, CommunityLabels> sample_sbm(const ModelParams& params, RngStream& rng) {
    params.validate();
    if (!(params.a / params.n < 1.0)) throw parameter_error("within rate a/n must be below 1");
    CommunityLabels labels;
    labels.sigma.resize(static_cast<std::size_t>(params.n));
    for (auto& s : labels.sigma) s = rng.uniform() < 0.5 ? std::int8_t{1} : std::int8_t{-1};
    Graph g = sample_two_rate(params.n, labels, params.a / params.n, params.b / params.n, rng);
    return {std::move(g), std::move(labels)};
}

std::uint64_t count_cycles(const Graph& g, int m) {
    if (m < 3) throw parameter_error("cycle length must be at least 3");
    if (m > 7) throw parameter_error("cycle lengths beyond 7 are unsupported");
    const int n = g.node_count();
    if (m > n) return 0;

    // Rooted path enumeration: grow simple paths from each root s using only
    // nodes > s, closing back to s at length m. Each cycle is met exactly
    // twice (once per direction), with the root at its minimum node.
    std::uint64_t closures = 0;
    std::vector<char> on_path(static_cast<std::size_t>(n), 0);
    std::vector<std::uint32_t> path;
    path.reserve(static_cast<std::size_t>(m));
    std::function<void(std::uint32_t, std::uint32_t)> extend = [&](std::uint32_t root, std::uint32_t last) {
        if (path.size() == static_cast<std::size_t>(m)) {
            if (g.has_edge(static_cast<int>(last), static_cast<int>(root))) ++closures;
            return;
        }
        for (std::uint32_t next : g.neighbors(static_cast<int>(last))) {
            if (next <= root || on_path[next]) continue;
            on_path[next] = 1;
            path.push_back(next);
            extend(root, next);
            path.pop_back();
            on_path[next] = 0;
        }
    };
    for (std::uint32_t s = 0; s < static_cast<std::uint32_t>(n); ++s) {
        on_path[s] = 1;
        path.push_back(s);
        extend(s, s);
        path.pop_back();
        on_path[s] = 0;
    }
    return closures / 2;
}

Graph read_edge_list(const std::string& path, const EdgeListOptions& options) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open edge list file: " + path);
    return read_edge_list(in, options, path);
}

Graph read_edge_list(std::istream& in, const EdgeListOptions& options, const std::string& source_name) {
    std::vector<Edge> edges;
    std::optional<long long> header_count;
    std::string line;
    long line_no = 0;
    long long max_index = -1;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos) continue;
        if (line[start] == options.comment) continue;
        std::istringstream ls(line.substr(start));
        std::string first;
        ls >> first;
        if (first == "n") {
            long long cnt = -1;
            std::string extra;
            if (!(ls >> cnt) || cnt < 0 || (ls >> extra))
                throw parse_error(source_name, line_no, "malformed node-count header");
            header_count = cnt;
            continue;
        }
        long long u = 0, v = 0;
        std::string extra;
        try {
            std::size_t used = 0;
            u = std::stoll(first, &used);
            if (used != first.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw parse_error(source_name, line_no, "expected integer node id, got '" + first + "'");
        }
        if (!(ls >> v)) throw parse_error(source_name, line_no, "expected two node ids");
        if (ls >> extra) throw parse_error(source_name, line_no, "trailing content '" + extra + "'");
        u -= options.index_base;
        v -= options.index_base;
        if (u < 0 || v < 0)
            throw parse_error(source_name, line_no, "node id below index base " + std::to_string(options.index_base));
        if (u == v) throw parse_error(source_name, line_no, "self-loop on node " + std::to_string(u));
        max_index = std::max({max_index, u, v});
        edges.emplace_back(static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v));
    }
    long long n = max_index + 1;
    if (options.node_count) n = *options.node_count;
    else if (header_count) n = *header_count;
    if (n < max_index + 1)
        throw data_error(source_name + ": node count " + std::to_string(n) + " below max node id " +
                         std::to_string(max_index));
    return Graph::from_edges(static_cast<int>(n), std::move(edges));
}

void write_edge_list(const Graph& g, std::ostream& out) {
    out << "n " << g.node_count() << "\n";
    for (const auto& [u, v] : g.edges()) out << u << " " << v << "\n";
}

Graph induced_subgraph(const Graph& g, std::span<const int> nodes) {
    std::vector<int> sorted(nodes.begin(), nodes.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw parameter_error("node subset contains duplicates");
    for (int v : sorted)
        if (v < 0 || v >= g.node_count()) throw parameter_error("subset node " + std::to_string(v) + " out of range");
    std::vector<int> relabel(static_cast<std::size_t>(g.node_count()), -1);
    for (std::size_t i = 0; i < sorted.size(); ++i) relabel[static_cast<std::size_t>(sorted[i])] = static_cast<int>(i);
    std::vector<Edge> edges;
    for (const auto& [u, v] : g.edges()) {
        const int ru = relabel[u], rv = relabel[v];
        if (ru >= 0 && rv >= 0) edges.emplace_back(static_cast<std::uint32_t>(ru), static_cast<std::uint32_t>(rv));
    }
    return Graph::from_edges(static_cast<int>(sorted.size()), std::move(edges));
}

CommunityLabels read_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open labels file: " + path);
    CommunityLabels labels;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        long long v = 0;
        if (!(ls >> v)) {
            std::string rest;
            if (ls.clear(), ls >> rest) throw parse_error(path, line_no, "expected +1 or -1");
            continue; // blank line
        }
        if (v != 1 && v != -1) throw parse_error(path, line_no, "labels must be +1 or -1");
        labels.sigma.push_back(static_cast<std::int8_t>(v));
    }
    return labels;
}

void write_labels(const CommunityLabels& labels, std::ostream& out) {
    for (std::int8_t s : labels.sigma) out << (s > 0 ? "1" : "-1") << "\n";
}

} // namespace sbmtest

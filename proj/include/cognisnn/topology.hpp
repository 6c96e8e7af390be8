#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cognisnn/error.hpp"

namespace cognisnn {

using Edge = std::pair<uint32_t, uint32_t>;

enum class GraphGen { er, ws, chain, custom };

// DAG of ResNode ids. Edges always ascend in node index, which makes the
// identity order a valid topological order.
struct DagTopology {
    uint32_t node_count = 0;
    std::vector<Edge> edges;  // sorted, unique, first < second
    GraphGen generator = GraphGen::custom;
    double er_p = 0.0;
    uint32_t ws_k = 0;
    double ws_rewire = 0.0;
    uint64_t seed = 0;

    std::vector<uint32_t> sources() const;  // in-degree 0
    std::vector<uint32_t> sinks() const;    // out-degree 0
    std::vector<std::vector<uint32_t>> predecessors() const;
    std::vector<std::vector<uint32_t>> successors() const;

    std::string to_text() const;
    static DagTopology from_text(const std::string& text);

    void validate() const;
};

DagTopology generate_er(uint32_t n, double p, uint64_t seed);
DagTopology generate_ws(uint32_t n, uint32_t k, double p_rewire, uint64_t seed);
DagTopology make_chain(uint32_t n);

// Simple source-to-sink path: consecutive nodes joined by topology edges.
struct Path {
    std::vector<uint32_t> nodes;

    std::vector<Edge> edge_list() const {
        std::vector<Edge> out;
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
            out.push_back({nodes[i], nodes[i + 1]});
        return out;
    }
    bool operator==(const Path& o) const { return nodes == o.nodes; }
};

// All simple directed source->sink paths, DFS with ascending child order.
// Exceeding `cap` raises a capacity error rather than truncating.
std::vector<Path> enumerate_paths(const DagTopology& topo, std::size_t cap = 1000000);

// Brandes betweenness over all ordered pairs, unit lengths, unnormalized;
// endpoints excluded from node scores.
std::vector<double> node_betweenness(const DagTopology& topo);
std::map<Edge, double> edge_betweenness(const DagTopology& topo);

double path_betweenness(const Path& path, const std::vector<double>& node_scores,
                        const std::map<Edge, double>& edge_scores);

struct PathRanking {
    // descending by score; ties broken by lexicographically smaller node list
    std::vector<std::pair<Path, double>> entries;

    std::size_t size() const { return entries.size(); }
};

PathRanking rank_paths(const DagTopology& topo, std::size_t cap = 1000000);

// similar: the K highest-scoring paths; otherwise the K lowest.
std::vector<Path> select_critical_paths(const PathRanking& ranking, std::size_t k,
                                        bool similar);

}  // namespace cognisnn

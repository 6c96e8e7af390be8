#include "cognisnn/topology.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <set>
#include <sstream>

#include "cognisnn/util.hpp"

namespace cognisnn {

std::vector<uint32_t> DagTopology::sources() const {
    std::vector<uint32_t> indeg(node_count, 0);
    for (auto& e : edges) indeg[e.second]++;
    std::vector<uint32_t> out;
    for (uint32_t v = 0; v < node_count; ++v)
        if (indeg[v] == 0) out.push_back(v);
    return out;
}

std::vector<uint32_t> DagTopology::sinks() const {
    std::vector<uint32_t> outdeg(node_count, 0);
    for (auto& e : edges) outdeg[e.first]++;
    std::vector<uint32_t> out;
    for (uint32_t v = 0; v < node_count; ++v)
        if (outdeg[v] == 0) out.push_back(v);
    return out;
}

std::vector<std::vector<uint32_t>> DagTopology::predecessors() const {
    std::vector<std::vector<uint32_t>> preds(node_count);
    for (auto& e : edges) preds[e.second].push_back(e.first);
    return preds;
}

std::vector<std::vector<uint32_t>> DagTopology::successors() const {
    std::vector<std::vector<uint32_t>> succs(node_count);
    for (auto& e : edges) succs[e.first].push_back(e.second);
    return succs;
}

void DagTopology::validate() const {
    if (node_count < 1) throw InvalidArgument("topology: empty graph");
    std::set<Edge> seen;
    for (auto& e : edges) {
        if (e.first >= e.second)
            throw InvalidArgument("topology: edge must ascend in node index");
        if (e.second >= node_count) throw InvalidArgument("topology: edge endpoint out of range");
        if (!seen.insert(e).second) throw InvalidArgument("topology: duplicate edge");
    }
}

std::string DagTopology::to_text() const {
    std::ostringstream out;
    out << "N " << node_count << "\n";
    out << "GEN ";
    switch (generator) {
    case GraphGen::er:
        out << "er " << format_double(er_p);
        break;
    case GraphGen::ws:
        out << "ws " << ws_k << " " << format_double(ws_rewire);
        break;
    case GraphGen::chain:
        out << "chain";
        break;
    case GraphGen::custom:
        out << "custom";
        break;
    }
    out << "\n";
    out << "SEED " << seed << "\n";
    for (auto& e : edges) out << "E " << e.first << " " << e.second << "\n";
    return out.str();
}

DagTopology DagTopology::from_text(const std::string& text) {
    DagTopology t;
    std::istringstream in(text);
    std::string line;
    bool have_n = false;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto tok = split_ws(line);
        if (tok[0] == "N" && tok.size() == 2) {
            t.node_count = uint32_t(parse_u64(tok[1], "topology N"));
            have_n = true;
        } else if (tok[0] == "SEED" && tok.size() == 2) {
            t.seed = parse_u64(tok[1], "topology SEED");
        } else if (tok[0] == "GEN" && tok.size() >= 2) {
            if (tok[1] == "er" && tok.size() == 3) {
                t.generator = GraphGen::er;
                t.er_p = parse_double(tok[2], "topology er p");
            } else if (tok[1] == "ws" && tok.size() == 4) {
                t.generator = GraphGen::ws;
                t.ws_k = uint32_t(parse_u64(tok[2], "topology ws k"));
                t.ws_rewire = parse_double(tok[3], "topology ws rewire");
            } else if (tok[1] == "chain") {
                t.generator = GraphGen::chain;
            } else if (tok[1] == "custom") {
                t.generator = GraphGen::custom;
            } else {
                throw DataError("topology: bad GEN line '" + line + "'");
            }
        } else if (tok[0] == "E" && tok.size() == 3) {
            uint32_t a = uint32_t(parse_u64(tok[1], "topology edge"));
            uint32_t b = uint32_t(parse_u64(tok[2], "topology edge"));
            t.edges.push_back({a, b});
        } else {
            throw DataError("topology: unrecognized line '" + line + "'");
        }
    }
    if (!have_n) throw DataError("topology: missing N line");
    std::sort(t.edges.begin(), t.edges.end());
    t.validate();
    return t;
}

namespace {

// orient undirected pairs low->high, dedupe, then re-attach isolated nodes so
// every ResNode sits on a source->sink path
std::vector<Edge> finalize_edges(std::set<Edge> oriented, uint32_t n) {
    std::vector<uint32_t> degree(n, 0);
    for (auto& e : oriented) {
        degree[e.first]++;
        degree[e.second]++;
    }
    for (uint32_t v = 0; v < n; ++v) {
        if (degree[v] != 0) continue;
        Edge added = v > 0 ? Edge{v - 1, v} : Edge{0, 1};
        if (oriented.insert(added).second) {
            degree[added.first]++;
            degree[added.second]++;
        }
    }
    return std::vector<Edge>(oriented.begin(), oriented.end());
}

}  // namespace

DagTopology generate_er(uint32_t n, double p, uint64_t seed) {
    if (n < 2) throw InvalidArgument("generate_er: need at least 2 nodes");
    if (p <= 0.0 || p > 1.0) throw InvalidArgument("generate_er: p must be in (0,1]");
    const int max_retries = 16;
    for (int attempt = 0; attempt < max_retries; ++attempt) {
        uint64_t s = seed + uint64_t(attempt);
        std::mt19937_64 rng(s);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::set<Edge> oriented;
        for (uint32_t i = 0; i < n; ++i)
            for (uint32_t j = i + 1; j < n; ++j)
                if (unif(rng) < p) oriented.insert({i, j});
        if (oriented.empty()) continue;  // degenerate sample, regenerate
        DagTopology t;
        t.node_count = n;
        t.edges = finalize_edges(std::move(oriented), n);
        t.generator = GraphGen::er;
        t.er_p = p;
        t.seed = s;
        t.validate();
        return t;
    }
    throw InvalidArgument("generate_er: no edges after " + std::to_string(max_retries) +
                          " attempts (n=" + std::to_string(n) + ", p=" + format_double(p) +
                          ")");
}

DagTopology generate_ws(uint32_t n, uint32_t k, double p_rewire, uint64_t seed) {
    if (k < 2 || k % 2 != 0) throw InvalidArgument("generate_ws: k must be even and >= 2");
    if (n <= k) throw InvalidArgument("generate_ws: need n > k");
    if (p_rewire < 0.0 || p_rewire > 1.0)
        throw InvalidArgument("generate_ws: rewire probability must be in [0,1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<uint32_t> pick(0, n - 1);

    auto norm = [](uint32_t a, uint32_t b) { return a < b ? Edge{a, b} : Edge{b, a}; };
    std::set<Edge> undirected;
    for (uint32_t d = 1; d <= k / 2; ++d)
        for (uint32_t i = 0; i < n; ++i) undirected.insert(norm(i, (i + d) % n));

    // standard rewiring sweep: same enumeration order as construction
    for (uint32_t d = 1; d <= k / 2; ++d) {
        for (uint32_t i = 0; i < n; ++i) {
            Edge cur = norm(i, (i + d) % n);
            if (undirected.find(cur) == undirected.end()) continue;  // already rewired away
            if (unif(rng) >= p_rewire) continue;
            // bounded retry to find a fresh partner; give up keeps the edge count fixed
            for (int tries = 0; tries < 64; ++tries) {
                uint32_t j = pick(rng);
                if (j == i) continue;
                Edge cand = norm(i, j);
                if (undirected.count(cand)) continue;
                undirected.erase(cur);
                undirected.insert(cand);
                break;
            }
        }
    }

    DagTopology t;
    t.node_count = n;
    t.edges = finalize_edges(std::move(undirected), n);
    t.generator = GraphGen::ws;
    t.ws_k = k;
    t.ws_rewire = p_rewire;
    t.seed = seed;
    t.validate();
    return t;
}

DagTopology make_chain(uint32_t n) {
    if (n < 1) throw InvalidArgument("make_chain: need at least 1 node");
    DagTopology t;
    t.node_count = n;
    for (uint32_t i = 0; i + 1 < n; ++i) t.edges.push_back({i, i + 1});
    t.generator = GraphGen::chain;
    t.validate();
    return t;
}

std::vector<Path> enumerate_paths(const DagTopology& topo, std::size_t cap) {
    topo.validate();
    auto succs = topo.successors();
    for (auto& s : succs) std::sort(s.begin(), s.end());
    std::vector<uint32_t> outdeg(topo.node_count, 0);
    for (auto& e : topo.edges) outdeg[e.first]++;

    std::vector<Path> out;
    std::vector<uint32_t> stack;
    auto dfs = [&](auto&& self, uint32_t v) -> void {
        stack.push_back(v);
        if (outdeg[v] == 0) {
            if (out.size() >= cap)
                throw CapacityError("enumerate_paths: path count exceeds cap " +
                                    std::to_string(cap));
            out.push_back(Path{stack});
        } else {
            for (uint32_t w : succs[v]) self(self, w);
        }
        stack.pop_back();
    };
    for (uint32_t s : topo.sources()) dfs(dfs, s);
    return out;
}

namespace {

// Brandes' accumulation for unit-length directed graphs; fills both node and
// edge dependencies in one sweep per source.
void brandes(const DagTopology& topo, std::vector<double>& node_scores,
             std::map<Edge, double>* edge_scores) {
    uint32_t n = topo.node_count;
    auto succs = topo.successors();
    for (auto& s : succs) std::sort(s.begin(), s.end());
    node_scores.assign(n, 0.0);

    std::vector<long> dist(n);
    std::vector<double> sigma(n), delta(n);
    std::vector<std::vector<uint32_t>> preds(n);
    std::vector<uint32_t> order;
    order.reserve(n);

    for (uint32_t s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), -1);
        std::fill(sigma.begin(), sigma.end(), 0.0);
        std::fill(delta.begin(), delta.end(), 0.0);
        for (auto& p : preds) p.clear();
        order.clear();

        std::deque<uint32_t> queue;
        dist[s] = 0;
        sigma[s] = 1.0;
        queue.push_back(s);
        while (!queue.empty()) {
            uint32_t v = queue.front();
            queue.pop_front();
            order.push_back(v);
            for (uint32_t w : succs[v]) {
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if (dist[w] == dist[v] + 1) {
                    sigma[w] += sigma[v];
                    preds[w].push_back(v);
                }
            }
        }
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            uint32_t w = *it;
            for (uint32_t v : preds[w]) {
                double c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                delta[v] += c;
                if (edge_scores) (*edge_scores)[{v, w}] += c;
            }
            if (w != s) node_scores[w] += delta[w];
        }
    }
}

}  // namespace

std::vector<double> node_betweenness(const DagTopology& topo) {
    std::vector<double> scores;
    brandes(topo, scores, nullptr);
    return scores;
}

std::map<Edge, double> edge_betweenness(const DagTopology& topo) {
    std::vector<double> scores;
    std::map<Edge, double> edge_scores;
    for (auto& e : topo.edges) edge_scores[e] = 0.0;
    brandes(topo, scores, &edge_scores);
    return edge_scores;
}

double path_betweenness(const Path& path, const std::vector<double>& node_scores,
                        const std::map<Edge, double>& edge_scores) {
    double total = 0.0;
    for (uint32_t v : path.nodes) {
        if (v >= node_scores.size())
            throw InternalError("path_betweenness: node score missing for " +
                                std::to_string(v));
        total += node_scores[v];
    }
    for (auto& e : path.edge_list()) {
        auto it = edge_scores.find(e);
        if (it == edge_scores.end())
            throw InternalError("path_betweenness: edge score missing for " +
                                std::to_string(e.first) + "->" + std::to_string(e.second));
        total += it->second;
    }
    return total;
}

PathRanking rank_paths(const DagTopology& topo, std::size_t cap) {
    auto paths = enumerate_paths(topo, cap);
    auto nscores = node_betweenness(topo);
    auto escores = edge_betweenness(topo);
    PathRanking ranking;
    ranking.entries.reserve(paths.size());
    for (auto& p : paths) {
        double score = path_betweenness(p, nscores, escores);
        ranking.entries.push_back({std::move(p), score});
    }
    std::sort(ranking.entries.begin(), ranking.entries.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first.nodes < b.first.nodes;
              });
    return ranking;
}

std::vector<Path> select_critical_paths(const PathRanking& ranking, std::size_t k,
                                        bool similar) {
    if (k > ranking.size())
        throw InvalidArgument("select_critical_paths: K=" + std::to_string(k) +
                              " exceeds path count " + std::to_string(ranking.size()));
    std::vector<Path> out;
    out.reserve(k);
    if (similar) {
        for (std::size_t i = 0; i < k; ++i) out.push_back(ranking.entries[i].first);
    } else {
        for (std::size_t i = ranking.size() - k; i < ranking.size(); ++i)
            out.push_back(ranking.entries[i].first);
    }
    return out;
}

}  // namespace cognisnn

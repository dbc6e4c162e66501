// Static network topology: Waxman generation, link physics and request sampling.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qguard/random.hpp"
#include "qguard/types.hpp"
#include "qguard/werner.hpp"

namespace qguard {

struct IntRange {
    int lo = 0;
    int hi = 0;

    bool contains(int v) const { return v >= lo && v <= hi; }
};

struct Node {
    NodeId id = 0;
    double x_km = 0.0;
    double y_km = 0.0;
    int memory_qubits = 0;
};

// F0 = 1/4 + 3/4 exp(-1/eta): mean fidelity of a freshly generated pair.
inline Fidelity initial_fidelity_mean(double eta) {
    if (!(eta > 0.0)) {
        throw std::invalid_argument("initial_fidelity_mean: eta must be positive");
    }
    return Fidelity{0.25 + 0.75 * std::exp(-1.0 / eta)};
}

struct Link {
    NodeId u = 0;
    NodeId v = 0;
    double length_km = 0.0;
    int channels = 1;
    double eta = 1.0;
    // Derived from the graph's alpha and from eta.
    double p_gen = 1.0;
    Fidelity f0_mean{1.0};

    NodeId other(NodeId n) const { return n == u ? v : u; }
    bool touches(NodeId n) const { return n == u || n == v; }
};

struct Adjacent {
    NodeId node;
    LinkId link;
};

class NetworkGraph {
public:
    NetworkGraph() = default;

    NetworkGraph(std::vector<Node> nodes, std::vector<Link> links, double alpha)
        : nodes_(std::move(nodes)), links_(std::move(links)) {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].id != static_cast<NodeId>(i)) {
                throw std::invalid_argument("NetworkGraph: node ids must be 0..n-1 in order");
            }
        }
        adjacency_.assign(nodes_.size(), {});
        for (std::size_t i = 0; i < links_.size(); ++i) {
            auto& l = links_[i];
            if (l.u == l.v) {
                throw std::invalid_argument("NetworkGraph: self-loop on node " + std::to_string(l.u));
            }
            if (l.u < 0 || l.v < 0 || l.u >= node_count() || l.v >= node_count()) {
                throw std::invalid_argument("NetworkGraph: link endpoint out of range");
            }
            if (!(l.length_km > 0.0) || l.channels < 1) {
                throw std::invalid_argument("NetworkGraph: link needs positive length and >= 1 channel");
            }
            l.f0_mean = initial_fidelity_mean(l.eta);
            adjacency_[l.u].push_back({l.v, static_cast<LinkId>(i)});
            adjacency_[l.v].push_back({l.u, static_cast<LinkId>(i)});
        }
        for (auto& adj : adjacency_) {
            std::sort(adj.begin(), adj.end(), [](const Adjacent& a, const Adjacent& b) {
                return a.node != b.node ? a.node < b.node : a.link < b.link;
            });
        }
        set_alpha(alpha);
    }

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int link_count() const { return static_cast<int>(links_.size()); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Link>& links() const { return links_; }
    const Node& node(NodeId n) const { return nodes_.at(n); }
    const Link& link(LinkId e) const { return links_.at(e); }
    const std::vector<Adjacent>& neighbors(NodeId n) const { return adjacency_.at(n); }
    double alpha() const { return alpha_; }

    // Rewrites p_gen = exp(-alpha * length) on every link.
    void set_alpha(double alpha) {
        if (alpha < 0.0) {
            throw std::invalid_argument("NetworkGraph: alpha must be >= 0");
        }
        alpha_ = alpha;
        for (auto& l : links_) {
            l.p_gen = std::exp(-alpha_ * l.length_km);
        }
    }

    std::optional<LinkId> find_link(NodeId a, NodeId b) const {
        for (const auto& adj : neighbors(a)) {
            if (adj.node == b) return adj.link;
        }
        return std::nullopt;
    }

    // Unweighted hop distances; unreachable nodes get -1.
    std::vector<int> hop_distances(NodeId from) const {
        std::vector<int> dist(nodes_.size(), -1);
        std::queue<NodeId> frontier;
        dist[from] = 0;
        frontier.push(from);
        while (!frontier.empty()) {
            NodeId n = frontier.front();
            frontier.pop();
            for (const auto& adj : adjacency_[n]) {
                if (dist[adj.node] < 0) {
                    dist[adj.node] = dist[n] + 1;
                    frontier.push(adj.node);
                }
            }
        }
        return dist;
    }

    bool connected() const {
        if (nodes_.empty()) return true;
        auto d = hop_distances(0);
        return std::none_of(d.begin(), d.end(), [](int x) { return x < 0; });
    }

    double euclidean_km(NodeId a, NodeId b) const {
        return std::hypot(nodes_[a].x_km - nodes_[b].x_km, nodes_[a].y_km - nodes_[b].y_km);
    }

    double mean_degree() const {
        return nodes_.empty() ? 0.0 : 2.0 * static_cast<double>(links_.size()) / static_cast<double>(nodes_.size());
    }

private:
    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::vector<std::vector<Adjacent>> adjacency_;
    double alpha_ = 0.0;
};

struct WaxmanParams {
    int nodes = 100;
    double avg_degree = 6.0;
    double area_km = 100.0;
    double eta_mean = 9.5;
    double eta_sigma = 1.0;
    IntRange memory{20, 31};
    IntRange channels{6, 12};
    // Locality length of the Waxman kernel as a fraction of the square's diagonal.
    double gamma = 0.05;
    int max_retries = 20;
    double degree_tolerance = 0.5;
    double eta_floor = 0.5;
};

namespace detail {

inline std::vector<int> component_labels(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (auto [a, b] : edges) {
        parent[find(a)] = find(b);
    }
    std::vector<int> label(n);
    for (int i = 0; i < n; ++i) label[i] = find(i);
    return label;
}

} // namespace detail

// Waxman random graph. Edge (u, v) is kept when a per-pair uniform draw falls
// below beta * exp(-dist / (gamma * diag)); beta is set so the realized mean
// degree matches the request, which with shared draws is an order statistic.
inline NetworkGraph generate_waxman(const WaxmanParams& p, const RandomStream& rng) {
    if (p.nodes < 2) {
        throw std::invalid_argument("generate_waxman: need at least 2 nodes");
    }
    if (!(p.area_km > 0.0) || !(p.avg_degree > 0.0) || !(p.gamma > 0.0)) {
        throw std::invalid_argument("generate_waxman: area, degree and gamma must be positive");
    }
    if (p.memory.lo < 1 || p.memory.hi < p.memory.lo || p.channels.lo < 1 || p.channels.hi < p.channels.lo) {
        throw std::invalid_argument("generate_waxman: empty memory or channel range");
    }
    const int n = p.nodes;
    const double max_pairs = 0.5 * n * (n - 1);
    const double target_degree = std::min(p.avg_degree, static_cast<double>(n - 1));
    const auto target_edges =
        static_cast<std::size_t>(std::clamp(std::llround(target_degree * n / 2.0), 1LL, static_cast<long long>(max_pairs)));
    const double diag = p.area_km * std::sqrt(2.0);

    std::vector<Node> nodes;
    std::vector<std::pair<int, int>> edges;
    for (int attempt = 0; attempt <= p.max_retries; ++attempt) {
        RandomStream pos = rng.substream("waxman-positions", attempt);
        RandomStream draw = rng.substream("waxman-edges", attempt);
        nodes.assign(n, {});
        for (int i = 0; i < n; ++i) {
            nodes[i].id = i;
            nodes[i].x_km = pos.uniform(0.0, p.area_km);
            nodes[i].y_km = pos.uniform(0.0, p.area_km);
        }
        struct Candidate {
            double beta_needed;
            int a, b;
        };
        std::vector<Candidate> cands;
        cands.reserve(static_cast<std::size_t>(max_pairs));
        for (int a = 0; a < n; ++a) {
            for (int b = a + 1; b < n; ++b) {
                const double d = std::hypot(nodes[a].x_km - nodes[b].x_km, nodes[a].y_km - nodes[b].y_km);
                const double kernel = std::exp(-d / (p.gamma * diag));
                cands.push_back({draw.uniform() / kernel, a, b});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
            if (x.beta_needed != y.beta_needed) return x.beta_needed < y.beta_needed;
            return std::pair{x.a, x.b} < std::pair{y.a, y.b};
        });
        edges.clear();
        for (std::size_t i = 0; i < target_edges; ++i) {
            edges.emplace_back(cands[i].a, cands[i].b);
        }
        auto label = detail::component_labels(n, edges);
        if (std::all_of(label.begin(), label.end(), [&](int l) { return l == label[0]; })) {
            break;
        }
        if (attempt < p.max_retries) continue;

        // Out of retries: join components through their closest node pairs.
        for (;;) {
            label = detail::component_labels(n, edges);
            if (std::all_of(label.begin(), label.end(), [&](int l) { return l == label[0]; })) break;
            double best = std::numeric_limits<double>::infinity();
            std::pair<int, int> join{-1, -1};
            for (int a = 0; a < n; ++a) {
                for (int b = a + 1; b < n; ++b) {
                    if (label[a] == label[b]) continue;
                    const double d = std::hypot(nodes[a].x_km - nodes[b].x_km, nodes[a].y_km - nodes[b].y_km);
                    if (d < best) {
                        best = d;
                        join = {a, b};
                    }
                }
            }
            edges.push_back(join);
        }
    }

    const double realized = 2.0 * static_cast<double>(edges.size()) / n;
    if (std::abs(realized - target_degree) > p.degree_tolerance) {
        std::ostringstream msg;
        msg << "generate_waxman: realized mean degree " << realized << " misses target " << target_degree
            << " (n=" << n << ", area_km=" << p.area_km << ", gamma=" << p.gamma << ")";
        throw std::runtime_error(msg.str());
    }

    RandomStream caps = rng.substream("capacities");
    RandomStream hw = rng.substream("hardware");
    for (auto& node : nodes) {
        node.memory_qubits = caps.uniform_int(p.memory.lo, p.memory.hi);
    }
    std::sort(edges.begin(), edges.end());
    std::vector<Link> links;
    links.reserve(edges.size());
    for (auto [a, b] : edges) {
        Link l;
        l.u = a;
        l.v = b;
        l.length_km = std::max(std::hypot(nodes[a].x_km - nodes[b].x_km, nodes[a].y_km - nodes[b].y_km), 1e-6);
        l.channels = caps.uniform_int(p.channels.lo, p.channels.hi);
        // Truncated normal: redraw below the floor, clamp if that keeps failing.
        double eta = hw.normal(p.eta_mean, p.eta_sigma);
        for (int tries = 0; eta < p.eta_floor && tries < 64; ++tries) {
            eta = hw.normal(p.eta_mean, p.eta_sigma);
        }
        l.eta = std::max(eta, p.eta_floor);
        links.push_back(l);
    }
    return NetworkGraph{std::move(nodes), std::move(links), 0.0};
}

// Chooses alpha so the mean of exp(-alpha * length) over links hits target_p,
// then applies it to the graph.
inline double calibrate_alpha(NetworkGraph& g, double target_p) {
    if (!(target_p > 0.0) || target_p > 1.0) {
        throw std::invalid_argument("calibrate_alpha: target_p must be in (0, 1]");
    }
    if (g.link_count() == 0 || target_p == 1.0) {
        g.set_alpha(0.0);
        return 0.0;
    }
    auto mean_p = [&](double alpha) {
        double s = 0.0;
        for (const auto& l : g.links()) s += std::exp(-alpha * l.length_km);
        return s / g.link_count();
    };
    double lo = 0.0;
    double hi = 1.0;
    while (mean_p(hi) > target_p) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mean_p(mid) > target_p ? lo : hi) = mid;
    }
    const double alpha = 0.5 * (lo + hi);
    g.set_alpha(alpha);
    return alpha;
}

struct Request {
    NodeId source = 0;
    NodeId destination = 0;
    FidelityThreshold threshold{0.75};
};

// m distinct unordered node pairs, uniform without replacement.
inline std::vector<Request> sample_requests(const NetworkGraph& g, int m, Fidelity f_th, RandomStream& rng) {
    const long long n = g.node_count();
    if (m < 0 || n < 2 || static_cast<long long>(m) > n * (n - 1) / 2) {
        throw std::invalid_argument("sample_requests: cannot draw " + std::to_string(m) + " distinct pairs from " +
                                    std::to_string(n) + " nodes");
    }
    std::set<std::pair<NodeId, NodeId>> seen;
    std::vector<Request> out;
    out.reserve(m);
    while (static_cast<int>(out.size()) < m) {
        NodeId a = rng.uniform_int(0, static_cast<int>(n) - 1);
        NodeId b = rng.uniform_int(0, static_cast<int>(n) - 2);
        if (b >= a) ++b;
        if (!seen.insert(std::minmax(a, b)).second) continue;
        out.push_back(Request{a, b, FidelityThreshold{f_th}});
    }
    return out;
}

} // namespace qguard

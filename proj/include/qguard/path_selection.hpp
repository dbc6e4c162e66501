// Contention-free path selection: scorers, the extended Dijkstra search over
// non-additive monotone metrics, and greedy major/recovery path reservation.
#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qguard/path_metrics.hpp"
#include "qguard/purification.hpp"
#include "qguard/topology.hpp"

namespace qguard {

struct PathCandidate {
    std::vector<NodeId> nodes;  // nodes.size() == hops.size() + 1
    std::vector<LinkId> hops;
    int width = 0;
    std::vector<double> probs;
    double score = 0.0;

    int length() const { return static_cast<int>(hops.size()); }
    NodeId source() const { return nodes.front(); }
    NodeId destination() const { return nodes.back(); }
};

enum class PathRole { Major, Recovery };

struct PathReservation {
    ReservationId id = 0;
    PathCandidate path;
    PathRole role = PathRole::Major;
    int request = 0;
    // First reserved channel index on each hop's link.
    std::vector<int> channel_offset;
    // Recovery only: the covered major and its node span [seg_begin, seg_end].
    ReservationId major = -1;
    int seg_begin = 0;
    int seg_end = 0;

    int segment_length() const { return seg_end - seg_begin; }
    HopRef hop_ref(int i) const { return HopRef{path.hops[i], id}; }
};

// Topology with previously reserved channels and memory removed.
class ResidualGraph {
public:
    explicit ResidualGraph(const NetworkGraph& g) : g_(&g), channels_(g.link_count()), memory_(g.node_count()) {
        for (LinkId e = 0; e < g.link_count(); ++e) channels_[e] = g.link(e).channels;
        for (NodeId n = 0; n < g.node_count(); ++n) memory_[n] = g.node(n).memory_qubits;
    }

    const NetworkGraph& graph() const { return *g_; }
    int channels(LinkId e) const { return channels_[e]; }
    int memory(NodeId n) const { return memory_[n]; }
    int used_channels(LinkId e) const { return g_->link(e).channels - channels_[e]; }

    // Largest width the residual allows for this node/hop sequence.
    int max_width(std::span<const NodeId> nodes, std::span<const LinkId> hops) const {
        if (hops.empty()) return 0;
        int w = std::min(memory_[nodes.front()], memory_[nodes.back()]);
        for (std::size_t i = 1; i + 1 < nodes.size(); ++i) w = std::min(w, memory_[nodes[i]] / 2);
        for (LinkId e : hops) w = std::min(w, channels_[e]);
        return std::max(w, 0);
    }

    // Each channel takes one memory qubit at both ends of its hop.
    std::vector<int> reserve(const PathCandidate& c) {
        if (c.width < 1 || c.width > max_width(c.nodes, c.hops)) {
            throw std::logic_error("ResidualGraph: reservation exceeds residual capacity");
        }
        std::vector<int> offsets;
        offsets.reserve(c.hops.size());
        for (std::size_t i = 0; i < c.hops.size(); ++i) {
            const LinkId e = c.hops[i];
            offsets.push_back(used_channels(e));
            channels_[e] -= c.width;
            memory_[c.nodes[i]] -= c.width;
            memory_[c.nodes[i + 1]] -= c.width;
        }
        return offsets;
    }

private:
    const NetworkGraph* g_;
    std::vector<int> channels_;
    std::vector<int> memory_;
};

template <class S>
concept PathScorer = requires(const S s, std::span<const LinkId> hops, int width, Fidelity f_th) {
    { s(hops, width, f_th) } -> std::convertible_to<double>;
    { S::width_monotone } -> std::convertible_to<bool>;
};

// Per-link binomial tables, filled on demand.
class HopDistCache {
public:
    explicit HopDistCache(const NetworkGraph& g) : g_(&g), dists_(g.link_count()) {}

    const CountDist& get(LinkId e, int width) const {
        auto& per_width = dists_[e];
        if (static_cast<int>(per_width.size()) <= width) per_width.resize(width + 1);
        auto& d = per_width[width];
        if (d.empty()) d = hop_success_dist(width, g_->link(e).p_gen);
        return d;
    }

    const NetworkGraph& graph() const { return *g_; }

private:
    const NetworkGraph* g_;
    mutable std::vector<std::vector<CountDist>> dists_;
};

// EXT over realized link probabilities.
class ExtScorer {
public:
    static constexpr bool width_monotone = true;

    ExtScorer(const NetworkGraph& g, double q) : cache_(g), q_(q) {}

    double operator()(std::span<const LinkId> hops, int width, Fidelity) const {
        scratch_.clear();
        for (LinkId e : hops) scratch_.push_back(cache_.get(e, width));
        return std::pow(q_, static_cast<double>(hops.size() - 1)) * expected_count(bottleneck_dist(scratch_));
    }

private:
    HopDistCache cache_;
    double q_;
    mutable std::vector<CountDist> scratch_;
};

// Purification-aware score from noise-free predicted link fidelities.
class FpScorer {
public:
    static constexpr bool width_monotone = true;

    FpScorer(const NetworkGraph& g, double q, RoundsCap cap) : cache_(g), q_(q), cap_(cap), ladders_(g.link_count()) {
        for (LinkId e = 0; e < g.link_count(); ++e) ladders_[e] = purification_ladder(g.link(e).f0_mean, cap.r_max);
    }

    double operator()(std::span<const LinkId> hops, int width, Fidelity f_th) const {
        const int len = static_cast<int>(hops.size());
        const Fidelity target = equal_split_target(f_th, len);
        costs_.clear();
        int purified_width = width;
        bool all_free = true;
        for (LinkId e : hops) {
            const auto& ladder = ladders_[e];
            auto it = std::find_if(ladder.begin(), ladder.end(), [&](Fidelity f) { return f >= target; });
            if (it == ladder.end()) return 0.0;
            const int c = raw_pairs_for(static_cast<int>(it - ladder.begin()));
            costs_.push_back(c);
            all_free = all_free && c == 1;
            purified_width = std::min(purified_width, width / c);
        }
        if (purified_width == 0) return 0.0;
        scratch_.clear();
        for (int k = 0; k < len; ++k) {
            const CountDist& raw = cache_.get(hops[k], width);
            if (all_free) {
                scratch_.push_back(raw);
                continue;
            }
            CountDist d(purified_width + 1, 0.0);
            for (int j = 0; j <= width; ++j) d[std::min(j / costs_[k], purified_width)] += raw[j];
            scratch_.push_back(std::move(d));
        }
        return std::pow(q_, static_cast<double>(len - 1)) * expected_count(bottleneck_dist(scratch_));
    }

private:
    HopDistCache cache_;
    double q_;
    RoundsCap cap_;
    std::vector<std::vector<Fidelity>> ladders_;
    mutable std::vector<int> costs_;
    mutable std::vector<CountDist> scratch_;
};

struct SearchLimits {
    std::vector<bool> excluded_links;  // empty means none
    std::vector<bool> excluded_nodes;  // interior nodes only; endpoints always allowed
    int max_width = 1 << 20;
    int max_hops = 1 << 20;
};

namespace detail {

// Order on equal-score candidates: fewer hops, then lexicographic node ids.
inline bool tie_preferred(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

inline bool better_candidate(const PathCandidate& a, const PathCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return tie_preferred(a.nodes, b.nodes);
}

} // namespace detail

// Best-first search that keeps one label per node, as in Dijkstra, using a
// path score that never increases when a path is extended. Width for each
// partial path is the largest residual width that maximizes the score.
template <PathScorer Scorer>
std::optional<PathCandidate> extended_dijkstra(const ResidualGraph& res, NodeId s, NodeId d, const Scorer& scorer,
                                               Fidelity f_th, const SearchLimits& limits = {}) {
    const NetworkGraph& g = res.graph();
    if (s == d) throw std::invalid_argument("extended_dijkstra: source equals destination");
    if (res.memory(s) < 1 || res.memory(d) < 1) return std::nullopt;

    struct Label {
        double score = -1.0;
        int width = 0;
        NodeId parent = -1;
        LinkId via = -1;
        int hops = 0;
        bool settled = false;
    };
    std::vector<Label> label(g.node_count());
    auto path_nodes = [&](NodeId n) {
        std::vector<NodeId> out;
        for (NodeId x = n; x != -1; x = label[x].parent) out.push_back(x);
        std::reverse(out.begin(), out.end());
        return out;
    };
    auto path_hops = [&](NodeId n) {
        std::vector<LinkId> out;
        for (NodeId x = n; label[x].parent != -1; x = label[x].parent) out.push_back(label[x].via);
        std::reverse(out.begin(), out.end());
        return out;
    };

    struct Entry {
        double score;
        int hops;
        NodeId node;
        bool operator<(const Entry& o) const {
            if (score != o.score) return score < o.score;
            if (hops != o.hops) return hops > o.hops;
            return node > o.node;
        }
    };
    std::priority_queue<Entry> frontier;
    label[s].score = std::numeric_limits<double>::infinity();
    label[s].width = std::numeric_limits<int>::max();
    frontier.push({label[s].score, 0, s});

    std::vector<NodeId> nodes;
    std::vector<LinkId> hops;
    while (!frontier.empty()) {
        const Entry top = frontier.top();
        frontier.pop();
        Label& cur = label[top.node];
        if (cur.settled || top.score != cur.score || top.hops != cur.hops) continue;
        cur.settled = true;
        if (top.node == d) break;
        if (cur.hops >= limits.max_hops) continue;

        const auto base_nodes = path_nodes(top.node);
        const auto base_hops = path_hops(top.node);
        for (const auto& adj : g.neighbors(top.node)) {
            const NodeId v = adj.node;
            if (label[v].settled) continue;
            if (!limits.excluded_links.empty() && limits.excluded_links[adj.link]) continue;
            if (v != d && !limits.excluded_nodes.empty() && limits.excluded_nodes[v]) continue;
            if (res.channels(adj.link) < 1) continue;

            nodes = base_nodes;
            nodes.push_back(v);
            hops = base_hops;
            hops.push_back(adj.link);
            // v will be an interior node unless it is the destination.
            int cap = res.max_width(nodes, hops);
            if (v != d) cap = std::min(cap, res.memory(v) / 2);
            cap = std::min(cap, limits.max_width);
            double best = 0.0;
            int best_w = 0;
            for (int w = cap; w >= 1; --w) {
                const double sc = scorer(std::span<const LinkId>{hops}, w, f_th);
                if (sc > best) {
                    best = sc;
                    best_w = w;
                }
                if constexpr (Scorer::width_monotone) break;
            }
            if (best_w == 0 || !(best > 0.0)) continue;

            Label& lv = label[v];
            bool take = best > lv.score;
            if (!take && best == lv.score) take = detail::tie_preferred(nodes, path_nodes(v));
            if (take) {
                lv.score = best;
                lv.width = best_w;
                lv.parent = top.node;
                lv.via = adj.link;
                lv.hops = cur.hops + 1;
                frontier.push({lv.score, lv.hops, v});
            }
        }
    }
    if (!label[d].settled || label[d].parent == -1) return std::nullopt;

    PathCandidate c;
    c.nodes = path_nodes(d);
    c.hops = path_hops(d);
    c.width = label[d].width;
    c.score = label[d].score;
    for (LinkId e : c.hops) c.probs.push_back(g.link(e).p_gen);
    return c;
}

struct MajorSelection {
    std::vector<PathReservation> reservations;
};

namespace detail {

inline bool shares_resources(const PathCandidate& a, const PathCandidate& b) {
    for (NodeId x : a.nodes) {
        if (std::find(b.nodes.begin(), b.nodes.end(), x) != b.nodes.end()) return true;
    }
    return false;  // sharing a link implies sharing its endpoints
}

} // namespace detail

// Greedy contention-free major paths: each round finds every request's best
// path in the residual, reserves the best overall, and repeats until no
// request has a positive-score path. Cached searches are reused while the
// resources on their path are untouched.
template <PathScorer Scorer>
std::vector<PathReservation> select_major_paths(ResidualGraph& res, std::span<const Request> requests,
                                                const Scorer& scorer, ReservationId first_id = 0) {
    std::vector<PathReservation> out;
    std::vector<std::optional<PathCandidate>> best(requests.size());
    std::vector<bool> fresh(requests.size(), false);
    for (;;) {
        for (std::size_t r = 0; r < requests.size(); ++r) {
            if (fresh[r]) continue;
            best[r] = extended_dijkstra(res, requests[r].source, requests[r].destination, scorer,
                                        requests[r].threshold.f_th);
            fresh[r] = true;
        }
        std::optional<std::size_t> pick;
        for (std::size_t r = 0; r < requests.size(); ++r) {
            if (!best[r]) continue;
            if (!pick || detail::better_candidate(*best[r], *best[*pick])) pick = r;
        }
        if (!pick) break;
        const PathCandidate chosen = *best[*pick];
        PathReservation rsv;
        rsv.id = first_id + static_cast<ReservationId>(out.size());
        rsv.path = chosen;
        rsv.role = PathRole::Major;
        rsv.request = static_cast<int>(*pick);
        rsv.channel_offset = res.reserve(chosen);
        out.push_back(std::move(rsv));
        for (std::size_t r = 0; r < requests.size(); ++r) {
            if (best[r] && detail::shares_resources(*best[r], chosen)) fresh[r] = false;
        }
    }
    return out;
}

struct RecoveryOptions {
    int k = 3;
    // Longest detour considered; by default a detour stays inside the k-hop
    // view of the node where it starts.
    std::optional<int> max_detour_hops;
};

// Recovery detours for every major segment [i, j] with 1 <= j - i <= k.
// Detours avoid the major's own links and interior nodes, never reuse a link
// already taken by another detour of the same segment, and are no wider than
// the major. Reserved greedily in descending score while resources last.
template <PathScorer Scorer>
std::vector<PathReservation> select_recovery_paths(ResidualGraph& res, std::span<const PathReservation> majors,
                                                   std::span<const Request> requests, const Scorer& scorer,
                                                   const RecoveryOptions& opt, ReservationId first_id) {
    if (opt.k < 1) throw std::invalid_argument("select_recovery_paths: k must be >= 1");
    const NetworkGraph& g = res.graph();
    const int max_hops = opt.max_detour_hops.value_or(opt.k + 1);

    struct Segment {
        std::size_t major;
        int i, j;
        std::vector<bool> excluded_links;
        std::vector<bool> excluded_nodes;
        std::optional<PathCandidate> best;
        bool fresh = false;
    };
    std::vector<Segment> segs;
    for (std::size_t m = 0; m < majors.size(); ++m) {
        const auto& path = majors[m].path;
        for (int i = 0; i < path.length(); ++i) {
            for (int j = i + 1; j <= std::min(i + opt.k, path.length()); ++j) {
                Segment s{m, i, j, std::vector<bool>(g.link_count(), false), std::vector<bool>(g.node_count(), false),
                          std::nullopt, false};
                for (LinkId e : path.hops) s.excluded_links[e] = true;
                for (NodeId n : path.nodes) s.excluded_nodes[n] = true;
                segs.push_back(std::move(s));
            }
        }
    }

    std::vector<PathReservation> out;
    for (;;) {
        for (auto& s : segs) {
            if (s.fresh) continue;
            const auto& major = majors[s.major];
            SearchLimits lim{s.excluded_links, s.excluded_nodes, major.path.width, max_hops};
            s.best = extended_dijkstra(res, major.path.nodes[s.i], major.path.nodes[s.j], scorer,
                                       requests[major.request].threshold.f_th, lim);
            s.fresh = true;
        }
        std::optional<std::size_t> pick;
        for (std::size_t x = 0; x < segs.size(); ++x) {
            if (!segs[x].best) continue;
            if (!pick || detail::better_candidate(*segs[x].best, *segs[*pick].best)) pick = x;
        }
        if (!pick) break;
        Segment& s = segs[*pick];
        const PathCandidate chosen = *s.best;
        PathReservation rsv;
        rsv.id = first_id + static_cast<ReservationId>(out.size());
        rsv.path = chosen;
        rsv.role = PathRole::Recovery;
        rsv.request = majors[s.major].request;
        rsv.major = majors[s.major].id;
        rsv.seg_begin = s.i;
        rsv.seg_end = s.j;
        rsv.channel_offset = res.reserve(chosen);
        out.push_back(std::move(rsv));
        for (LinkId e : chosen.hops) s.excluded_links[e] = true;
        s.fresh = false;
        for (auto& other : segs) {
            if (other.best && detail::shares_resources(*other.best, chosen)) other.fresh = false;
        }
    }
    return out;
}

} // namespace qguard

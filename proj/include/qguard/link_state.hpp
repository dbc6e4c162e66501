// Realized link outcomes and the k-hop local views nodes plan from.
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qguard/topology.hpp"
#include "qguard/types.hpp"

namespace qguard {

// Realized pair fidelities for every reserved hop after generation.
using LinkOutcomes = std::map<HopRef, std::vector<Fidelity>>;

// What one node knows after the k-hop exchange. A link (u, v) is visible iff
// min(dist(owner, u), dist(owner, v)) <= k.
class LinkStateView {
public:
    LinkStateView() = default;
    LinkStateView(NodeId owner, int k, std::vector<bool> visible) : owner_(owner), k_(k), visible_(std::move(visible)) {}

    NodeId owner() const { return owner_; }
    int k() const { return k_; }

    bool sees(LinkId e) const { return e >= 0 && e < static_cast<LinkId>(visible_.size()) && visible_[e]; }

    void record(HopRef hop, std::vector<Fidelity> pairs) {
        require(hop.link);
        pairs_[hop] = std::move(pairs);
    }

    // Realized fidelities on a reserved hop; empty when nothing was generated.
    // Asking about an invisible link is a locality breach.
    const std::vector<Fidelity>& pairs(HopRef hop) const {
        require(hop.link);
        static const std::vector<Fidelity> none;
        auto it = pairs_.find(hop);
        return it == pairs_.end() ? none : it->second;
    }

    int pair_count(HopRef hop) const { return static_cast<int>(pairs(hop).size()); }

    std::optional<Fidelity> best(HopRef hop) const {
        const auto& p = pairs(hop);
        if (p.empty()) return std::nullopt;
        return *std::max_element(p.begin(), p.end());
    }

    const std::map<HopRef, std::vector<Fidelity>>& entries() const { return pairs_; }

private:
    void require(LinkId e) const {
        if (!sees(e)) {
            throw std::out_of_range("LinkStateView: node " + std::to_string(owner_) + " cannot see link " +
                                    std::to_string(e) + " within k=" + std::to_string(k_));
        }
    }

    NodeId owner_ = 0;
    int k_ = 0;
    std::vector<bool> visible_;
    std::map<HopRef, std::vector<Fidelity>> pairs_;
};

inline std::vector<bool> visible_links(const NetworkGraph& g, NodeId owner, int k) {
    const auto dist = g.hop_distances(owner);
    std::vector<bool> vis(g.link_count(), false);
    for (LinkId e = 0; e < g.link_count(); ++e) {
        const auto& l = g.link(e);
        const int du = dist[l.u] < 0 ? k + 1 : dist[l.u];
        const int dv = dist[l.v] < 0 ? k + 1 : dist[l.v];
        vis[e] = std::min(du, dv) <= k;
    }
    return vis;
}

inline LinkStateView build_view(const NetworkGraph& g, const LinkOutcomes& outcomes, NodeId owner, int k) {
    LinkStateView view{owner, k, visible_links(g, owner, k)};
    for (const auto& [hop, pairs] : outcomes) {
        if (view.sees(hop.link)) view.record(hop, pairs);
    }
    return view;
}

inline std::vector<LinkStateView> build_k_hop_views(const NetworkGraph& g, const LinkOutcomes& outcomes, int k) {
    if (k < 0) throw std::invalid_argument("build_k_hop_views: k must be >= 0");
    std::vector<LinkStateView> views;
    views.reserve(g.node_count());
    for (NodeId n = 0; n < g.node_count(); ++n) {
        views.push_back(build_view(g, outcomes, n, k));
    }
    return views;
}

} // namespace qguard

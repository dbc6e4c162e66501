// Post-generation recovery planning: per-hop fidelity targets (equal and
// hardware-weighted split), purification spans scored by expected goodput,
// detour selection and route assembly.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "qguard/link_state.hpp"
#include "qguard/path_selection.hpp"
#include "qguard/purification.hpp"
#include "qguard/topology.hpp"
#include "qguard/werner.hpp"

namespace qguard {

inline std::vector<Fidelity> plan_targets_equal_split(int route_length, Fidelity f_th) {
    return std::vector<Fidelity>(route_length, equal_split_target(f_th, route_length));
}

// Greedy effort distribution over hops with known hardware quality.
// Starts from the smallest uniform round count R meeting the Werner budget and
// removes rounds where they buy the least Werner parameter. Hops that are
// indistinguishable (same marginal loss) are decremented together, so equal
// hardware keeps a uniform allocation. nullopt when no R <= R_max works or
// 2^R exceeds the width.
inline std::optional<std::vector<int>> plan_targets_ws(std::span<const double> etas, WernerParam budget, int width,
                                                       RoundsCap cap) {
    const std::size_t n = etas.size();
    if (n == 0) throw std::invalid_argument("plan_targets_ws: empty hop list");
    std::vector<std::vector<double>> w(n);
    for (std::size_t e = 0; e < n; ++e) {
        for (Fidelity f : purification_ladder(initial_fidelity_mean(etas[e]), cap.r_max)) {
            w[e].push_back(fidelity_to_werner(f).value());
        }
    }
    auto product = [&](const std::vector<int>& r) {
        double p = 1.0;
        for (std::size_t e = 0; e < n; ++e) p *= w[e][r[e]];
        return p;
    };

    std::optional<int> uniform;
    for (int r = 0; r <= cap.r_max; ++r) {
        if (product(std::vector<int>(n, r)) >= budget.value()) {
            uniform = r;
            break;
        }
    }
    if (!uniform || raw_pairs_for(*uniform) > width) return std::nullopt;

    std::vector<int> rounds(n, *uniform);
    for (;;) {
        std::vector<std::size_t> order;
        for (std::size_t e = 0; e < n; ++e) {
            if (rounds[e] > 0) order.push_back(e);
        }
        auto loss = [&](std::size_t e) { return w[e][rounds[e]] - w[e][rounds[e] - 1]; };
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return loss(a) < loss(b); });
        bool moved = false;
        for (std::size_t g = 0; g < order.size() && !moved;) {
            std::size_t end = g + 1;
            while (end < order.size() && loss(order[end]) == loss(order[g])) ++end;
            auto trial = rounds;
            for (std::size_t x = g; x < end; ++x) --trial[order[x]];
            if (product(trial) >= budget.value()) {
                rounds = std::move(trial);
                moved = true;
            }
            g = end;
        }
        if (!moved) break;
    }
    return rounds;
}

// Per-hop fidelity targets from a weighted allocation: the Werner budget is
// shared in proportion to each hop's predicted post-purification
// depolarization, so the targets multiply out to exactly the budget. Equal
// depolarization falls back to the equal split.
inline std::optional<std::vector<Fidelity>> ws_hop_targets(std::span<const double> etas, WernerParam budget, int width,
                                                           RoundsCap cap) {
    const auto rounds = plan_targets_ws(etas, budget, width, cap);
    if (!rounds) return std::nullopt;
    const std::size_t n = etas.size();
    std::vector<double> depol(n);
    double total = 0.0;
    for (std::size_t e = 0; e < n; ++e) {
        const Fidelity f = purification_ladder(initial_fidelity_mean(etas[e]), (*rounds)[e]).back();
        depol[e] = -std::log(std::max(fidelity_to_werner(f).value(), 1e-300));
        total += depol[e];
    }
    const bool uniform = std::all_of(depol.begin(), depol.end(), [&](double d) { return d == depol[0]; });
    if (uniform || !(total > 0.0)) {
        return std::vector<Fidelity>(n, detour_targets(budget, static_cast<int>(n)));
    }
    std::vector<Fidelity> out;
    out.reserve(n);
    for (double d : depol) out.push_back(werner_to_fidelity(WernerParam{std::pow(budget.value(), d / total)}));
    return out;
}

// Werner budget of a major-path segment weighted by summed 1/eta.
inline WernerParam ws_segment_budget(std::span<const double> major_etas, int seg_begin, int seg_end,
                                     WernerParam w_th) {
    const int total_hops = static_cast<int>(major_etas.size());
    if (seg_begin < 0 || seg_end > total_hops || seg_begin > seg_end) {
        throw std::invalid_argument("ws_segment_budget: segment outside the major path");
    }
    if (std::all_of(major_etas.begin(), major_etas.end(), [&](double e) { return e == major_etas[0]; })) {
        return segment_budget(w_th, seg_end - seg_begin, total_hops);
    }
    double d_seg = 0.0;
    double d_total = 0.0;
    for (int e = 0; e < total_hops; ++e) {
        d_total += 1.0 / major_etas[e];
        if (e >= seg_begin && e < seg_end) d_seg += 1.0 / major_etas[e];
    }
    return WernerParam{std::pow(w_th.value(), d_seg / d_total)};
}

// A purification plan over a run of hops.
struct SpanPlan {
    std::vector<HopRef> hops;
    std::vector<Fidelity> targets;
    std::vector<Rounds> rounds;
    std::vector<int> available;  // realized pairs per hop
    int width = 1;
    int swaps = 0;

    bool hop_feasible(std::size_t i) const {
        if (!rounds[i] || available[i] == 0) return false;
        // A single pair cannot be purified at all.
        return *rounds[i] == 0 || available[i] >= 2;
    }
};

inline SpanPlan make_span_plan(const LinkStateView& view, std::span<const HopRef> hops, std::span<const Fidelity> targets,
                               int width, RoundsCap cap) {
    if (hops.size() != targets.size() || hops.empty()) {
        throw std::invalid_argument("make_span_plan: need one target per hop");
    }
    std::vector<HopTarget> wanted;
    for (std::size_t i = 0; i < hops.size(); ++i) wanted.push_back({hops[i], targets[i]});
    SpanPlan plan;
    plan.hops.assign(hops.begin(), hops.end());
    plan.targets.assign(targets.begin(), targets.end());
    plan.width = width;
    plan.swaps = static_cast<int>(hops.size()) - 1;
    for (const auto& entry : build_cost_table(view, wanted, cap)) {
        plan.rounds.push_back(entry.rounds);
        plan.available.push_back(entry.available_pairs);
    }
    return plan;
}

// min over hops of min(1, realized / 2^r). Unreachable hops count as zero.
inline double availability_factor(const SpanPlan& span, const LinkStateView& view) {
    double a = 1.0;
    for (std::size_t i = 0; i < span.hops.size(); ++i) {
        const int n = view.pair_count(span.hops[i]);
        if (!span.rounds[i]) return 0.0;
        a = std::min(a, std::min(1.0, static_cast<double>(n) / raw_pairs_for(*span.rounds[i])));
    }
    return a;
}

// Expected goodput W q^S / (1 + sum(2^r - 1)) * A. nullopt marks an excluded
// span: unreachable target, more raw pairs than width, nothing available, or
// a hop needing purification with a single pair.
inline std::optional<double> exg(const SpanPlan& span, double q, double availability) {
    if (!(availability > 0.0)) return std::nullopt;
    double overhead = 1.0;
    for (std::size_t i = 0; i < span.rounds.size(); ++i) {
        if (!span.rounds[i]) return std::nullopt;
        const int raw = raw_pairs_for(*span.rounds[i]);
        if (raw > span.width) return std::nullopt;
        if (i < span.available.size() && !span.hop_feasible(i)) return std::nullopt;
        overhead += raw - 1;
    }
    return span.width * std::pow(q, span.swaps) / overhead * availability;
}

enum class TargetRule { EqualSplit, Weighted };

inline std::vector<double> hop_etas(const NetworkGraph& g, const PathCandidate& p) {
    std::vector<double> etas;
    for (LinkId e : p.hops) etas.push_back(g.link(e).eta);
    return etas;
}

// Targets for the hops of a major path that stay on the route.
inline std::vector<Fidelity> major_targets(const NetworkGraph& g, const PathReservation& major, Fidelity f_th,
                                           TargetRule rule, RoundsCap cap) {
    const int len = major.path.length();
    if (rule == TargetRule::Weighted) {
        const auto etas = hop_etas(g, major.path);
        const auto w_th = fidelity_to_werner(f_th);
        auto ws = plan_targets_ws(etas, w_th, major.path.width, cap);
        if (ws && std::all_of(ws->begin(), ws->end(), [&](int r) { return r == (*ws)[0]; }) &&
            std::all_of(etas.begin(), etas.end(), [&](double e) { return e == etas[0]; })) {
            return plan_targets_equal_split(len, f_th);
        }
        if (auto t = ws_hop_targets(etas, w_th, major.path.width, cap)) return *t;
    }
    return plan_targets_equal_split(len, f_th);
}

// Werner budget a detour inherits from the segment it replaces.
inline WernerParam detour_budget(const NetworkGraph& g, const PathReservation& major, int seg_begin, int seg_end,
                                 Fidelity f_th, TargetRule rule) {
    const auto w_th = fidelity_to_werner(f_th);
    if (rule == TargetRule::Weighted) {
        return ws_segment_budget(hop_etas(g, major.path), seg_begin, seg_end, w_th);
    }
    return segment_budget(w_th, seg_end - seg_begin, major.path.length());
}

inline std::vector<Fidelity> detour_hop_targets(const NetworkGraph& g, const PathReservation& detour, WernerParam budget,
                                                TargetRule rule, RoundsCap cap) {
    const int len = detour.path.length();
    if (rule == TargetRule::Weighted) {
        if (auto t = ws_hop_targets(hop_etas(g, detour.path), budget, detour.path.width, cap)) return *t;
    }
    return std::vector<Fidelity>(len, detour_targets(budget, len));
}

struct RecoveryChoice {
    const PathReservation* detour = nullptr;
    SpanPlan plan;
    double score = 0.0;
};

// Each candidate is judged from the view of the node where it leaves the major path.
using ViewSource = std::function<const LinkStateView&(NodeId)>;

inline bool fully_visible(const PathReservation& r, const LinkStateView& view) {
    return std::all_of(r.path.hops.begin(), r.path.hops.end(), [&](LinkId e) { return view.sees(e); });
}

namespace detail {

inline bool detour_preferred(const PathReservation& a, const PathReservation& b) {
    return tie_preferred(a.path.nodes, b.path.nodes);
}

} // namespace detail

// Highest-EXG feasible detour among the candidates, or nullopt.
inline std::optional<RecoveryChoice> select_recovery(const NetworkGraph& g, const PathReservation& major,
                                                     std::span<const PathReservation* const> candidates, Fidelity f_th,
                                                     TargetRule rule, const ViewSource& views, RoundsCap cap,
                                                     double q) {
    std::optional<RecoveryChoice> best;
    for (const PathReservation* cand : candidates) {
        const LinkStateView& view = views(cand->path.source());
        if (!fully_visible(*cand, view)) continue;
        const WernerParam budget = detour_budget(g, major, cand->seg_begin, cand->seg_end, f_th, rule);
        const auto targets = detour_hop_targets(g, *cand, budget, rule, cap);
        std::vector<HopRef> hops;
        for (int i = 0; i < cand->path.length(); ++i) hops.push_back(cand->hop_ref(i));
        SpanPlan plan = make_span_plan(view, hops, targets, cand->path.width, cap);
        const auto score = exg(plan, q, availability_factor(plan, view));
        if (!score) continue;
        if (!best || *score > best->score ||
            (*score == best->score && detail::detour_preferred(*cand, *best->detour))) {
            best = RecoveryChoice{cand, std::move(plan), *score};
        }
    }
    return best;
}

// Shortest detour whose every hop produced at least one pair; no fidelity check.
inline const PathReservation* qcast_recovery(std::span<const PathReservation* const> candidates,
                                             const ViewSource& views) {
    const PathReservation* best = nullptr;
    for (const PathReservation* cand : candidates) {
        const LinkStateView& view = views(cand->path.source());
        if (!fully_visible(*cand, view)) continue;
        bool alive = true;
        for (int i = 0; i < cand->path.length() && alive; ++i) alive = view.pair_count(cand->hop_ref(i)) > 0;
        if (!alive) continue;
        if (!best || detail::detour_preferred(*cand, *best)) best = cand;
    }
    return best;
}

struct RouteHop {
    HopRef hop;
    Fidelity target;
};

struct AssembledRoute {
    int request = 0;
    ReservationId major = 0;
    std::vector<NodeId> nodes;
    std::vector<RouteHop> hops;
};

struct SegmentChoice {
    const PathReservation* detour = nullptr;
    std::vector<Fidelity> targets;  // one per detour hop
};

// Splices detours into the major path. Intact hops keep `intact_targets`.
// nullopt when a failed hop is left uncovered.
inline std::optional<AssembledRoute> assemble_route(const PathReservation& major, const std::set<int>& failed_hops,
                                                    std::span<const SegmentChoice> choices,
                                                    std::span<const Fidelity> intact_targets) {
    const int len = major.path.length();
    if (static_cast<int>(intact_targets.size()) != len) {
        throw std::invalid_argument("assemble_route: need one target per major hop");
    }
    std::vector<const SegmentChoice*> starting_at(len + 1, nullptr);
    std::vector<bool> replaced(len, false);
    for (const auto& c : choices) {
        if (c.detour->major != major.id || c.detour->role != PathRole::Recovery) {
            throw std::invalid_argument("assemble_route: choice is not a detour of this major path");
        }
        if (static_cast<int>(c.targets.size()) != c.detour->path.length()) {
            throw std::invalid_argument("assemble_route: need one target per detour hop");
        }
        for (int h = c.detour->seg_begin; h < c.detour->seg_end; ++h) {
            if (replaced[h]) throw std::invalid_argument("assemble_route: overlapping detours");
            replaced[h] = true;
        }
        starting_at[c.detour->seg_begin] = &c;
    }
    for (int h : failed_hops) {
        if (h < 0 || h >= len || !replaced[h]) return std::nullopt;
    }

    AssembledRoute route;
    route.request = major.request;
    route.major = major.id;
    route.nodes.push_back(major.path.nodes.front());
    for (int h = 0; h < len;) {
        if (const SegmentChoice* c = starting_at[h]) {
            const auto& d = *c->detour;
            for (int i = 0; i < d.path.length(); ++i) {
                route.hops.push_back({d.hop_ref(i), c->targets[i]});
                route.nodes.push_back(d.path.nodes[i + 1]);
            }
            h = d.seg_end;
        } else {
            route.hops.push_back({major.hop_ref(h), intact_targets[h]});
            route.nodes.push_back(major.path.nodes[h + 1]);
            ++h;
        }
    }
    return route;
}

} // namespace qguard

// Helpers shared by the unit and acceptance tests.
#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "qguard/qguard.hpp"

namespace qguard::testing {

struct LinkSpec {
    NodeId u;
    NodeId v;
    double p = 1.0;       // generation success probability
    double f0 = 0.925;    // mean initial fidelity
    int channels = 8;
};

// eta whose mean initial fidelity is f0.
inline double eta_for(double f0) {
    if (f0 >= 1.0) return 1e300;
    return -1.0 / std::log((f0 - 0.25) / 0.75);
}

// Graph with alpha = 1 and lengths chosen so that p_gen matches each spec.
inline NetworkGraph make_graph(int nodes, const std::vector<LinkSpec>& specs, int memory = 64) {
    std::vector<Node> ns;
    for (int i = 0; i < nodes; ++i) ns.push_back(Node{i, static_cast<double>(i), 0.0, memory});
    std::vector<Link> ls;
    for (const auto& s : specs) {
        Link l;
        l.u = s.u;
        l.v = s.v;
        l.length_km = s.p >= 1.0 ? 1e-300 : -std::log(s.p);
        l.channels = s.channels;
        l.eta = eta_for(s.f0);
        ls.push_back(l);
    }
    return NetworkGraph{std::move(ns), std::move(ls), 1.0};
}

inline PathCandidate candidate(const NetworkGraph& g, std::vector<NodeId> nodes, int width) {
    PathCandidate c;
    c.nodes = std::move(nodes);
    for (std::size_t i = 0; i + 1 < c.nodes.size(); ++i) {
        c.hops.push_back(*g.find_link(c.nodes[i], c.nodes[i + 1]));
        c.probs.push_back(g.link(c.hops.back()).p_gen);
    }
    c.width = width;
    return c;
}

inline std::vector<Fidelity> fids(std::initializer_list<double> vs) {
    std::vector<Fidelity> out;
    for (double v : vs) out.push_back(Fidelity{v});
    return out;
}

// The illustrative recovery instance: major S-C-E-G-J-D (L = 5), detours via
// A, B, H (2 hops) and F-I (3 hops), E-G failed, F_th = 0.8.
struct DetourExample {
    enum : NodeId { S, C, E, G, J, D, A, B, H, F, I, Count };

    NetworkGraph g;
    PathPlan plan;
    LinkOutcomes outcomes;
    Fidelity f_th{0.8};

    const PathReservation& major() const { return plan.reservations[0]; }
    const PathReservation& via_h() const { return plan.reservations[3]; }
    const PathReservation& via_fi() const { return plan.reservations[4]; }

    std::vector<const PathReservation*> candidates() const { return {&via_h(), &via_fi()}; }

    // Intact major hops carry perfect pairs so the delivered pair isolates
    // the repaired segment's contribution.
    explicit DetourExample(double intact_fidelity = 1.0) {
        std::vector<LinkSpec> specs;
        for (auto [u, v] : std::vector<std::pair<NodeId, NodeId>>{
                 {S, C}, {C, E}, {E, G}, {G, J}, {J, D}, {S, A}, {A, C}, {J, B}, {B, D}, {E, H}, {H, J}, {E, F}, {F, I}, {I, J}}) {
            specs.push_back({u, v, 0.9, 0.95, 6});
        }
        g = make_graph(Count, specs, 32);

        auto add = [&](std::vector<NodeId> nodes, PathRole role, int seg_begin, int seg_end) {
            PathReservation r;
            r.id = static_cast<ReservationId>(plan.reservations.size());
            r.path = candidate(g, std::move(nodes), 3);
            r.role = role;
            r.request = 0;
            r.channel_offset.assign(r.path.hops.size(), 0);
            if (role == PathRole::Recovery) {
                r.major = 0;
                r.seg_begin = seg_begin;
                r.seg_end = seg_end;
            }
            plan.reservations.push_back(std::move(r));
        };
        add({S, C, E, G, J, D}, PathRole::Major, 0, 0);
        plan.major_count = 1;
        add({S, A, C}, PathRole::Recovery, 0, 1);
        add({J, B, D}, PathRole::Recovery, 4, 5);
        add({E, H, J}, PathRole::Recovery, 2, 4);
        add({E, F, I, J}, PathRole::Recovery, 2, 4);

        const std::vector<Fidelity> intact(3, Fidelity{intact_fidelity});
        const auto& m = plan.reservations[0];
        for (int h = 0; h < m.path.length(); ++h) outcomes[m.hop_ref(h)] = h == 2 ? std::vector<Fidelity>{} : intact;
        for (int r = 1; r <= 2; ++r) {
            const auto& d = plan.reservations[r];
            for (int h = 0; h < d.path.length(); ++h) outcomes[d.hop_ref(h)] = intact;
        }
        outcomes[via_h().hop_ref(0)] = fids({0.940});
        outcomes[via_h().hop_ref(1)] = fids({0.945, 0.943});
        outcomes[via_fi().hop_ref(0)] = fids({0.960, 0.960});
        outcomes[via_fi().hop_ref(1)] = fids({0.958, 0.958, 0.958});
        outcomes[via_fi().hop_ref(2)] = fids({0.962, 0.962});
    }

    std::vector<Request> requests() const { return {Request{S, D, FidelityThreshold{f_th}}}; }
};

} // namespace qguard::testing

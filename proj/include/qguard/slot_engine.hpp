// One time slot end to end: path selection and reservation, link generation
// and k-hop exchange, recovery planning, then purification, swapping and
// qualification, for each routing algorithm variant.
#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qguard/link_state.hpp"
#include "qguard/path_selection.hpp"
#include "qguard/purification.hpp"
#include "qguard/random.hpp"
#include "qguard/recovery_planning.hpp"
#include "qguard/topology.hpp"

namespace qguard {

enum class Algorithm { QCast, QCastPur, QGuard, QGuardWs, QGuardFp };
enum class ScorerKind { Ext, Fp };
enum class RecoveryPolicy { ShortestDetour, Exg };

struct AlgorithmConfig {
    Algorithm name = Algorithm::QGuard;
    ScorerKind scorer = ScorerKind::Ext;
    RecoveryPolicy recovery = RecoveryPolicy::Exg;
    TargetRule targets = TargetRule::EqualSplit;
    bool hop_purification = true;
    bool e2e_purification = true;
    // Fidelity-blind baselines learn only which channels succeeded, so they
    // cannot pick the best pairs for swapping and match them in channel order.
    bool fidelity_aware_swaps = true;
};

inline AlgorithmConfig algorithm_config(Algorithm a) {
    switch (a) {
    case Algorithm::QCast:
        return {a, ScorerKind::Ext, RecoveryPolicy::ShortestDetour, TargetRule::EqualSplit, false, false, false};
    case Algorithm::QCastPur:
        return {a, ScorerKind::Ext, RecoveryPolicy::ShortestDetour, TargetRule::EqualSplit, false, true, false};
    case Algorithm::QGuard:
        return {a, ScorerKind::Ext, RecoveryPolicy::Exg, TargetRule::EqualSplit, true, true, true};
    case Algorithm::QGuardWs:
        return {a, ScorerKind::Ext, RecoveryPolicy::Exg, TargetRule::Weighted, true, true, true};
    case Algorithm::QGuardFp:
        return {a, ScorerKind::Fp, RecoveryPolicy::Exg, TargetRule::EqualSplit, true, true, true};
    }
    throw std::invalid_argument("algorithm_config: unknown algorithm");
}

inline std::string_view algorithm_name(Algorithm a) {
    switch (a) {
    case Algorithm::QCast: return "QCAST";
    case Algorithm::QCastPur: return "QCAST_PUR";
    case Algorithm::QGuard: return "QGUARD";
    case Algorithm::QGuardWs: return "QGUARD_WS";
    case Algorithm::QGuardFp: return "QGUARD_FP";
    }
    return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
    for (Algorithm a : {Algorithm::QCast, Algorithm::QCastPur, Algorithm::QGuard, Algorithm::QGuardWs,
                        Algorithm::QGuardFp}) {
        if (algorithm_name(a) == s) return a;
    }
    throw std::invalid_argument("unknown algorithm '" + std::string{s} + "'");
}

struct SlotParams {
    int k = 3;
    double q = 0.9;
    RoundsCap cap{3};
    double gen_noise_sigma = 0.01;
    // When false, end-to-end purification always succeeds.
    bool stochastic_e2e = true;
    std::optional<int> max_detour_hops;
};

// Phase 2 output: major paths first, then recovery paths; ids are indices.
struct PathPlan {
    std::vector<PathReservation> reservations;

    std::span<const PathReservation> majors() const {
        return std::span<const PathReservation>{reservations}.first(major_count);
    }
    std::size_t major_count = 0;
};

inline PathPlan select_paths(const NetworkGraph& g, std::span<const Request> requests, ScorerKind kind,
                             const SlotParams& params) {
    ResidualGraph res{g};
    PathPlan plan;
    auto run = [&](const auto& scorer) {
        plan.reservations = select_major_paths(res, requests, scorer);
        plan.major_count = plan.reservations.size();
        RecoveryOptions opt{params.k, params.max_detour_hops};
        auto recovery = select_recovery_paths(res, plan.majors(), requests, scorer, opt,
                                              static_cast<ReservationId>(plan.major_count));
        for (auto& r : recovery) plan.reservations.push_back(std::move(r));
    };
    if (kind == ScorerKind::Fp) {
        run(FpScorer{g, params.q, params.cap});
    } else {
        run(ExtScorer{g, params.q});
    }
    return plan;
}

// Per-channel generation draws for one slot, keyed by (link, channel index) so
// every algorithm reserving the same physical channel sees the same outcome.
class ChannelDraws {
public:
    ChannelDraws(const NetworkGraph& g, RandomStream stream) : g_(&g), stream_(std::move(stream)), draws_(g.link_count()) {}

    struct Draw {
        double uniform;
        double noise;  // standard normal
    };

    const Draw& at(LinkId e, int channel) const {
        auto& d = draws_[e];
        if (d.empty()) {
            RandomStream s = stream_.substream("link", static_cast<std::uint64_t>(e));
            for (int c = 0; c < g_->link(e).channels; ++c) {
                const double u = s.uniform();
                const double z = s.normal(0.0, 1.0);
                d.push_back({u, z});
            }
        }
        return d.at(channel);
    }

private:
    const NetworkGraph* g_;
    RandomStream stream_;
    mutable std::vector<std::vector<Draw>> draws_;
};

// Every reserved channel succeeds with its link's p_gen; a success yields a
// pair at the link's mean fidelity plus Gaussian noise.
inline LinkOutcomes attempt_generation(std::span<const PathReservation> reservations, const NetworkGraph& g,
                                       const ChannelDraws& draws, double noise_sigma) {
    LinkOutcomes out;
    for (const auto& r : reservations) {
        for (int i = 0; i < r.path.length(); ++i) {
            const LinkId e = r.path.hops[i];
            const Link& l = g.link(e);
            auto& pairs = out[r.hop_ref(i)];
            for (int c = 0; c < r.path.width; ++c) {
                const auto& d = draws.at(e, r.channel_offset[i] + c);
                if (d.uniform < l.p_gen) pairs.push_back(Fidelity{l.f0_mean.value() + noise_sigma * d.noise});
            }
        }
    }
    return out;
}

inline LinkOutcomes attempt_generation(std::span<const PathReservation> reservations, const NetworkGraph& g,
                                       const RandomStream& generation, double noise_sigma) {
    return attempt_generation(reservations, g, ChannelDraws{g, generation}, noise_sigma);
}

struct SwapResult {
    std::vector<BellPair> pairs;
    int attempts = 0;
};

// Parallel swaps: attempt a uses the a-th pair on every hop and survives only
// if all L-1 swaps succeed. Rank matching pairs best with best; otherwise the
// pools are used in the order given.
template <CoinSource Rng>
SwapResult execute_swaps(std::vector<std::vector<BellPair>> pools, double q, Rng& rng, bool rank_matched = true) {
    SwapResult res;
    if (pools.empty()) return res;
    std::size_t attempts = pools.front().size();
    for (auto& p : pools) {
        if (rank_matched) {
            std::stable_sort(p.begin(), p.end(),
                             [](const BellPair& a, const BellPair& b) { return a.fidelity > b.fidelity; });
        }
        attempts = std::min(attempts, p.size());
    }
    res.attempts = static_cast<int>(attempts);
    std::vector<Fidelity> chain(pools.size());
    for (std::size_t a = 0; a < attempts; ++a) {
        bool ok = true;
        for (std::size_t s = 0; s + 1 < pools.size(); ++s) {
            ok = rng.bernoulli(q) && ok;
        }
        if (!ok) continue;
        for (std::size_t h = 0; h < pools.size(); ++h) chain[h] = pools[h][a].fidelity;
        res.pairs.push_back(BellPair{kEndToEnd, end_to_end_fidelity(chain)});
    }
    return res;
}

struct E2ePurification {
    std::vector<BellPair> pairs;
    int successes = 0;
    int failures = 0;
};

// Combines the two lowest unqualified end-to-end pairs until fewer than two
// remain below threshold. Qualified pairs are never consumed.
template <CoinSource Rng>
E2ePurification final_e2e_purification(std::vector<BellPair> pairs, Fidelity f_th, Rng& rng, bool stochastic = true) {
    E2ePurification res;
    std::vector<BellPair> below;
    for (const auto& p : pairs) (p.fidelity >= f_th ? res.pairs : below).push_back(p);
    auto ascending = [](const BellPair& a, const BellPair& b) { return a.fidelity < b.fidelity; };
    std::stable_sort(below.begin(), below.end(), ascending);
    while (below.size() >= 2) {
        const BellPair a = below[0];
        const BellPair b = below[1];
        below.erase(below.begin(), below.begin() + 2);
        const auto step = bbpssw_asymmetric_step(a.fidelity, b.fidelity);
        const bool ok = stochastic ? rng.bernoulli(step.success_prob) : true;
        if (!ok) {
            ++res.failures;
            continue;
        }
        ++res.successes;
        BellPair out{kEndToEnd, step.output_fidelity};
        if (out.fidelity >= f_th) {
            res.pairs.push_back(out);
        } else {
            below.insert(std::upper_bound(below.begin(), below.end(), out, ascending), out);
        }
    }
    res.pairs.insert(res.pairs.end(), below.begin(), below.end());
    return res;
}

struct RequestMetrics {
    int raw = 0;
    int qualified = 0;
    bool served = false;
};

// Pair bookkeeping over assembled routes.
struct PairLedger {
    int generated = 0;      // realized pairs on hops of assembled routes
    int pump_consumed = 0;  // lost to per-hop purification
    int swap_consumed = 0;  // used by swap attempts
    int unused = 0;         // left on a hop after swapping
    int swapped_pairs = 0;  // end-to-end pairs out of swapping
    int e2e_consumed = 0;   // lost to end-to-end purification
};

struct SlotMetrics {
    std::vector<RequestMetrics> requests;
    int raw = 0;
    int qualified = 0;
    int served = 0;
    PairLedger ledger;
    int major_paths = 0;
    int recovery_paths = 0;
    int routes = 0;
};

// Recovery decisions for one major path; nullopt when it cannot be repaired.
inline std::optional<AssembledRoute> plan_route(const NetworkGraph& g, const PathReservation& major,
                                                std::span<const PathReservation* const> detours, Fidelity f_th,
                                                const AlgorithmConfig& algo, const SlotParams& params,
                                                const ViewSource& views) {
    std::set<int> failed;
    for (int h = 0; h < major.path.length(); ++h) {
        if (views(major.path.nodes[h]).pair_count(major.hop_ref(h)) == 0) failed.insert(h);
    }
    const auto intact = major_targets(g, major, f_th, algo.targets, params.cap);
    std::vector<SegmentChoice> choices;
    int covered_until = 0;
    for (int h : failed) {
        if (h < covered_until) continue;
        std::vector<const PathReservation*> cands;
        for (const PathReservation* d : detours) {
            if (d->seg_begin <= h && h < d->seg_end && d->seg_begin >= covered_until) cands.push_back(d);
        }
        if (algo.recovery == RecoveryPolicy::ShortestDetour) {
            const PathReservation* pick = qcast_recovery(cands, views);
            if (!pick) return std::nullopt;
            const WernerParam budget = detour_budget(g, major, pick->seg_begin, pick->seg_end, f_th, algo.targets);
            choices.push_back({pick, detour_hop_targets(g, *pick, budget, algo.targets, params.cap)});
            covered_until = pick->seg_end;
        } else {
            auto pick = select_recovery(g, major, cands, f_th, algo.targets, views, params.cap, params.q);
            if (!pick) return std::nullopt;
            choices.push_back({pick->detour, pick->plan.targets});
            covered_until = pick->detour->seg_end;
        }
    }
    return assemble_route(major, failed, choices, intact);
}

// Lazily built per-node views.
class ViewCache {
public:
    ViewCache(const NetworkGraph& g, const LinkOutcomes& outcomes, int k) : g_(&g), outcomes_(&outcomes), k_(k) {}

    const LinkStateView& operator()(NodeId n) {
        auto it = views_.find(n);
        if (it == views_.end()) it = views_.emplace(n, build_view(*g_, *outcomes_, n, k_)).first;
        return it->second;
    }

private:
    const NetworkGraph* g_;
    const LinkOutcomes* outcomes_;
    int k_;
    std::map<NodeId, LinkStateView> views_;
};

// Phases 4 and 5 plus qualification, given reservations and generation outcomes.
template <CoinSource PurifyRng, CoinSource SwapRng>
SlotMetrics complete_slot(const NetworkGraph& g, std::span<const Request> requests, const AlgorithmConfig& algo,
                          const SlotParams& params, const PathPlan& plan, const LinkOutcomes& outcomes,
                          PurifyRng& purify_rng, SwapRng& swap_rng) {
    SlotMetrics m;
    m.requests.assign(requests.size(), {});
    m.major_paths = static_cast<int>(plan.major_count);
    m.recovery_paths = static_cast<int>(plan.reservations.size() - plan.major_count);

    ViewCache cache{g, outcomes, params.k};
    const ViewSource views = [&cache](NodeId n) -> const LinkStateView& { return cache(n); };

    std::vector<std::vector<BellPair>> delivered(requests.size());
    for (const auto& major : plan.majors()) {
        std::vector<const PathReservation*> detours;
        for (const auto& r : plan.reservations) {
            if (r.role == PathRole::Recovery && r.major == major.id) detours.push_back(&r);
        }
        const Fidelity f_th = requests[major.request].threshold.f_th;
        const auto route = plan_route(g, major, detours, f_th, algo, params, views);
        if (!route) continue;
        ++m.routes;

        std::vector<std::vector<BellPair>> pools;
        for (const auto& rh : route->hops) {
            std::vector<BellPair> pool;
            if (auto it = outcomes.find(rh.hop); it != outcomes.end()) {
                for (Fidelity f : it->second) pool.push_back(BellPair{rh.hop.link, f});
            }
            m.ledger.generated += static_cast<int>(pool.size());
            if (algo.hop_purification) {
                auto pumped = pump_to_target(std::move(pool), rh.target, purify_rng);
                m.ledger.pump_consumed += pumped.successes + 2 * pumped.failures;
                pool = std::move(pumped.outputs);
                pool.insert(pool.end(), pumped.leftovers.begin(), pumped.leftovers.end());
            }
            pools.push_back(std::move(pool));
        }
        const int available = [&] {
            int s = 0;
            for (const auto& p : pools) s += static_cast<int>(p.size());
            return s;
        }();
        auto swapped = execute_swaps(std::move(pools), params.q, swap_rng, algo.fidelity_aware_swaps);
        const int used = swapped.attempts * static_cast<int>(route->hops.size());
        m.ledger.swap_consumed += used;
        m.ledger.unused += available - used;
        m.ledger.swapped_pairs += static_cast<int>(swapped.pairs.size());
        auto& bucket = delivered[major.request];
        bucket.insert(bucket.end(), swapped.pairs.begin(), swapped.pairs.end());
    }

    for (std::size_t r = 0; r < requests.size(); ++r) {
        auto pairs = std::move(delivered[r]);
        const Fidelity f_th = requests[r].threshold.f_th;
        if (algo.e2e_purification) {
            auto pur = final_e2e_purification(std::move(pairs), f_th, purify_rng, params.stochastic_e2e);
            m.ledger.e2e_consumed += pur.successes + 2 * pur.failures;
            pairs = std::move(pur.pairs);
        }
        auto& rm = m.requests[r];
        rm.raw = static_cast<int>(pairs.size());
        rm.qualified = static_cast<int>(
            std::count_if(pairs.begin(), pairs.end(), [&](const BellPair& p) { return p.fidelity >= f_th; }));
        rm.served = rm.qualified >= 1;
        m.raw += rm.raw;
        m.qualified += rm.qualified;
        m.served += rm.served ? 1 : 0;
    }
    return m;
}

// Independent random substreams of one slot.
struct SlotStreams {
    RandomStream generation;
    RandomStream purification;
    RandomStream swap;

    explicit SlotStreams(const RandomStream& slot)
        : generation(slot.substream("generation")), purification(slot.substream("purification")),
          swap(slot.substream("swap")) {}
};

inline SlotMetrics run_slot(const NetworkGraph& g, std::span<const Request> requests, const AlgorithmConfig& algo,
                            const SlotParams& params, const RandomStream& slot_rng) {
    SlotStreams streams{slot_rng};
    const PathPlan plan = select_paths(g, requests, algo.scorer, params);
    const LinkOutcomes outcomes = attempt_generation(plan.reservations, g, streams.generation, params.gen_noise_sigma);
    return complete_slot(g, requests, algo, params, plan, outcomes, streams.purification, streams.swap);
}

} // namespace qguard

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace qguard;
using qguard::testing::DetourExample;
using qguard::testing::fids;
using qguard::testing::make_graph;

namespace {

std::vector<BellPair> pairs_at(LinkId hop, std::initializer_list<double> fs) {
    std::vector<BellPair> out;
    for (double f : fs) out.push_back(BellPair{hop, Fidelity{f}});
    return out;
}

NetworkGraph small_network(double eta_sigma, std::uint64_t seed, int nodes = 30) {
    WaxmanParams p;
    p.nodes = nodes;
    p.avg_degree = 4.0;
    p.eta_sigma = eta_sigma;
    auto g = generate_waxman(p, RandomStream{seed});
    calibrate_alpha(g, 0.7);
    return g;
}

PathReservation reserve_line(const NetworkGraph& g, std::vector<NodeId> nodes, int width, ReservationId id = 0) {
    PathReservation r;
    r.id = id;
    r.path = qguard::testing::candidate(g, std::move(nodes), width);
    r.channel_offset.assign(r.path.hops.size(), 0);
    return r;
}

int diameter(const NetworkGraph& g) {
    int d = 0;
    for (NodeId n = 0; n < g.node_count(); ++n) {
        for (int x : g.hop_distances(n)) d = std::max(d, x);
    }
    return d;
}

const std::vector<Algorithm> kAll{Algorithm::QCast, Algorithm::QCastPur, Algorithm::QGuard, Algorithm::QGuardWs,
                                  Algorithm::QGuardFp};

} // namespace

TEST(Algorithms, ConfigTuples) {
    const auto qc = algorithm_config(Algorithm::QCast);
    EXPECT_EQ(qc.scorer, ScorerKind::Ext);
    EXPECT_EQ(qc.recovery, RecoveryPolicy::ShortestDetour);
    EXPECT_FALSE(qc.hop_purification);
    EXPECT_FALSE(qc.e2e_purification);
    const auto qp = algorithm_config(Algorithm::QCastPur);
    EXPECT_FALSE(qp.hop_purification);
    EXPECT_TRUE(qp.e2e_purification);
    const auto ws = algorithm_config(Algorithm::QGuardWs);
    EXPECT_EQ(ws.recovery, RecoveryPolicy::Exg);
    EXPECT_EQ(ws.targets, TargetRule::Weighted);
    const auto fp = algorithm_config(Algorithm::QGuardFp);
    EXPECT_EQ(fp.scorer, ScorerKind::Fp);
    EXPECT_TRUE(fp.hop_purification && fp.e2e_purification);
    for (Algorithm a : kAll) EXPECT_EQ(parse_algorithm(algorithm_name(a)), a);
    EXPECT_THROW(parse_algorithm("DIJKSTRA"), std::invalid_argument);
}

TEST(Generation, CertainAndImpossibleLinks) {
    const auto g = make_graph(3, {{0, 1, 1.0}, {1, 2, 0.0}}, 16);
    const std::vector<PathReservation> rs{reserve_line(g, {0, 1, 2}, 4)};
    const auto out = attempt_generation(rs, g, RandomStream{1}, 0.01);
    EXPECT_EQ(out.at(rs[0].hop_ref(0)).size(), 4u);
    EXPECT_TRUE(out.at(rs[0].hop_ref(1)).empty());
}

TEST(Generation, MonteCarloRateAndNoise) {
    const auto g = make_graph(2, {{0, 1, 0.7, 0.9, 10}}, 16);
    const std::vector<PathReservation> rs{reserve_line(g, {0, 1}, 10)};
    long successes = 0;
    double sum = 0.0, sum_sq = 0.0;
    const int slots = 10000;
    for (int s = 0; s < slots; ++s) {
        const auto out = attempt_generation(rs, g, RandomStream{7}.substream("slot", s), 0.01);
        for (Fidelity f : out.at(rs[0].hop_ref(0))) {
            ++successes;
            sum += f.value();
            sum_sq += f.value() * f.value();
        }
    }
    const double n = 10.0 * slots;
    const double rate = successes / n;
    EXPECT_NEAR(rate, 0.7, 3.0 * std::sqrt(0.7 * 0.3 / n));
    const double mean = sum / successes;
    EXPECT_NEAR(mean, 0.9, 3.0 * 0.01 / std::sqrt(static_cast<double>(successes)));
    EXPECT_NEAR(std::sqrt(sum_sq / successes - mean * mean), 0.01, 5e-4);
}

TEST(Generation, SameChannelSameOutcomeAcrossPlans) {
    const auto g = make_graph(3, {{0, 1, 0.5, 0.9, 8}, {1, 2, 0.5, 0.9, 8}}, 32);
    const RandomStream gen{11};
    auto a = reserve_line(g, {0, 1, 2}, 3);
    auto b = reserve_line(g, {0, 1}, 3);
    const auto oa = attempt_generation(std::vector<PathReservation>{a}, g, gen, 0.01);
    const auto ob = attempt_generation(std::vector<PathReservation>{b}, g, gen, 0.01);
    EXPECT_EQ(oa.at(a.hop_ref(0)), ob.at(b.hop_ref(0)));
    b.channel_offset[0] = 3;
    const auto oc = attempt_generation(std::vector<PathReservation>{b}, g, gen, 0.01);
    const ChannelDraws draws{g, gen};
    std::vector<Fidelity> want;
    for (int c = 3; c < 6; ++c) {
        if (draws.at(0, c).uniform < g.link(0).p_gen) want.push_back(Fidelity{0.9 + 0.01 * draws.at(0, c).noise});
    }
    ASSERT_EQ(oc.at(b.hop_ref(0)).size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_NEAR(oc.at(b.hop_ref(0))[i].value(), want[i].value(), 1e-12);
    }
}

TEST(Views, KHopExchange) {
    const auto g = small_network(1.0, 3);
    LinkOutcomes none;
    const auto all = build_k_hop_views(g, none, diameter(g));
    for (const auto& v : all) {
        for (LinkId e = 0; e < g.link_count(); ++e) EXPECT_TRUE(v.sees(e));
    }
    const auto local = build_k_hop_views(g, none, 0);
    for (NodeId n = 0; n < g.node_count(); ++n) {
        for (LinkId e = 0; e < g.link_count(); ++e) EXPECT_EQ(local[n].sees(e), g.link(e).touches(n));
    }
}

TEST(Swaps, Examples) {
    ForcedCoin yes{true};
    RandomStream rng{1};
    auto two = execute_swaps({pairs_at(0, {0.97}), pairs_at(1, {0.96})}, 1.0, rng);
    ASSERT_EQ(two.pairs.size(), 1u);
    EXPECT_NEAR(two.pairs[0].fidelity.value(), 0.9316, 1e-12);
    EXPECT_TRUE(two.pairs[0].end_to_end());
    EXPECT_TRUE(execute_swaps({pairs_at(0, {0.97, 0.9}), pairs_at(1, {0.96})}, 0.0, rng).pairs.empty());
    auto one = execute_swaps({pairs_at(0, {0.97, 0.9})}, 0.0, rng);
    EXPECT_EQ(one.pairs.size(), 2u);
    auto empty = execute_swaps({pairs_at(0, {0.97}), {}}, 1.0, yes);
    EXPECT_EQ(empty.attempts, 0);
    EXPECT_TRUE(empty.pairs.empty());
}

TEST(Swaps, RankMatchedVersusChannelOrder) {
    ForcedCoin yes{true};
    const std::vector<std::vector<BellPair>> pools{pairs_at(0, {0.9, 0.99}), pairs_at(1, {0.99, 0.9})};
    auto ranked = execute_swaps(pools, 1.0, yes, true);
    auto blind = execute_swaps(pools, 1.0, yes, false);
    ASSERT_EQ(ranked.pairs.size(), 2u);
    ASSERT_EQ(blind.pairs.size(), 2u);
    EXPECT_NEAR(ranked.pairs[0].fidelity.value(), end_to_end_fidelity(fids({0.99, 0.99})).value(), 1e-15);
    EXPECT_NEAR(ranked.pairs[1].fidelity.value(), end_to_end_fidelity(fids({0.9, 0.9})).value(), 1e-15);
    EXPECT_NEAR(blind.pairs[0].fidelity.value(), end_to_end_fidelity(fids({0.9, 0.99})).value(), 1e-15);
    EXPECT_NEAR(blind.pairs[1].fidelity.value(), end_to_end_fidelity(fids({0.99, 0.9})).value(), 1e-15);
}

TEST(E2ePurification, Examples) {
    ForcedCoin yes{true};
    const auto good = pairs_at(kEndToEnd, {0.9, 0.8});
    EXPECT_EQ(final_e2e_purification(good, Fidelity{0.75}, yes).pairs, good);
    EXPECT_TRUE(final_e2e_purification({}, Fidelity{0.75}, yes).pairs.empty());
    const auto res = final_e2e_purification(pairs_at(kEndToEnd, {0.7, 0.7}), Fidelity{0.75}, yes);
    ASSERT_EQ(res.pairs.size(), 1u);
    EXPECT_NEAR(res.pairs[0].fidelity.value(), 25.0 / 34.0, 1e-14);
    EXPECT_EQ(res.successes, 1);
}

TEST(E2ePurification, QualifiedPairsAreNeverConsumed) {
    ForcedCoin no{false};
    const auto res = final_e2e_purification(pairs_at(kEndToEnd, {0.7, 0.95, 0.72, 0.71}), Fidelity{0.75}, no);
    ASSERT_EQ(res.pairs.size(), 2u);
    EXPECT_EQ(res.pairs[0].fidelity.value(), 0.95);
    EXPECT_EQ(res.pairs[1].fidelity.value(), 0.72);
    EXPECT_EQ(res.failures, 1);
    // Deterministic mode ignores the coin.
    const auto det = final_e2e_purification(pairs_at(kEndToEnd, {0.7, 0.7}), Fidelity{0.75}, no, false);
    EXPECT_EQ(det.pairs.size(), 1u);
}

TEST(Slot, ZeroRequests) {
    const auto g = small_network(1.0, 1);
    const auto m = run_slot(g, {}, algorithm_config(Algorithm::QGuard), SlotParams{}, RandomStream{1});
    EXPECT_EQ(m.raw, 0);
    EXPECT_EQ(m.qualified, 0);
    EXPECT_EQ(m.major_paths, 0);
    EXPECT_EQ(m.ledger.generated, 0);
}

TEST(Slot, DeterministicPerSeed) {
    const auto g = small_network(1.0, 2);
    RandomStream rs{4};
    const auto reqs = sample_requests(g, 5, Fidelity{0.75}, rs);
    for (Algorithm a : kAll) {
        const auto x = run_slot(g, reqs, algorithm_config(a), SlotParams{}, RandomStream{9});
        const auto y = run_slot(g, reqs, algorithm_config(a), SlotParams{}, RandomStream{9});
        EXPECT_EQ(x.raw, y.raw);
        EXPECT_EQ(x.qualified, y.qualified);
        EXPECT_EQ(x.ledger.generated, y.ledger.generated);
        EXPECT_EQ(x.ledger.pump_consumed, y.ledger.pump_consumed);
    }
}

TEST(Slot, IllustrativeSegmentMeetsBudget) {
    // Pump and swap the chosen detour with every draw forced to succeed.
    DetourExample fig;
    ForcedCoin yes{true};
    const WernerParam w_seg = segment_budget(FidelityThreshold{fig.f_th}.w_th, 2, 5);
    const Fidelity target = detour_targets(w_seg, 3);
    std::vector<std::vector<BellPair>> pools;
    for (int h = 0; h < 3; ++h) {
        std::vector<BellPair> pool;
        for (Fidelity f : fig.outcomes.at(fig.via_fi().hop_ref(h))) pool.push_back({fig.via_fi().path.hops[h], f});
        auto pumped = pump_to_target(pool, target, yes);
        ASSERT_FALSE(pumped.outputs.empty());
        pools.push_back(pumped.outputs);
    }
    const auto swapped = execute_swaps(pools, 0.9, yes);
    ASSERT_FALSE(swapped.pairs.empty());
    EXPECT_GE(fidelity_to_werner(swapped.pairs[0].fidelity).value(), w_seg.value());

    // Whole slot on the same instance: perfect intact hops, one repaired route.
    const auto reqs = fig.requests();
    const auto m = complete_slot(fig.g, reqs, algorithm_config(Algorithm::QGuard), SlotParams{}, fig.plan,
                                 fig.outcomes, yes, yes);
    EXPECT_EQ(m.routes, 1);
    EXPECT_GE(m.qualified, 1);
    EXPECT_TRUE(m.requests[0].served);
    // Hops of S-C-E-F-I-J-D: 3 + 3 + 2 + 3 + 2 + 3 realized pairs.
    EXPECT_EQ(m.ledger.generated, 16);
}

TEST(Slot, QCastRepairsWithShortDetour) {
    DetourExample fig;
    ForcedCoin yes{true};
    const auto reqs = fig.requests();
    const auto m = complete_slot(fig.g, reqs, algorithm_config(Algorithm::QCast), SlotParams{}, fig.plan,
                                 fig.outcomes, yes, yes);
    EXPECT_EQ(m.routes, 1);
    // S-C-E-H-J-D: bottleneck is the single E-H pair.
    EXPECT_EQ(m.raw, 1);
    EXPECT_EQ(m.ledger.generated, 3 + 3 + 1 + 2 + 3);
}

TEST(Slot, UnrepairableMajorDeliversNothing) {
    DetourExample fig;
    fig.outcomes[fig.via_h().hop_ref(0)] = {};
    fig.outcomes[fig.via_fi().hop_ref(0)] = {};
    ForcedCoin yes{true};
    const auto reqs = fig.requests();
    for (Algorithm a : kAll) {
        const auto m = complete_slot(fig.g, reqs, algorithm_config(a), SlotParams{}, fig.plan, fig.outcomes, yes, yes);
        EXPECT_EQ(m.routes, 0);
        EXPECT_EQ(m.raw, 0);
        EXPECT_FALSE(m.requests[0].served);
    }
}

TEST(SlotProperties, ConservationAndQualifiedBound) {
    const auto g = small_network(2.0, 5, 40);
    for (int t = 0; t < 100; ++t) {
        RandomStream rs = RandomStream{77}.substream("requests", t);
        const auto reqs = sample_requests(g, 6, Fidelity{0.75}, rs);
        for (Algorithm a : kAll) {
            const auto algo = algorithm_config(a);
            const auto m = run_slot(g, reqs, algo, SlotParams{}, RandomStream{77}.substream("slot", t));
            const auto& l = m.ledger;
            EXPECT_EQ(l.generated, l.pump_consumed + l.swap_consumed + l.unused);
            EXPECT_EQ(m.raw, l.swapped_pairs - l.e2e_consumed);
            if (!algo.hop_purification) {
                EXPECT_EQ(l.pump_consumed, 0);
            }
            if (!algo.e2e_purification) {
                EXPECT_EQ(l.e2e_consumed, 0);
            }
            EXPECT_LE(m.qualified, m.raw);
            int raw = 0, qualified = 0, served = 0;
            for (const auto& r : m.requests) {
                EXPECT_LE(r.qualified, r.raw);
                EXPECT_EQ(r.served, r.qualified >= 1);
                raw += r.raw;
                qualified += r.qualified;
                served += r.served;
            }
            EXPECT_EQ(raw, m.raw);
            EXPECT_EQ(qualified, m.qualified);
            EXPECT_EQ(served, m.served);
        }
    }
}

TEST(SlotProperties, QCastRawIgnoresThreshold) {
    const auto g = small_network(1.0, 6);
    for (int t = 0; t < 20; ++t) {
        RandomStream rs = RandomStream{5}.substream("requests", t);
        auto reqs = sample_requests(g, 5, Fidelity{0.6}, rs);
        const auto slot = RandomStream{5}.substream("slot", t);
        const int base = run_slot(g, reqs, algorithm_config(Algorithm::QCast), SlotParams{}, slot).raw;
        for (double f : {0.7, 0.8, 0.95}) {
            for (auto& r : reqs) r.threshold = FidelityThreshold{f};
            EXPECT_EQ(run_slot(g, reqs, algorithm_config(Algorithm::QCast), SlotParams{}, slot).raw, base);
        }
    }
}

TEST(SlotProperties, WeightedSplitIdenticalOnEqualHardware) {
    const auto g = small_network(0.0, 7);
    for (int t = 0; t < 30; ++t) {
        RandomStream rs = RandomStream{8}.substream("requests", t);
        const auto reqs = sample_requests(g, 6, Fidelity{0.75}, rs);
        const auto slot = RandomStream{8}.substream("slot", t);
        const auto a = run_slot(g, reqs, algorithm_config(Algorithm::QGuard), SlotParams{}, slot);
        const auto b = run_slot(g, reqs, algorithm_config(Algorithm::QGuardWs), SlotParams{}, slot);
        EXPECT_EQ(a.raw, b.raw);
        EXPECT_EQ(a.qualified, b.qualified);
        EXPECT_EQ(a.ledger.pump_consumed, b.ledger.pump_consumed);
        EXPECT_EQ(a.ledger.e2e_consumed, b.ledger.e2e_consumed);
    }
}

TEST(SlotProperties, KHopDecisionsMatchGlobalState) {
    const auto g = small_network(1.0, 9);
    const int diam = diameter(g);
    for (int t = 0; t < 30; ++t) {
        RandomStream rs = RandomStream{10}.substream("requests", t);
        const auto reqs = sample_requests(g, 6, Fidelity{0.75}, rs);
        SlotParams local;
        local.k = diam;
        SlotParams global = local;
        global.k = std::numeric_limits<int>::max() / 2;
        const auto plan = select_paths(g, reqs, ScorerKind::Ext, local);
        const SlotStreams streams{RandomStream{10}.substream("slot", t)};
        const auto outcomes = attempt_generation(plan.reservations, g, streams.generation, local.gen_noise_sigma);
        for (Algorithm a : {Algorithm::QCast, Algorithm::QGuard, Algorithm::QGuardWs}) {
            SlotStreams s1 = streams, s2 = streams;
            const auto x = complete_slot(g, reqs, algorithm_config(a), local, plan, outcomes, s1.purification, s1.swap);
            const auto y = complete_slot(g, reqs, algorithm_config(a), global, plan, outcomes, s2.purification, s2.swap);
            EXPECT_EQ(x.raw, y.raw);
            EXPECT_EQ(x.qualified, y.qualified);
            EXPECT_EQ(x.routes, y.routes);
            EXPECT_EQ(x.ledger.generated, y.ledger.generated);
        }
    }
}

// BBPSSW purification: the symmetric recurrence used for planning, the
// asymmetric step used when real pairs are combined, round-count cost tables,
// and the per-hop pumping loop executed before swapping.
#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qguard/link_state.hpp"
#include "qguard/random.hpp"
#include "qguard/types.hpp"
#include "qguard/werner.hpp"

namespace qguard {

struct PurificationOutcome {
    Fidelity output_fidelity;
    double success_prob = 1.0;
};

struct RoundsCap {
    int r_max = 3;

    explicit RoundsCap(int r = 3) : r_max(r) {
        if (r_max < 1) throw std::invalid_argument("RoundsCap: R_max must be >= 1");
    }
};

// Round count, or nullopt when the target is out of reach within R_max.
using Rounds = std::optional<int>;

inline PurificationOutcome bbpssw_symmetric_step(Fidelity f) {
    const double x = f.value();
    const double y = 1.0 - x;
    const double num = x * x + y * y / 9.0;
    const double den = x * x + 2.0 / 3.0 * x * y + 5.0 / 9.0 * y * y;
    return {Fidelity{num / den}, den};
}

inline PurificationOutcome bbpssw_asymmetric_step(Fidelity fa, Fidelity fb) {
    const double a = fa.value();
    const double b = fb.value();
    const double num = a * b + (1.0 - a) * (1.0 - b) / 9.0;
    const double den = a * b + (a * (1.0 - b) + b * (1.0 - a)) / 3.0 + 5.0 * (1.0 - a) * (1.0 - b) / 9.0;
    return {Fidelity{num / den}, den};
}

// Fidelity after r rounds of ideal symmetric purification, r = 0..r_max.
inline std::vector<Fidelity> purification_ladder(Fidelity f0, int r_max) {
    std::vector<Fidelity> ladder{f0};
    for (int r = 0; r < r_max; ++r) {
        ladder.push_back(bbpssw_symmetric_step(ladder.back()).output_fidelity);
    }
    return ladder;
}

// Minimum r with F^(r) >= target.
inline Rounds purification_cost(Fidelity f0, Fidelity target, RoundsCap cap) {
    Fidelity f = f0;
    for (int r = 0;; ++r) {
        if (f >= target) return r;
        if (r == cap.r_max) return std::nullopt;
        f = bbpssw_symmetric_step(f).output_fidelity;
    }
}

constexpr int raw_pairs_for(int rounds) { return 1 << rounds; }

struct CostTableEntry {
    HopRef hop;
    Fidelity initial_fidelity;
    Fidelity target;
    Rounds rounds;
    int available_pairs = 0;

    bool feasible() const { return rounds.has_value(); }
    int raw_pairs_per_output() const { return rounds ? raw_pairs_for(*rounds) : 0; }
};

struct HopTarget {
    HopRef hop;
    Fidelity target;
};

// One entry per targeted hop; the starting fidelity is the best realized pair.
// Hops with no realized pair are infeasible.
inline std::vector<CostTableEntry> build_cost_table(const LinkStateView& view, const std::vector<HopTarget>& targets,
                                                    RoundsCap cap) {
    std::vector<CostTableEntry> table;
    table.reserve(targets.size());
    for (const auto& [hop, target] : targets) {
        CostTableEntry entry{hop, Fidelity{kMinFidelity}, target, std::nullopt, view.pair_count(hop)};
        if (auto best = view.best(hop)) {
            entry.initial_fidelity = *best;
            entry.rounds = purification_cost(*best, target, cap);
        }
        table.push_back(entry);
    }
    return table;
}

struct PumpResult {
    std::vector<BellPair> outputs;    // at or above target
    std::vector<BellPair> leftovers;  // below target, still usable for swapping
    int successes = 0;
    int failures = 0;
};

// Repeatedly combines the two best below-target pairs. Success keeps one pair
// at the output fidelity, failure loses both. Pairs that reach the target are
// set aside and never consumed.
template <CoinSource Rng>
PumpResult pump_to_target(std::vector<BellPair> pool, Fidelity target, Rng& rng) {
    PumpResult res;
    std::vector<BellPair> working;
    for (const auto& p : pool) {
        (p.fidelity >= target ? res.outputs : working).push_back(p);
    }
    auto by_fidelity_desc = [](const BellPair& a, const BellPair& b) { return a.fidelity > b.fidelity; };
    std::stable_sort(working.begin(), working.end(), by_fidelity_desc);
    while (working.size() >= 2) {
        const BellPair first = working[0];
        const BellPair second = working[1];
        working.erase(working.begin(), working.begin() + 2);
        const auto step = bbpssw_asymmetric_step(first.fidelity, second.fidelity);
        if (!rng.bernoulli(step.success_prob)) {
            ++res.failures;
            continue;
        }
        ++res.successes;
        BellPair out{first.hop, step.output_fidelity};
        if (out.fidelity >= target) {
            res.outputs.push_back(out);
        } else {
            working.insert(std::upper_bound(working.begin(), working.end(), out, by_fidelity_desc), out);
        }
    }
    res.leftovers = std::move(working);
    return res;
}

} // namespace qguard

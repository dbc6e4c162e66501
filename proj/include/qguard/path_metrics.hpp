// Path scoring metrics: the bottleneck-of-binomials EXT score and its
// purification-aware generalization that counts purified output pairs.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "qguard/purification.hpp"
#include "qguard/werner.hpp"

namespace qguard {

// Probability distribution over a count 0..W.
using CountDist = std::vector<double>;

inline double binomial_coefficient(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (int i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
    }
    return c;
}

// Q^i: exactly i of W independent channels succeed with probability p.
inline CountDist hop_success_dist(int width, double p) {
    if (width < 1) throw std::invalid_argument("hop_success_dist: width must be >= 1");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("hop_success_dist: p must be in [0, 1]");
    CountDist q(width + 1);
    for (int i = 0; i <= width; ++i) {
        q[i] = binomial_coefficient(width, i) * std::pow(p, i) * std::pow(1.0 - p, width - i);
    }
    return q;
}

// P^i: the minimum count across hops equals i. Folds one hop at a time:
// P_k^i = P_{k-1}^i * sum_{l>=i} Q_k^l + Q_k^i * sum_{l>i} P_{k-1}^l.
inline CountDist bottleneck_dist(std::span<const CountDist> hops) {
    if (hops.empty()) throw std::invalid_argument("bottleneck_dist: need at least one hop");
    const std::size_t support = hops.front().size();
    CountDist p = hops.front();
    CountDist next(support);
    for (std::size_t k = 1; k < hops.size(); ++k) {
        const auto& q = hops[k];
        if (q.size() != support) throw std::invalid_argument("bottleneck_dist: mismatched supports");
        double q_tail = 0.0;  // sum_{l >= i} Q^l
        double p_tail = 0.0;  // sum_{l > i} P^l
        for (std::size_t i = support; i-- > 0;) {
            q_tail += q[i];
            next[i] = p[i] * q_tail + q[i] * p_tail;
            p_tail += p[i];
        }
        p.swap(next);
    }
    return p;
}

inline double expected_count(const CountDist& p) {
    double s = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) s += static_cast<double>(i) * p[i];
    return s;
}

// Expected end-to-end pairs of a (W, L)-path: q^(L-1) * sum_i i * P_L^i.
inline double ext(std::span<const double> hop_probs, int width, double q) {
    if (hop_probs.empty()) throw std::invalid_argument("ext: path has no hops");
    std::vector<CountDist> dists;
    dists.reserve(hop_probs.size());
    for (double p : hop_probs) dists.push_back(hop_success_dist(width, p));
    return std::pow(q, static_cast<double>(hop_probs.size() - 1)) * expected_count(bottleneck_dist(dists));
}

// Q'^i: exactly i purified pairs from W channels when each output costs c raw
// pairs; the top bin M absorbs the remaining tail.
inline CountDist purified_output_dist(int width, double p, int cost, int max_outputs) {
    const CountDist raw = hop_success_dist(width, p);
    CountDist out(max_outputs + 1, 0.0);
    for (int j = 0; j <= width; ++j) {
        out[std::min(j / cost, max_outputs)] += raw[j];
    }
    return out;
}

// Purification-aware path score. Per-hop targets come from the equal split of
// the threshold over the path length; predicted_f0 are noise-free hardware
// fidelities. Returns 0 when any hop is unreachable or no purified pair fits.
inline double fp_score(std::span<const double> hop_probs, std::span<const Fidelity> predicted_f0, int width, double q,
                       Fidelity f_th, RoundsCap cap) {
    if (hop_probs.empty() || hop_probs.size() != predicted_f0.size()) {
        throw std::invalid_argument("fp_score: need one predicted fidelity per hop");
    }
    const int hops = static_cast<int>(hop_probs.size());
    const Fidelity target = equal_split_target(f_th, hops);
    std::vector<int> costs(hops);
    bool all_free = true;
    int purified_width = width;
    for (int k = 0; k < hops; ++k) {
        const Rounds r = purification_cost(predicted_f0[k], target, cap);
        if (!r) return 0.0;
        costs[k] = raw_pairs_for(*r);
        all_free = all_free && costs[k] == 1;
        purified_width = std::min(purified_width, width / costs[k]);
    }
    if (purified_width == 0) return 0.0;
    if (all_free) return ext(hop_probs, width, q);

    std::vector<CountDist> dists;
    dists.reserve(hops);
    for (int k = 0; k < hops; ++k) {
        dists.push_back(purified_output_dist(width, hop_probs[k], costs[k], purified_width));
    }
    return std::pow(q, static_cast<double>(hops - 1)) * expected_count(bottleneck_dist(dists));
}

} // namespace qguard

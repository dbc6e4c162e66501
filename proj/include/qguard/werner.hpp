// Werner-parameter algebra for Bell pairs.
//
// Every entangled pair in the simulator is a Werner state described by a
// single fidelity F in [1/4, 1]. Its Werner parameter w = (4F - 1) / 3
// multiplies under entanglement swapping, which makes all routing-level
// fidelity bookkeeping a matter of products and fractional powers.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

namespace qguard {

inline constexpr double kMinFidelity = 0.25;

class Fidelity {
public:
    constexpr Fidelity() = default;
    // Values outside [0.25, 1] are clamped; below 0.25 only arises from noise.
    constexpr explicit Fidelity(double v) : value_(std::clamp(v, kMinFidelity, 1.0)) {}

    constexpr double value() const { return value_; }
    friend constexpr auto operator<=>(const Fidelity&, const Fidelity&) = default;

private:
    double value_ = 1.0;
};

class WernerParam {
public:
    constexpr WernerParam() = default;
    constexpr explicit WernerParam(double v) : value_(std::clamp(v, 0.0, 1.0)) {}

    constexpr double value() const { return value_; }
    friend constexpr auto operator<=>(const WernerParam&, const WernerParam&) = default;

private:
    double value_ = 1.0;
};

constexpr WernerParam fidelity_to_werner(Fidelity f) {
    return WernerParam{(4.0 * f.value() - 1.0) / 3.0};
}

constexpr Fidelity werner_to_fidelity(WernerParam w) {
    return Fidelity{(1.0 + 3.0 * w.value()) / 4.0};
}

// Requested end-to-end fidelity together with its Werner threshold.
struct FidelityThreshold {
    Fidelity f_th;
    WernerParam w_th;

    constexpr explicit FidelityThreshold(Fidelity f) : f_th(f), w_th(fidelity_to_werner(f)) {}
    constexpr explicit FidelityThreshold(double f) : FidelityThreshold(Fidelity{f}) {}
};

// Fidelity of the pair obtained by swapping one pair per hop along a chain.
inline Fidelity end_to_end_fidelity(std::span<const Fidelity> hops) {
    if (hops.empty()) {
        throw std::invalid_argument("end_to_end_fidelity: empty hop sequence");
    }
    double w = 1.0;
    for (Fidelity f : hops) {
        w *= fidelity_to_werner(f).value();
    }
    return werner_to_fidelity(WernerParam{w});
}

// Per-hop fidelity target when the Werner budget is shared equally by L hops.
inline Fidelity equal_split_target(Fidelity f_th, int hops) {
    if (hops < 1) {
        throw std::invalid_argument("equal_split_target: hop count must be >= 1");
    }
    if (hops == 1) {
        return f_th;
    }
    const double w_th = fidelity_to_werner(f_th).value();
    return werner_to_fidelity(WernerParam{std::pow(w_th, 1.0 / hops)});
}

// Share of the Werner budget owned by `segment_hops` of a `total_hops` path.
inline WernerParam segment_budget(WernerParam w_th, int segment_hops, int total_hops) {
    if (total_hops < 1 || segment_hops < 0 || segment_hops > total_hops) {
        throw std::invalid_argument("segment_budget: need 0 <= l <= L and L >= 1");
    }
    if (segment_hops == 0) {
        return WernerParam{1.0};
    }
    if (segment_hops == total_hops) {
        return w_th;
    }
    return WernerParam{std::pow(w_th.value(), static_cast<double>(segment_hops) / total_hops)};
}

// Per-hop fidelity target for a detour of `detour_hops` hops carrying `w_seg`.
inline Fidelity detour_targets(WernerParam w_seg, int detour_hops) {
    if (detour_hops < 1) {
        throw std::invalid_argument("detour_targets: detour must have >= 1 hop");
    }
    if (detour_hops == 1) {
        return werner_to_fidelity(w_seg);
    }
    return werner_to_fidelity(WernerParam{std::pow(w_seg.value(), 1.0 / detour_hops)});
}

} // namespace qguard

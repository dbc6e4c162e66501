#pragma once

#include <compare>
#include <cstdint>

#include "qguard/werner.hpp"

namespace qguard {

using NodeId = int;
using LinkId = int;
using ReservationId = int;

inline constexpr LinkId kEndToEnd = -1;

// A realized entangled pair, either on one hop or spanning source to destination.
struct BellPair {
    LinkId hop = kEndToEnd;
    Fidelity fidelity;

    bool end_to_end() const { return hop == kEndToEnd; }
    friend bool operator==(const BellPair&, const BellPair&) = default;
};

// One reserved hop: the channels a reservation holds on a link.
struct HopRef {
    LinkId link = 0;
    ReservationId owner = 0;

    friend auto operator<=>(const HopRef&, const HopRef&) = default;
};

} // namespace qguard

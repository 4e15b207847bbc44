#pragma once

#include "fedledger/state.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace fedledger {

inline constexpr double kEarthRadiusM = 6'371'000.0;

/// Great-circle distance between micro-degree coordinates, rounded to the
/// nearest metre.
std::int64_t haversine_m(const GeoPoint& a, const GeoPoint& b);

struct Candidate {
    EvProfile ev;
    std::int64_t distance_m = 0;
};

/// Idle EVs inside the request radius that can still reach the request
/// location, nearest first, ties broken by EV id.
std::vector<Candidate> match_candidates(const FlexRequest& request, std::span<const EvProfile> fleet);

/// Lowest price wins; ties go to the earlier submission, then to the
/// lexicographically smaller fleet-manager address.
std::optional<Offer> select_lowest_bid(std::span<const Offer> offers);

}  // namespace fedledger

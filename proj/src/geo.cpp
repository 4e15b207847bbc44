#include "fedledger/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fedledger {

namespace {

double radians(std::int64_t micro_degrees) {
    return static_cast<double>(micro_degrees) / 1e6 * std::numbers::pi / 180.0;
}

bool offer_less(const Offer& a, const Offer& b) {
    if (a.price_tokens != b.price_tokens) return a.price_tokens < b.price_tokens;
    if (a.submitted_at != b.submitted_at) return a.submitted_at < b.submitted_at;
    return a.fleet_manager.hex() < b.fleet_manager.hex();
}

}  // namespace

std::int64_t haversine_m(const GeoPoint& a, const GeoPoint& b) {
    const double lat1 = radians(a.lat);
    const double lat2 = radians(b.lat);
    const double dlat = lat2 - lat1;
    const double dlon = radians(b.lon) - radians(a.lon);
    const double s1 = std::sin(dlat / 2);
    const double s2 = std::sin(dlon / 2);
    double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    h = std::clamp(h, 0.0, 1.0);
    return std::llround(2.0 * kEarthRadiusM * std::asin(std::sqrt(h)));
}

std::vector<Candidate> match_candidates(const FlexRequest& request, std::span<const EvProfile> fleet) {
    std::vector<Candidate> out;
    for (const auto& ev : fleet) {
        if (ev.status != EvStatus::idle) continue;
        auto d = haversine_m(ev.location, request.location);
        if (d > request.radius_m) continue;
        if (ev.residual_autonomy_m < d) continue;
        out.push_back({ev, d});
    }
    std::sort(out.begin(), out.end(), [](const Candidate& x, const Candidate& y) {
        if (x.distance_m != y.distance_m) return x.distance_m < y.distance_m;
        return x.ev.id < y.ev.id;
    });
    return out;
}

std::optional<Offer> select_lowest_bid(std::span<const Offer> offers) {
    if (offers.empty()) return std::nullopt;
    return *std::min_element(offers.begin(), offers.end(), offer_less);
}

}  // namespace fedledger

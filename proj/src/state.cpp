#include "fedledger/state.hpp"

#include "fedledger/enum_names.hpp"

namespace fedledger {

namespace {

using detail::EnumTable;

constexpr EnumTable<AssetKind, 3> kAssets{{
    {AssetKind::token, "token"}, {AssetKind::custody, "custody"}, {AssetKind::handover, "handover"}}};
constexpr EnumTable<EscrowStatus, 3> kEscrowStatus{{
    {EscrowStatus::locked, "locked"}, {EscrowStatus::claimed, "claimed"}, {EscrowStatus::refunded, "refunded"}}};
constexpr EnumTable<CustodyKind, 2> kCustody{{
    {CustodyKind::custody_out, "custody_out"}, {CustodyKind::custody_in, "custody_in"}}};
constexpr EnumTable<Role, 4> kRoles{{
    {Role::dso, "dso"}, {Role::fleet_manager, "fleet_manager"}, {Role::ev_user, "ev_user"}, {Role::auditor, "auditor"}}};
constexpr EnumTable<RequestScenario, 2> kScenarios{{
    {RequestScenario::day_ahead, "day_ahead"}, {RequestScenario::intraday, "intraday"}}};
constexpr EnumTable<RequestStatus, 5> kRequestStatus{{{RequestStatus::open, "open"},
                                                      {RequestStatus::closed, "closed"},
                                                      {RequestStatus::assigned, "assigned"},
                                                      {RequestStatus::settled, "settled"},
                                                      {RequestStatus::expired, "expired"}}};
constexpr EnumTable<UserType, 3> kUserTypes{{
    {UserType::commuter, "commuter"}, {UserType::fleet, "fleet"}, {UserType::casual, "casual"}}};
constexpr EnumTable<EvStatus, 3> kEvStatus{{
    {EvStatus::idle, "idle"}, {EvStatus::charging, "charging"}, {EvStatus::driving, "driving"}}};
constexpr EnumTable<SettlementOutcome, 2> kOutcomes{{
    {SettlementOutcome::paid, "paid"}, {SettlementOutcome::refunded, "refunded"}}};

template <class E>
void put_enum(Writer& w, E e) {
    w.u8(static_cast<std::uint8_t>(e));
}

void put(Writer& w, const GeoPoint& p) {
    w.i64(p.lat);
    w.i64(p.lon);
}

void put(Writer& w, const Timeslot& s) {
    w.i64(s.start);
    w.i64(s.end);
}

void put(Writer& w, const Offer& o) {
    w.str(o.request);
    w.digest(o.fleet_manager.digest);
    w.i64(o.price_tokens);
    w.i64(o.committed_wh);
    w.i64(o.submitted_at);
    w.digest(o.tx_id);
}

void put(Writer& w, const HtlcEscrow& e) {
    w.str(e.id);
    w.digest(e.payer.digest);
    w.digest(e.payee.digest);
    put_enum(w, e.asset);
    w.i64(e.amount);
    w.str(e.lot);
    w.str(e.from_segment);
    w.str(e.to_segment);
    w.digest(e.hashlock);
    w.i64(e.timelock);
    w.i64(e.locked_at);
    put_enum(w, e.status);
    w.boolean(e.preimage.has_value());
    if (e.preimage) w.digest(*e.preimage);
}

void put(Writer& w, const TokenState& t) {
    w.u32(static_cast<std::uint32_t>(t.balances.size()));
    for (const auto& [addr, bal] : t.balances) {
        w.digest(addr.digest);
        w.i64(bal);
    }
    w.i64(t.total_minted);
    w.boolean(t.minter.has_value());
    if (t.minter) w.digest(t.minter->digest);
}

void put(Writer& w, const ProvenanceState& p) {
    w.u32(static_cast<std::uint32_t>(p.records.size()));
    for (const auto& r : p.records) {
        w.digest(r.tx_id);
        w.str(r.key);
        w.str(r.platform);
        w.str(r.device);
        w.str(r.metric);
        w.str(r.unit);
        w.str(r.lot);
        w.i64(r.value);
        w.i64(r.lat);
        w.i64(r.lon);
        w.i64(r.ts);
    }
    // record_keys is derived from records and not encoded separately.
    w.u32(static_cast<std::uint32_t>(p.digests.size()));
    for (const auto& d : p.digests) {
        w.digest(d.tx_id);
        w.str(d.lot);
        w.str(d.segment);
        w.str(d.ledger);
        w.str(d.metric);
        w.digest(d.record_tx);
        w.i64(d.ts);
    }
    w.u32(static_cast<std::uint32_t>(p.lots.size()));
    for (const auto& [lot, c] : p.lots) {
        w.str(lot);
        w.str(c.segment);
        w.digest(c.holder.digest);
        w.str(c.locked_by);
        w.i64(c.registered_at);
    }
    w.u32(static_cast<std::uint32_t>(p.custody.size()));
    for (const auto& c : p.custody) {
        w.str(c.lot);
        put_enum(w, c.kind);
        w.str(c.segment);
        w.i64(c.ts);
        w.str(c.escrow);
        w.digest(c.tx_id);
    }
    w.u32(static_cast<std::uint32_t>(p.handovers.size()));
    for (const auto& h : p.handovers) {
        w.str(h.lot);
        w.str(h.from_segment);
        w.str(h.to_segment);
        w.str(h.escrow);
        w.i64(h.ts);
        w.digest(h.tx_id);
    }
}

void put(Writer& w, const MarketState& m) {
    w.i64(m.params.bid_lead_ms);
    w.i64(m.params.tolerance_bps);
    w.i64(m.params.day_ms);
    w.u32(static_cast<std::uint32_t>(m.roles.size()));
    for (const auto& [addr, role] : m.roles) {
        w.digest(addr.digest);
        put_enum(w, role);
    }
    w.u32(static_cast<std::uint32_t>(m.requests.size()));
    for (const auto& [id, r] : m.requests) {
        w.str(id);
        put_enum(w, r.scenario);
        w.i64(r.energy_wh);
        put(w, r.slot);
        put(w, r.location);
        w.i64(r.radius_m);
        w.i64(r.incentive_tokens);
        put_enum(w, r.status);
        w.digest(r.issuer.digest);
        w.i64(r.posted_at);
        w.u32(static_cast<std::uint32_t>(r.offers.size()));
        for (const auto& o : r.offers) put(w, o);
        w.boolean(r.winner.has_value());
        if (r.winner) put(w, *r.winner);
    }
    w.u32(static_cast<std::uint32_t>(m.evs.size()));
    for (const auto& [id, ev] : m.evs) {
        w.str(id);
        put_enum(w, ev.user_type);
        put(w, ev.location);
        w.i64(ev.residual_autonomy_m);
        put_enum(w, ev.status);
        w.i64(ev.battery_capacity_wh);
        w.digest(ev.owner.digest);
    }
    w.u32(static_cast<std::uint32_t>(m.meters.size()));
    for (const auto& r : m.meters) {
        w.str(r.key);
        w.str(r.device);
        w.i64(r.value);
        w.i64(r.ts);
        w.digest(r.tx_id);
    }
    w.u32(static_cast<std::uint32_t>(m.assignments.size()));
    for (const auto& [id, a] : m.assignments) {
        w.str(id);
        w.str(a.ev);
        w.str(a.station);
        w.digest(a.owner.digest);
        put(w, a.slot);
        w.i64(a.accepted_at);
        w.digest(a.tx_id);
    }
    w.u32(static_cast<std::uint32_t>(m.deliveries.size()));
    for (const auto& [id, d] : m.deliveries) {
        w.str(id);
        w.str(d.ev);
        w.str(d.station);
        w.i64(d.start);
        w.i64(d.end);
        w.i64(d.delivered_wh);
        w.u32(static_cast<std::uint32_t>(d.meter_txs.size()));
        for (const auto& t : d.meter_txs) w.digest(t);
    }
    w.u32(static_cast<std::uint32_t>(m.settlements.size()));
    for (const auto& [id, s] : m.settlements) {
        w.str(id);
        w.i64(s.delivered_wh);
        w.i64(s.committed_wh);
        w.i64(s.tolerance_bps);
        put_enum(w, s.outcome);
        w.i64(s.settled_at);
    }
}

void put(Writer& w, const AnchorState& a) {
    w.u32(static_cast<std::uint32_t>(a.by_source.size()));
    for (const auto& [source, entries] : a.by_source) {
        w.str(source);
        w.u32(static_cast<std::uint32_t>(entries.size()));
        for (const auto& e : entries) {
            w.u64(e.height);
            w.digest(e.state_root);
            w.i64(e.anchored_at);
            w.digest(e.tx_id);
        }
    }
}

void put(Writer& w, const MembershipState& m) {
    w.boolean(m.gated);
    w.boolean(m.authority.has_value());
    if (m.authority) w.digest(m.authority->digest);
    w.u32(static_cast<std::uint32_t>(m.members.size()));
    for (const auto& a : m.members) w.digest(a.digest);
}

}  // namespace

std::string_view to_string(AssetKind v) noexcept { return detail::enum_name(kAssets, v); }
std::string_view to_string(EscrowStatus v) noexcept { return detail::enum_name(kEscrowStatus, v); }
std::string_view to_string(CustodyKind v) noexcept { return detail::enum_name(kCustody, v); }
std::string_view to_string(Role v) noexcept { return detail::enum_name(kRoles, v); }
std::string_view to_string(RequestScenario v) noexcept { return detail::enum_name(kScenarios, v); }
std::string_view to_string(RequestStatus v) noexcept { return detail::enum_name(kRequestStatus, v); }
std::string_view to_string(UserType v) noexcept { return detail::enum_name(kUserTypes, v); }
std::string_view to_string(EvStatus v) noexcept { return detail::enum_name(kEvStatus, v); }
std::string_view to_string(SettlementOutcome v) noexcept { return detail::enum_name(kOutcomes, v); }

std::optional<AssetKind> asset_kind_from_string(std::string_view n) noexcept { return detail::enum_parse(kAssets, n); }
std::optional<Role> role_from_string(std::string_view n) noexcept { return detail::enum_parse(kRoles, n); }
std::optional<RequestScenario> scenario_from_string(std::string_view n) noexcept {
    return detail::enum_parse(kScenarios, n);
}
std::optional<UserType> user_type_from_string(std::string_view n) noexcept { return detail::enum_parse(kUserTypes, n); }
std::optional<EvStatus> ev_status_from_string(std::string_view n) noexcept { return detail::enum_parse(kEvStatus, n); }

std::int64_t TokenState::balance_of(const Address& who) const {
    auto it = balances.find(who);
    return it == balances.end() ? 0 : it->second;
}

std::int64_t ContractState::locked_tokens() const {
    std::int64_t sum = 0;
    for (const auto& [id, e] : escrows) {
        if (e.asset == AssetKind::token && e.status == EscrowStatus::locked) sum += e.amount;
    }
    return sum;
}

std::int64_t ContractState::accounted_tokens() const {
    std::int64_t sum = locked_tokens();
    for (const auto& [addr, bal] : token.balances) sum += bal;
    return sum;
}

void ContractState::encode(Writer& w) const {
    put(w, token);
    w.u32(static_cast<std::uint32_t>(escrows.size()));
    for (const auto& [id, e] : escrows) put(w, e);
    put(w, provenance);
    put(w, market);
    put(w, anchors);
    put(w, membership);
}

Digest ContractState::root() const {
    Writer w;
    encode(w);
    return sha256(w.data());
}

// ----------------------------------------------------------------- json

namespace {

nlohmann::json slot_json(const Timeslot& s) { return {{"start", s.start}, {"end", s.end}}; }
nlohmann::json point_json(const GeoPoint& p) { return {{"lat", p.lat}, {"lon", p.lon}}; }

}  // namespace

void to_json(nlohmann::json& j, const HtlcEscrow& v) {
    j = {{"id", v.id},
         {"payer", v.payer.hex()},
         {"payee", v.payee.hex()},
         {"asset", to_string(v.asset)},
         {"amount", v.amount},
         {"hashlock", v.hashlock.hex()},
         {"timelock", v.timelock},
         {"locked_at", v.locked_at},
         {"status", to_string(v.status)}};
    if (v.asset != AssetKind::token) {
        j["lot"] = v.lot;
        j["from_segment"] = v.from_segment;
        j["to_segment"] = v.to_segment;
    }
    if (v.preimage) j["preimage"] = v.preimage->hex();
}

void to_json(nlohmann::json& j, const Offer& v) {
    j = {{"request", v.request},
         {"fleet_manager", v.fleet_manager.hex()},
         {"price_tokens", v.price_tokens},
         {"committed_wh", v.committed_wh},
         {"submitted_at", v.submitted_at},
         {"tx_id", v.tx_id.hex()}};
}

void to_json(nlohmann::json& j, const FlexRequest& v) {
    j = {{"id", v.id},
         {"scenario", to_string(v.scenario)},
         {"energy_wh", v.energy_wh},
         {"timeslot", slot_json(v.slot)},
         {"location", point_json(v.location)},
         {"radius_m", v.radius_m},
         {"incentive_tokens", v.incentive_tokens},
         {"status", to_string(v.status)},
         {"issuer", v.issuer.hex()},
         {"posted_at", v.posted_at},
         {"offers", v.offers}};
    j["winner"] = v.winner ? nlohmann::json(*v.winner) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json& j, const EvProfile& v) {
    j = {{"id", v.id},
         {"user_type", to_string(v.user_type)},
         {"location", point_json(v.location)},
         {"residual_autonomy_m", v.residual_autonomy_m},
         {"status", to_string(v.status)},
         {"battery_capacity_wh", v.battery_capacity_wh},
         {"owner", v.owner.hex()}};
}

void to_json(nlohmann::json& j, const Assignment& v) {
    j = {{"request", v.request},
         {"ev", v.ev},
         {"station", v.station},
         {"owner", v.owner.hex()},
         {"timeslot", slot_json(v.slot)},
         {"accepted_at", v.accepted_at},
         {"tx_id", v.tx_id.hex()}};
}

void to_json(nlohmann::json& j, const ChargingRecord& v) {
    std::vector<std::string> txs;
    for (const auto& t : v.meter_txs) txs.push_back(t.hex());
    j = {{"request", v.request}, {"ev", v.ev},   {"station", v.station},           {"start", v.start},
         {"end", v.end},         {"delivered_wh", v.delivered_wh}, {"meter_txs", txs}};
}

void to_json(nlohmann::json& j, const Settlement& v) {
    j = {{"request", v.request},
         {"delivered_wh", v.delivered_wh},
         {"committed_wh", v.committed_wh},
         {"tolerance_bps", v.tolerance_bps},
         {"outcome", to_string(v.outcome)},
         {"settled_at", v.settled_at}};
}

void to_json(nlohmann::json& j, const AnchorEntry& v) {
    j = {{"height", v.height},
         {"state_root", v.state_root.hex()},
         {"anchored_at", v.anchored_at},
         {"tx_id", v.tx_id.hex()}};
}

}  // namespace fedledger

#include "fedledger/runtime.hpp"

#include "fedledger/geo.hpp"

#include <algorithm>

namespace fedledger {

namespace {

[[noreturn]] void fail(ErrorCode code) { throw Error(code); }

void require(bool cond, ErrorCode code) {
    if (!cond) fail(code);
}

// Every handler validates completely before its first mutation, so a thrown
// Error always leaves the state as it was.

// ---------------------------------------------------------------- token

CallResult token_call(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& t = s.token;
    if (c.method == "mint") {
        auto to = c.address_arg("to");
        auto amount = c.int_arg("amount");
        require(t.minter && *t.minter == ctx.submitter, ErrorCode::NotTokenAuthority);
        require(amount >= 0, ErrorCode::NegativeAmount);
        if (amount == 0) return CallResult::success();
        t.balances[to] += amount;
        t.total_minted += amount;
        return CallResult::success();
    }
    if (c.method == "transfer") {
        auto to = c.address_arg("to");
        auto amount = c.int_arg("amount");
        require(amount >= 0, ErrorCode::NegativeAmount);
        require(t.balance_of(ctx.submitter) >= amount, ErrorCode::InsufficientBalance);
        if (amount == 0) return CallResult::success();
        t.balances[ctx.submitter] -= amount;
        t.balances[to] += amount;
        return CallResult::success();
    }
    if (c.method == "balance_of") {
        return CallResult::success(std::to_string(t.balance_of(c.address_arg("who"))));
    }
    fail(ErrorCode::UnknownMethod);
}

// ----------------------------------------------------------------- htlc

HtlcEscrow& find_escrow(ContractState& s, const std::string& id) {
    auto it = s.escrows.find(id);
    require(it != s.escrows.end(), ErrorCode::UnknownEscrow);
    return it->second;
}

CallResult htlc_lock(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    HtlcEscrow e;
    e.id = c.str_arg("id");
    e.payer = ctx.submitter;
    e.payee = c.address_arg("payee");
    e.hashlock = c.digest_arg("hashlock");
    e.timelock = c.int_arg("timelock");
    e.locked_at = ctx.now;
    auto asset = asset_kind_from_string(c.opt_str("asset").value_or("token"));
    require(asset.has_value(), ErrorCode::BadArgs);
    e.asset = *asset;
    require(s.escrows.count(e.id) == 0, ErrorCode::EscrowExists);
    require(e.timelock > ctx.now, ErrorCode::TimelockInPast);

    switch (e.asset) {
        case AssetKind::token: {
            e.amount = c.int_arg("amount");
            require(e.amount >= 0, ErrorCode::NegativeAmount);
            require(s.token.balance_of(e.payer) >= e.amount, ErrorCode::InsufficientBalance);
            s.token.balances[e.payer] -= e.amount;
            break;
        }
        case AssetKind::custody: {
            e.lot = c.str_arg("lot");
            e.to_segment = c.str_arg("to_segment");
            auto it = s.provenance.lots.find(e.lot);
            require(it != s.provenance.lots.end(), ErrorCode::LotNotFound);
            require(it->second.holder == e.payer && it->second.locked_by.empty(), ErrorCode::NotCurrentHolder);
            e.from_segment = it->second.segment;
            it->second.locked_by = e.id;
            break;
        }
        case AssetKind::handover: {
            e.lot = c.str_arg("lot");
            e.from_segment = c.str_arg("from_segment");
            e.to_segment = c.str_arg("to_segment");
            break;
        }
    }
    auto id = e.id;
    s.escrows.emplace(id, std::move(e));
    return CallResult::success(id);
}

CallResult htlc_claim(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& e = find_escrow(s, c.str_arg("id"));
    require(e.status == EscrowStatus::locked, ErrorCode::NotLocked);
    require(ctx.now < e.timelock, ErrorCode::Expired);
    const auto& hex = c.str_arg("preimage");
    require(hex.size() == 64, ErrorCode::WrongPreimage);
    Preimage preimage;
    try {
        preimage = Digest::from_hex(hex);
    } catch (const Error&) {
        fail(ErrorCode::WrongPreimage);
    }
    require(sha256(preimage.view()) == e.hashlock, ErrorCode::WrongPreimage);

    switch (e.asset) {
        case AssetKind::token:
            s.token.balances[e.payee] += e.amount;
            break;
        case AssetKind::custody: {
            auto& lot = s.provenance.lots.at(e.lot);
            lot.segment = e.to_segment;
            lot.holder = e.payee;
            lot.locked_by.clear();
            s.provenance.custody.push_back({e.lot, CustodyKind::custody_out, e.from_segment, ctx.now, e.id, ctx.tx_id});
            s.provenance.custody.push_back({e.lot, CustodyKind::custody_in, e.to_segment, ctx.now, e.id, ctx.tx_id});
            break;
        }
        case AssetKind::handover:
            s.provenance.handovers.push_back({e.lot, e.from_segment, e.to_segment, e.id, ctx.now, ctx.tx_id});
            break;
    }
    e.status = EscrowStatus::claimed;
    e.preimage = preimage;
    return CallResult::success();
}

CallResult htlc_refund(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& e = find_escrow(s, c.str_arg("id"));
    require(e.status == EscrowStatus::locked, ErrorCode::NotLocked);
    require(ctx.now >= e.timelock, ErrorCode::NotYetExpired);
    switch (e.asset) {
        case AssetKind::token:
            s.token.balances[e.payer] += e.amount;
            break;
        case AssetKind::custody:
            s.provenance.lots.at(e.lot).locked_by.clear();
            break;
        case AssetKind::handover:
            break;
    }
    e.status = EscrowStatus::refunded;
    return CallResult::success();
}

CallResult htlc_call(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    if (c.method == "lock") return htlc_lock(s, c, ctx);
    if (c.method == "claim") return htlc_claim(s, c, ctx);
    if (c.method == "refund") return htlc_refund(s, c, ctx);
    fail(ErrorCode::UnknownMethod);
}

// ----------------------------------------------------------- provenance

CallResult provenance_call(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& p = s.provenance;
    if (c.method == "record") {
        ProvenanceRecord r;
        r.tx_id = ctx.tx_id;
        r.key = c.str_arg("key");
        r.platform = c.str_arg("platform");
        r.device = c.str_arg("device");
        r.metric = c.str_arg("metric");
        r.unit = c.str_arg("unit");
        r.lot = c.opt_str("lot").value_or("");
        r.value = c.opt_int("value").value_or(0);
        r.lat = c.opt_int("lat").value_or(0);
        r.lon = c.opt_int("lon").value_or(0);
        r.ts = c.int_arg("ts");
        require(p.record_keys.count(r.key) == 0, ErrorCode::DuplicateRecord);
        p.record_keys.insert(r.key);
        p.records.push_back(std::move(r));
        return CallResult::success();
    }
    if (c.method == "digest") {
        DigestEvent d;
        d.tx_id = ctx.tx_id;
        d.lot = c.str_arg("lot");
        d.segment = c.str_arg("segment");
        d.ledger = c.str_arg("ledger");
        d.metric = c.str_arg("metric");
        d.record_tx = c.digest_arg("record_tx");
        d.ts = c.int_arg("ts");
        p.digests.push_back(std::move(d));
        return CallResult::success();
    }
    if (c.method == "register_lot") {
        auto lot = c.str_arg("lot");
        auto segment = c.str_arg("segment");
        require(!lot.empty(), ErrorCode::BadArgs);
        require(p.lots.count(lot) == 0, ErrorCode::LotExists);
        p.lots.emplace(lot, LotCustody{segment, ctx.submitter, "", ctx.now});
        return CallResult::success();
    }
    fail(ErrorCode::UnknownMethod);
}

// --------------------------------------------------------------- market

bool has_role(const MarketState& m, const Address& who, Role role) {
    auto it = m.roles.find(who);
    return it != m.roles.end() && it->second == role;
}

FlexRequest& find_request(MarketState& m, const std::string& id) {
    auto it = m.requests.find(id);
    require(it != m.requests.end(), ErrorCode::UnknownRequest);
    return it->second;
}

std::int64_t in_slot_delivery(const MarketState& m, const Assignment& a, std::vector<Digest>* txs, bool* any) {
    std::int64_t milli_wh = 0;
    *any = false;
    for (const auto& r : m.meters) {
        if (r.device != a.station) continue;
        if (r.ts < a.slot.start || r.ts >= a.slot.end) continue;
        milli_wh += r.value;
        *any = true;
        if (txs) txs->push_back(r.tx_id);
    }
    return milli_wh / 1000;
}

CallResult market_post_request(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& m = s.market;
    FlexRequest r;
    auto scenario = scenario_from_string(c.str_arg("scenario"));
    require(scenario.has_value(), ErrorCode::BadArgs);
    r.scenario = *scenario;
    r.energy_wh = c.int_arg("energy_wh");
    r.slot = {c.int_arg("start"), c.int_arg("end")};
    r.location = {c.int_arg("lat"), c.int_arg("lon")};
    r.radius_m = c.opt_int("radius_m").value_or(0);
    r.incentive_tokens = c.int_arg("incentive");
    r.issuer = ctx.submitter;
    r.posted_at = ctx.now;
    r.id = c.opt_str("id").value_or("REQ-" + ctx.tx_id.hex().substr(0, 12));

    require(has_role(m, ctx.submitter, Role::dso), ErrorCode::NotDso);
    require(r.energy_wh > 0 && r.incentive_tokens > 0 && r.radius_m >= 0, ErrorCode::NonPositiveValue);
    require(r.slot.start < r.slot.end, ErrorCode::BadTimeslot);
    const auto midnight = next_midnight(ctx.now, m.params.day_ms);
    if (r.scenario == RequestScenario::day_ahead) {
        require(r.slot.start >= midnight, ErrorCode::BadTimeslot);
    } else {
        require(r.slot.start > ctx.now && r.slot.end <= midnight, ErrorCode::BadTimeslot);
    }
    require(m.requests.count(r.id) == 0, ErrorCode::RequestExists);
    auto id = r.id;
    m.requests.emplace(id, std::move(r));
    return CallResult::success(id);
}

CallResult market_post_offer(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& m = s.market;
    Offer o;
    o.request = c.str_arg("request");
    o.fleet_manager = ctx.submitter;
    o.price_tokens = c.int_arg("price");
    o.committed_wh = c.int_arg("committed_wh");
    o.submitted_at = ctx.now;
    o.tx_id = ctx.tx_id;
    require(has_role(m, ctx.submitter, Role::fleet_manager), ErrorCode::NotFleetManager);
    auto& r = find_request(m, o.request);
    require(r.status == RequestStatus::open, ErrorCode::RequestNotOpen);
    require(o.price_tokens >= 0, ErrorCode::NegativeAmount);
    require(o.price_tokens <= r.incentive_tokens, ErrorCode::OverAsk);
    require(o.committed_wh >= r.energy_wh, ErrorCode::UnderCommit);
    r.offers.push_back(std::move(o));
    return CallResult::success(std::to_string(r.offers.size() - 1));
}

CallResult market_close(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& m = s.market;
    auto& r = find_request(m, c.str_arg("request"));
    require(r.status == RequestStatus::open, ErrorCode::RequestNotOpen);
    require(ctx.now >= r.slot.start - m.params.bid_lead_ms, ErrorCode::BiddingStillOpen);
    auto winner = select_lowest_bid(r.offers);
    if (!winner) {
        r.status = RequestStatus::expired;
        return CallResult::success("no_award");
    }
    r.winner = *winner;
    r.status = RequestStatus::closed;
    return CallResult::success(winner->fleet_manager.hex());
}

CallResult market_register_ev(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& m = s.market;
    EvProfile ev;
    ev.id = c.str_arg("ev");
    auto type = user_type_from_string(c.opt_str("user_type").value_or("commuter"));
    auto status = ev_status_from_string(c.opt_str("status").value_or("idle"));
    require(type && status, ErrorCode::BadArgs);
    ev.user_type = *type;
    ev.status = *status;
    ev.location = {c.int_arg("lat"), c.int_arg("lon")};
    ev.residual_autonomy_m = c.int_arg("autonomy_m");
    ev.battery_capacity_wh = c.opt_int("capacity_wh").value_or(0);
    if (auto owner = c.opt_str("owner")) {
        require(has_role(m, ctx.submitter, Role::fleet_manager), ErrorCode::NotFleetManager);
        ev.owner = c.address_arg("owner");
    } else {
        ev.owner = ctx.submitter;
    }
    require(ev.residual_autonomy_m >= 0 && ev.battery_capacity_wh >= 0, ErrorCode::NegativeAmount);
    auto existing = m.evs.find(ev.id);
    if (existing != m.evs.end()) {
        // Only the owner or a fleet manager may update a registered EV.
        require(existing->second.owner == ctx.submitter || has_role(m, ctx.submitter, Role::fleet_manager),
                ErrorCode::NotEvOwner);
    }
    m.evs[ev.id] = ev;
    return CallResult::success(ev.id);
}

CallResult market_accept(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& m = s.market;
    auto& r = find_request(m, c.str_arg("request"));
    const auto& ev_id = c.str_arg("ev");
    const auto& station = c.str_arg("station");
    require(r.status != RequestStatus::assigned && r.status != RequestStatus::settled, ErrorCode::AlreadyAssigned);
    require(r.status == RequestStatus::closed, ErrorCode::NotAssigned);
    auto ev = m.evs.find(ev_id);
    require(ev != m.evs.end(), ErrorCode::UnknownEv);
    require(ev->second.owner == ctx.submitter, ErrorCode::NotEvOwner);
    if (r.scenario == RequestScenario::intraday) {
        std::vector<EvProfile> fleet;
        for (const auto& [id, p] : m.evs) fleet.push_back(p);
        auto candidates = match_candidates(r, fleet);
        bool found = std::any_of(candidates.begin(), candidates.end(),
                                 [&](const Candidate& cand) { return cand.ev.id == ev_id; });
        require(found, ErrorCode::NotACandidate);
    }
    m.assignments[r.id] = Assignment{r.id, ev_id, station, ctx.submitter, r.slot, ctx.now, ctx.tx_id};
    r.status = RequestStatus::assigned;
    return CallResult::success(r.id);
}

CallResult market_meter(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& m = s.market;
    MeterReading r{c.str_arg("key"), c.str_arg("device"), c.int_arg("value"), c.int_arg("ts"), ctx.tx_id};
    require(r.value >= 0, ErrorCode::NegativeAmount);
    require(m.meter_keys.count(r.key) == 0, ErrorCode::DuplicateRecord);
    m.meter_keys.insert(r.key);
    m.meters.push_back(std::move(r));
    return CallResult::success();
}

CallResult market_record_delivery(ContractState& s, const ContractCall& c, const ExecContext&) {
    auto& m = s.market;
    const auto& id = c.str_arg("request");
    find_request(m, id);
    auto a = m.assignments.find(id);
    require(a != m.assignments.end(), ErrorCode::NotAssigned);
    require(m.deliveries.count(id) == 0, ErrorCode::DuplicateRecord);
    ChargingRecord rec{id, a->second.ev, a->second.station, a->second.slot.start, a->second.slot.end, 0, {}};
    bool any = false;
    rec.delivered_wh = in_slot_delivery(m, a->second, &rec.meter_txs, &any);
    require(any, ErrorCode::NoMeterData);
    auto delivered = rec.delivered_wh;
    m.deliveries.emplace(id, std::move(rec));
    return CallResult::success(std::to_string(delivered));
}

CallResult market_settle(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& m = s.market;
    auto& r = find_request(m, c.str_arg("request"));
    require(r.status != RequestStatus::settled, ErrorCode::AlreadySettled);
    require(r.status == RequestStatus::assigned && r.winner.has_value(), ErrorCode::NotAssigned);
    require(ctx.now >= r.slot.end, ErrorCode::NotEnded);
    const auto& a = m.assignments.at(r.id);

    std::int64_t delivered = 0;
    if (auto d = m.deliveries.find(r.id); d != m.deliveries.end()) {
        delivered = d->second.delivered_wh;
    } else {
        ChargingRecord rec{r.id, a.ev, a.station, a.slot.start, a.slot.end, 0, {}};
        bool any = false;
        rec.delivered_wh = in_slot_delivery(m, a, &rec.meter_txs, &any);
        delivered = rec.delivered_wh;
        m.deliveries.emplace(r.id, std::move(rec));
    }
    Settlement st{r.id, delivered, r.winner->committed_wh, m.params.tolerance_bps, SettlementOutcome::refunded,
                  ctx.now};
    if (delivery_sufficient(delivered, st.committed_wh, st.tolerance_bps)) st.outcome = SettlementOutcome::paid;
    r.status = RequestStatus::settled;
    auto outcome = std::string(to_string(st.outcome));
    m.settlements[r.id] = st;
    return CallResult::success(outcome);
}

CallResult market_call(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    if (c.method == "grant_role") {
        auto who = c.address_arg("address");
        auto role = role_from_string(c.str_arg("role"));
        require(role.has_value(), ErrorCode::BadArgs);
        const auto& auth = s.membership.authority ? s.membership.authority : s.token.minter;
        require(auth && *auth == ctx.submitter, ErrorCode::NotAuthority);
        s.market.roles[who] = *role;
        return CallResult::success();
    }
    if (c.method == "post_request") return market_post_request(s, c, ctx);
    if (c.method == "post_offer") return market_post_offer(s, c, ctx);
    if (c.method == "close") return market_close(s, c, ctx);
    if (c.method == "register_ev") return market_register_ev(s, c, ctx);
    if (c.method == "accept") return market_accept(s, c, ctx);
    if (c.method == "meter") return market_meter(s, c, ctx);
    if (c.method == "record_delivery") return market_record_delivery(s, c, ctx);
    if (c.method == "settle") return market_settle(s, c, ctx);
    fail(ErrorCode::UnknownMethod);
}

// --------------------------------------------------------------- anchor

CallResult anchor_call(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    if (c.method != "commit") fail(ErrorCode::UnknownMethod);
    auto source = c.str_arg("source");
    auto height = c.int_arg("height");
    auto root = c.digest_arg("state_root");
    require(height >= 0, ErrorCode::BadArgs);
    auto it = s.anchors.by_source.find(source);
    if (it != s.anchors.by_source.end() && !it->second.empty()) {
        require(static_cast<std::uint64_t>(height) > it->second.back().height, ErrorCode::StaleAnchor);
    }
    s.anchors.by_source[source].push_back({static_cast<std::uint64_t>(height), root, ctx.now, ctx.tx_id});
    return CallResult::success();
}

// ----------------------------------------------------------- membership

CallResult membership_call(ContractState& s, const ContractCall& c, const ExecContext& ctx) {
    auto& m = s.membership;
    auto member = c.address_arg("member");
    require(m.gated, ErrorCode::NotPermissioned);
    require(m.authority && *m.authority == ctx.submitter, ErrorCode::NotAuthority);
    if (c.method == "add") {
        require(m.members.count(member) == 0, ErrorCode::AlreadyMember);
        m.members.insert(member);
        return CallResult::success();
    }
    if (c.method == "revoke") {
        require(m.members.count(member) == 1, ErrorCode::NotAMember);
        m.members.erase(member);
        return CallResult::success();
    }
    fail(ErrorCode::UnknownMethod);
}

}  // namespace

void CallResult::encode(Writer& w) const {
    w.boolean(ok);
    w.str(ok ? std::string_view{} : to_string(error));
    w.str(value);
}

CallResult CallResult::decode(Reader& r) {
    CallResult res;
    res.ok = r.boolean();
    auto name = r.str();
    if (!res.ok) {
        auto code = error_code_from_string(name);
        if (!code) throw Error(ErrorCode::DecodeError, "unknown error name in receipt");
        res.error = *code;
    } else if (!name.empty()) {
        throw Error(ErrorCode::DecodeError, "successful receipt carries an error name");
    }
    res.value = r.str();
    return res;
}

CallResult execute_call(ContractState& state, const ContractCall& call, const ExecContext& ctx) {
    try {
        const auto& m = state.membership;
        bool authority_call = call.contract == ContractKind::membership && m.authority && *m.authority == ctx.submitter;
        if (!authority_call && !m.admits(ctx.submitter)) return CallResult::failure(ErrorCode::NotMember);

        switch (call.contract) {
            case ContractKind::token: return token_call(state, call, ctx);
            case ContractKind::htlc: return htlc_call(state, call, ctx);
            case ContractKind::provenance: return provenance_call(state, call, ctx);
            case ContractKind::market: return market_call(state, call, ctx);
            case ContractKind::anchor: return anchor_call(state, call, ctx);
            case ContractKind::membership: return membership_call(state, call, ctx);
        }
        return CallResult::failure(ErrorCode::UnknownContract);
    } catch (const Error& e) {
        return CallResult::failure(e.code());
    }
}

std::pair<ContractState, CallResult> apply_call(const ContractState& state, const ContractCall& call,
                                                const ExecContext& ctx) {
    ContractState next = state;
    auto result = execute_call(next, call, ctx);
    return {std::move(next), std::move(result)};
}

std::int64_t next_midnight(std::int64_t now, std::int64_t day_ms) {
    auto day = now >= 0 ? now / day_ms : (now - day_ms + 1) / day_ms;
    return (day + 1) * day_ms;
}

bool delivery_sufficient(std::int64_t delivered_wh, std::int64_t committed_wh, std::int64_t tolerance_bps) {
    return static_cast<__int128>(delivered_wh) * 10'000 >= static_cast<__int128>(committed_wh) * (10'000 - tolerance_bps);
}

}  // namespace fedledger

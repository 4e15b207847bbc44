#include "fedledger/energy.hpp"

#include "fedledger/error.hpp"

namespace fedledger {

void PowerForecast::validate() const {
    if (slot_ms <= 0) throw Error(ErrorCode::BadArgs, "slot_ms must be positive");
    if (production_wh.size() != consumption_wh.size())
        throw Error(ErrorCode::BadArgs, "production and consumption series differ in length");
    for (std::size_t i = 0; i < production_wh.size(); ++i) {
        if (production_wh[i] < 0 || consumption_wh[i] < 0) throw Error(ErrorCode::BadArgs, "negative forecast entry");
    }
}

void from_json(const nlohmann::json& j, PowerForecast& f) {
    f.start_ms = j.value("start_ms", std::int64_t{0});
    f.slot_ms = j.value("slot_ms", std::int64_t{3'600'000});
    f.production_wh = j.at("production_wh").get<std::vector<std::int64_t>>();
    f.consumption_wh = j.at("consumption_wh").get<std::vector<std::int64_t>>();
}

std::vector<SurplusSlot> detect_reverse_power_flow(const PowerForecast& f) {
    f.validate();
    std::vector<SurplusSlot> out;
    for (std::size_t i = 0; i < f.production_wh.size(); ++i) {
        if (f.production_wh[i] > f.consumption_wh[i]) out.push_back({i, f.production_wh[i] - f.consumption_wh[i]});
    }
    return out;
}

std::int64_t incentive_for(std::int64_t surplus_wh, const TokenRate& rate) {
    if (rate.tokens <= 0 || rate.per_wh <= 0) throw Error(ErrorCode::BadArgs, "token rate must be positive");
    auto num = static_cast<__int128>(surplus_wh) * rate.tokens;
    return static_cast<std::int64_t>((num + rate.per_wh - 1) / rate.per_wh);
}

std::vector<FlexRequest> plan_day_ahead(const PowerForecast& f, const GeoPoint& zone, std::int64_t radius_m,
                                        const TokenRate& rate) {
    if (f.production_wh.empty()) throw Error(ErrorCode::EmptyForecast);
    std::vector<FlexRequest> out;
    for (const auto& s : detect_reverse_power_flow(f)) {
        FlexRequest r;
        r.scenario = RequestScenario::day_ahead;
        r.slot.start = f.start_ms + static_cast<std::int64_t>(s.slot) * f.slot_ms;
        r.slot.end = r.slot.start + f.slot_ms;
        r.id = "DA-" + std::to_string(r.slot.start);
        r.energy_wh = s.surplus_wh;
        r.location = zone;
        r.radius_m = radius_m;
        r.incentive_tokens = incentive_for(s.surplus_wh, rate);
        out.push_back(std::move(r));
    }
    return out;
}

ContractCall post_request_call(const FlexRequest& r) {
    ContractCall c{ContractKind::market, "post_request", {}};
    if (!r.id.empty()) c.args["id"] = r.id;
    c.args["scenario"] = std::string(to_string(r.scenario));
    c.args["energy_wh"] = r.energy_wh;
    c.args["start"] = r.slot.start;
    c.args["end"] = r.slot.end;
    c.args["lat"] = r.location.lat;
    c.args["lon"] = r.location.lon;
    c.args["radius_m"] = r.radius_m;
    c.args["incentive"] = r.incentive_tokens;
    return c;
}

ContractCall post_offer_call(const std::string& request, std::int64_t price, std::int64_t committed_wh) {
    return {ContractKind::market, "post_offer", {{"request", request}, {"price", price}, {"committed_wh", committed_wh}}};
}

ContractCall close_call(const std::string& request) { return {ContractKind::market, "close", {{"request", request}}}; }

ContractCall register_ev_call(const EvProfile& ev, bool on_behalf) {
    ContractCall c{ContractKind::market, "register_ev", {}};
    c.args["ev"] = ev.id;
    c.args["user_type"] = std::string(to_string(ev.user_type));
    c.args["status"] = std::string(to_string(ev.status));
    c.args["lat"] = ev.location.lat;
    c.args["lon"] = ev.location.lon;
    c.args["autonomy_m"] = ev.residual_autonomy_m;
    c.args["capacity_wh"] = ev.battery_capacity_wh;
    if (on_behalf) c.args["owner"] = ev.owner.hex();
    return c;
}

ContractCall accept_call(const std::string& request, const std::string& ev, const std::string& station) {
    return {ContractKind::market, "accept", {{"request", request}, {"ev", ev}, {"station", station}}};
}

ContractCall record_delivery_call(const std::string& request) {
    return {ContractKind::market, "record_delivery", {{"request", request}}};
}

ContractCall settle_request_call(const std::string& request) {
    return {ContractKind::market, "settle", {{"request", request}}};
}

void from_json(const nlohmann::json& j, MarketConfig& c) {
    c.ledger = j.at("ledger").get<std::string>();
    c.reward_ledger = j.at("reward_ledger").get<std::string>();
    c.dso = j.at("dso").get<std::string>();
    c.reward_pool = j.at("reward_pool").get<std::string>();
    c.reward_share_bps = j.value("reward_share_bps", c.reward_share_bps);
    c.settle_window_ms = j.value("settle_window_ms", c.settle_window_ms);
    if (c.reward_share_bps < 0 || c.reward_share_bps > 10'000 || c.settle_window_ms < 0)
        throw Error(ErrorCode::BadConfig, "bad market settlement parameters");
}

void to_json(nlohmann::json& j, const SettlementRun& r) {
    j = {{"request", r.request},
         {"price", r.price},
         {"reward", r.reward},
         {"onchain_outcome", r.onchain ? nlohmann::json(to_string(*r.onchain)) : nlohmann::json(nullptr)},
         {"start_error", r.start_error ? nlohmann::json(to_string(*r.start_error)) : nlohmann::json(nullptr)},
         {"swap", r.swap}};
}

// ----------------------------------------------------------- EnergyMarket

EnergyMarket::EnergyMarket(Federation& fed, MarketConfig config, const WalletBook& wallets)
    : fed_(fed), config_(std::move(config)), wallets_(wallets) {
    if (config_.ledger == config_.reward_ledger)
        throw Error(ErrorCode::BadConfig, "market and reward ledgers must differ");
}

Receipt EnergyMarket::submit(Wallet& who, ContractCall call) {
    return fed_.submit(who.sign(config_.ledger, std::move(call), fed_.now()));
}

void EnergyMarket::set_faults(const std::string& request, FaultSchedule faults) { faults_[request] = faults; }

void EnergyMarket::start_settlement(const FlexRequest& r, const Assignment& a) {
    Running running;
    running.run.request = r.id;
    running.run.price = r.winner->price_tokens;
    running.run.reward = r.incentive_tokens * config_.reward_share_bps / 10'000;
    running.run.swap.swap = "settle/" + r.id;

    Wallet& dso = wallets_.get(config_.dso);
    Wallet& pool = wallets_.get(config_.reward_pool);
    Wallet* fleet = wallets_.find(r.winner->fleet_manager);

    SwapPlan plan;
    plan.id = "settle/" + r.id;
    plan.a = SwapLeg{config_.ledger, dso.address(), r.winner->fleet_manager, AssetKind::token, running.run.price, "", "", ""};
    plan.b = SwapLeg{config_.reward_ledger, pool.address(), a.owner, AssetKind::token, running.run.reward, "", "", ""};
    plan.secret_holder = dso.address();
    plan.delta = config_.delta;
    auto secret = sha256("settlement-secret:" + plan.id + ":" + dso.address().hex());
    plan.hashlock = sha256(secret.view());
    plan.timelock_b = std::max(r.slot.end + config_.settle_window_ms, fed_.now()) + 6 * plan.delta;
    plan.timelock_a = plan.timelock_b + 2 * plan.delta;

    // The reveal waits for the market contract's verdict: paid opens it,
    // refunded closes it for good.
    const std::string id = r.id;
    const std::string ledger = config_.ledger;
    Federation* fed = &fed_;
    RevealGate gate = [fed, id, ledger]() {
        return fed->ledger(ledger).with_state([&](const ContractState& s) {
            auto it = s.market.settlements.find(id);
            if (it == s.market.settlements.end()) return GateState::pending;
            return it->second.outcome == SettlementOutcome::paid ? GateState::open : GateState::closed;
        });
    };
    FaultSchedule faults;
    if (auto f = faults_.find(r.id); f != faults_.end()) faults = f->second;
    try {
        running.driver = std::make_unique<SwapDriver>(fed_, plan, SwapParties{&dso, &pool, &dso, fleet ? fleet : &dso},
                                                      secret, faults, std::move(gate));
        running.driver->start();
    } catch (const Error& e) {
        running.run.start_error = e.code();
        running.driver.reset();
    }
    fed_.events().append("settlement_started", running.run);
    settlements_.emplace(r.id, std::move(running));
}

void EnergyMarket::tick() {
    auto [assigned, outcomes] = fed_.ledger(config_.ledger).with_state([&](const ContractState& s) {
        std::vector<std::pair<FlexRequest, Assignment>> fresh;
        std::map<std::string, SettlementOutcome> done;
        for (const auto& [id, a] : s.market.assignments) {
            if (settlements_.count(id)) continue;
            const auto& r = s.market.requests.at(id);
            if (r.winner) fresh.emplace_back(r, a);
        }
        for (const auto& [id, st] : s.market.settlements) done.emplace(id, st.outcome);
        return std::make_pair(fresh, done);
    });
    for (const auto& [r, a] : assigned) start_settlement(r, a);
    for (auto& [id, running] : settlements_) {
        if (auto it = outcomes.find(id); it != outcomes.end() && !running.run.onchain) {
            running.run.onchain = it->second;
            fed_.events().append("request_updated", {{"request", id}, {"settlement", to_string(it->second)}});
        }
        if (!running.driver || running.driver->terminal()) continue;
        running.driver->poll();
        running.run.swap = running.driver->status();
        if (running.driver->terminal()) fed_.events().append("settlement_finished", running.run);
    }
}

std::optional<std::int64_t> EnergyMarket::next_wakeup() const {
    std::optional<std::int64_t> t;
    for (const auto& [id, running] : settlements_) {
        if (!running.driver || running.driver->terminal()) continue;
        if (auto w = running.driver->next_wakeup()) t = t ? std::min(*t, *w) : *w;
    }
    return t;
}

bool EnergyMarket::settlements_idle() const {
    for (const auto& [id, running] : settlements_) {
        if (running.driver && !running.driver->terminal()) return false;
    }
    return true;
}

std::vector<FlexRequest> EnergyMarket::requests() const {
    return fed_.ledger(config_.ledger).with_state([](const ContractState& s) {
        std::vector<FlexRequest> out;
        for (const auto& [id, r] : s.market.requests) out.push_back(r);
        return out;
    });
}

std::optional<FlexRequest> EnergyMarket::request(const std::string& id) const {
    return fed_.ledger(config_.ledger).with_state([&](const ContractState& s) -> std::optional<FlexRequest> {
        auto it = s.market.requests.find(id);
        if (it == s.market.requests.end()) return std::nullopt;
        return it->second;
    });
}

std::vector<Candidate> EnergyMarket::candidates(const std::string& request) const {
    return fed_.ledger(config_.ledger).with_state([&](const ContractState& s) {
        auto it = s.market.requests.find(request);
        if (it == s.market.requests.end()) throw Error(ErrorCode::UnknownRequest, request);
        std::vector<EvProfile> fleet;
        for (const auto& [id, ev] : s.market.evs) fleet.push_back(ev);
        return match_candidates(it->second, fleet);
    });
}

std::vector<SettlementRun> EnergyMarket::settlement_runs() const {
    std::vector<SettlementRun> out;
    for (const auto& [id, running] : settlements_) out.push_back(running.run);
    return out;
}

}  // namespace fedledger

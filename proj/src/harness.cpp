#include "fedledger/harness.hpp"

#include "fedledger/error.hpp"
#include "fedledger/tamper.hpp"

#include <fstream>
#include <sstream>
#include <unistd.h>

namespace fedledger {

void to_json(nlohmann::json& j, const AssertionOutcome& a) {
    j = {{"step", a.step}, {"line", a.line}, {"check", a.check}, {"ok", a.ok}, {"detail", a.detail}};
}

void to_json(nlohmann::json& j, const ActionOutcome& a) {
    j = {{"step", a.step},
         {"at", a.at},
         {"action", a.action},
         {"ok", a.ok},
         {"error", a.error ? nlohmann::json(to_string(*a.error)) : nlohmann::json(nullptr)},
         {"detail", a.detail}};
}

namespace {

std::string str(const nlohmann::json& args, const char* key) {
    auto it = args.find(key);
    if (it == args.end() || !it->is_string()) throw Error(ErrorCode::SchemaError, std::string("expected string '") + key + "'");
    return it->get<std::string>();
}

std::int64_t num(const nlohmann::json& args, const char* key) {
    auto it = args.find(key);
    if (it == args.end() || !it->is_number_integer())
        throw Error(ErrorCode::SchemaError, std::string("expected integer '") + key + "'");
    return it->get<std::int64_t>();
}

std::int64_t num_or(const nlohmann::json& args, const char* key, std::int64_t fallback) {
    return args.contains(key) ? num(args, key) : fallback;
}

nlohmann::json load_json_arg(const nlohmann::json& v, const std::filesystem::path& base) {
    if (!v.is_string()) return v;
    std::ifstream in(base / v.get<std::string>());
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + v.get<std::string>());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, e.what());
    }
}

LedgerConfig to_config(const LedgerSpec& spec, const WalletBook& wallets) {
    LedgerConfig c;
    c.id = spec.id;
    c.kind = spec.kind;
    for (const auto& m : spec.members) c.members.insert(wallets.get(m).address());
    if (spec.authority) c.authority = wallets.get(*spec.authority).address();
    if (spec.minter) c.minter = wallets.get(*spec.minter).address();
    c.restricted_read = spec.restricted_read;
    c.market = spec.market;
    return c;
}

}  // namespace

// -------------------------------------------------------------- Simulation

Simulation::Simulation(Scenario scenario)
    : scenario_(std::move(scenario)), fed_(scenario_.start_ms), rng_(scenario_.seed) {
    build();
}

Simulation::~Simulation() = default;

void Simulation::build() {
    for (const auto& a : scenario_.actors) wallets_.add(a.name, scenario_.seed);
    for (const auto& spec : scenario_.ledgers) fed_.add_ledger(to_config(spec, wallets_));
    fed_.on_seal([this](const Ledger& l, const Block& b) { on_seal(l, b); });

    WalletLookup lookup = [this](const std::string& name) -> Wallet& { return wallets_.get(name); };
    if (scenario_.foodchain) {
        foodchain_ = std::make_unique<FoodChain>(fed_, *scenario_.foodchain, lookup, scenario_.rules, scenario_.seed);
    }
    if (scenario_.market) market_ = std::make_unique<EnergyMarket>(fed_, *scenario_.market, wallets_);
}

void Simulation::on_seal(const Ledger& l, const Block& b) {
    ++seals_checked_;
    auto report = verify_chain(l.config(), l.blocks());
    if (!report.ok) {
        invariant_failures_.push_back(
            {{"ledger", l.id()}, {"height", b.height}, {"check", "chain_valid"}, {"reason", report.reason}});
    }
    if (!l.with_state([](const ContractState& s) { return s.conserves_tokens(); })) {
        invariant_failures_.push_back({{"ledger", l.id()}, {"height", b.height}, {"check", "conservation"}, {"reason", ""}});
    }
    if (!market_ || l.id() != market_->config().ledger) return;

    // Derived events: every request touched by this block, in block order.
    std::vector<std::string> touched;
    for (std::size_t i = 0; i < b.transactions.size(); ++i) {
        const auto& call = b.transactions[i].payload;
        if (call.contract != ContractKind::market || !b.results[i].ok) continue;
        std::string id;
        if (call.method == "post_request") {
            id = b.results[i].value;
        } else if (auto r = call.opt_str("request")) {
            id = *r;
        }
        if (!id.empty() && std::find(touched.begin(), touched.end(), id) == touched.end()) touched.push_back(id);
    }
    for (const auto& id : touched) {
        auto status = l.with_state([&](const ContractState& s) -> std::string {
            auto it = s.market.requests.find(id);
            return it == s.market.requests.end() ? "" : std::string(to_string(it->second.status));
        });
        fed_.events().append("request_updated", {{"request", id}, {"status", status}, {"height", b.height}});
    }
}

void Simulation::advance_until(std::int64_t t) {
    while (market_) {
        auto w = market_->next_wakeup();
        if (!w || *w > t) break;
        fed_.advance_to(*w);
        market_->tick();
    }
    fed_.advance_to(t);
}

void Simulation::after_change() {
    if (market_) market_->tick();
    if (scenario_.anchoring) {
        const auto& a = *scenario_.anchoring;
        auto h = fed_.ledger(a.source).height();
        if (h >= last_anchored_ + a.every) {
            try {
                anchor_checkpoint(fed_, wallets_.get(a.signer), a.source, a.public_ledger);
                last_anchored_ = h;
            } catch (const Error& e) {
                invariant_failures_.push_back(
                    {{"ledger", a.public_ledger}, {"height", h}, {"check", "anchoring"}, {"reason", e.what()}});
            }
        }
    }
}

void Simulation::run() {
    std::lock_guard lock(mu_);
    for (const auto& step : scenario_.script) run_step(step);
    drain();
}

void Simulation::drain() {
    std::lock_guard lock(mu_);
    while (market_) {
        auto w = market_->next_wakeup();
        if (!w) break;
        fed_.advance_to(*w);
        market_->tick();
    }
    after_change();
}

void Simulation::step_ticks(std::int64_t ticks) {
    std::lock_guard lock(mu_);
    for (std::int64_t i = 0; i < ticks; ++i) {
        advance_until(fed_.now() + scenario_.tick_ms);
        fed_.seal_pending();
        after_change();
    }
}

void Simulation::seal(const std::optional<std::string>& ledger) {
    std::lock_guard lock(mu_);
    if (ledger) {
        fed_.seal(*ledger);
    } else {
        fed_.seal_pending();
    }
    after_change();
}

Digest Simulation::submit(const std::string& actor, const std::string& ledger, ContractCall call) {
    std::lock_guard lock(mu_);
    Wallet& w = wallets_.get(actor);
    auto& l = fed_.ledger(ledger);
    auto dry = l.dry_run(call, w.address(), fed_.now());
    if (!dry.ok) throw Error(dry.error);
    return fed_.submit(w.sign(ledger, std::move(call), fed_.now())).tx_id;
}

CallResult Simulation::call_and_seal(const std::string& actor, const std::string& ledger, ContractCall call) {
    auto tx = wallets_.get(actor).sign(ledger, std::move(call), fed_.now());
    fed_.submit(tx);
    fed_.seal(ledger);
    const auto& l = fed_.ledger(ledger);
    auto loc = l.locate(tx.id);
    if (!loc) throw Error(ErrorCode::TxNotFound);
    auto result = l.block(loc->height).results[loc->index];
    if (!result.ok) throw Error(result.error);
    return result;
}

void Simulation::run_step(const ScriptStep& step) {
    std::lock_guard lock(mu_);
    advance_until(step.at);
    ActionOutcome out{step.index, fed_.now(), step.action, true, std::nullopt, ""};
    if (step.action == "assert") {
        assertions_.push_back(do_assert(step));
        actions_.push_back(out);
        return;
    }
    std::optional<std::string> expect;
    if (auto it = step.args.find("expect_error"); it != step.args.end() && it->is_string()) expect = it->get<std::string>();
    try {
        execute(step);
        if (expect) {
            out.ok = false;
            out.detail = "expected " + *expect + ", action succeeded";
        }
    } catch (const Error& e) {
        out.error = e.code();
        if (!expect || *expect != to_string(e.code())) {
            out.ok = false;
            out.detail = e.what();
        }
    }
    after_change();
    actions_.push_back(std::move(out));
}

void Simulation::execute(const ScriptStep& step) {
    const auto& a = step.args;
    const auto& act = step.action;
    auto addr = [&](const char* key) { return wallets_.get(str(a, key)).address().hex(); };

    if (act == "mint" || act == "transfer") {
        call_and_seal(str(a, "by"), str(a, "ledger"),
                      {ContractKind::token, act, {{"to", addr("to")}, {"amount", num(a, "amount")}}});
    } else if (act == "grant_role") {
        call_and_seal(str(a, "by"), str(a, "ledger"),
                      {ContractKind::market, "grant_role", {{"address", addr("actor")}, {"role", str(a, "role")}}});
    } else if (act == "membership") {
        call_and_seal(str(a, "by"), str(a, "ledger"), {ContractKind::membership, str(a, "op"), {{"member", addr("member")}}});
    } else if (act == "register_lot") {
        foodchain_->register_lot(str(a, "lot"), a.value("segment", std::string("SF")));
    } else if (act == "ingest") {
        do_ingest(a);
    } else if (act == "transfer_custody") {
        do_transfer_custody(a);
    } else if (act == "seal") {
        if (a.contains("ledger")) {
            fed_.seal(str(a, "ledger"));
        } else {
            fed_.seal_pending();
        }
    } else if (act == "advance") {
        advance_until(fed_.now() + num_or(a, "by_ms", 0));
    } else if (act == "anchor") {
        const auto& anc = *scenario_.anchoring;
        auto cp = anchor_checkpoint(fed_, wallets_.get(anc.signer), anc.source, anc.public_ledger);
        last_anchored_ = cp.height;
    } else if (act == "post_request") {
        FlexRequest r;
        r.id = str(a, "id");
        auto sc = scenario_from_string(str(a, "scenario"));
        if (!sc) throw Error(ErrorCode::BadArgs, "unknown request scenario");
        r.scenario = *sc;
        r.energy_wh = num(a, "energy_wh");
        r.slot = {num(a, "start"), num(a, "end")};
        r.location = {num(a, "lat"), num(a, "lon")};
        r.radius_m = num_or(a, "radius_m", 0);
        r.incentive_tokens = num(a, "incentive");
        call_and_seal(str(a, "by"), market_->config().ledger, post_request_call(r));
    } else if (act == "post_offer") {
        call_and_seal(str(a, "by"), market_->config().ledger,
                      post_offer_call(str(a, "request"), num(a, "price"), num(a, "committed_wh")));
    } else if (act == "close") {
        call_and_seal(str(a, "by"), market_->config().ledger, close_call(str(a, "request")));
    } else if (act == "register_ev") {
        EvProfile ev;
        ev.id = str(a, "ev");
        auto type = user_type_from_string(a.value("user_type", std::string("commuter")));
        auto status = ev_status_from_string(a.value("status", std::string("idle")));
        if (!type || !status) throw Error(ErrorCode::BadArgs, "bad EV user type or status");
        ev.user_type = *type;
        ev.status = *status;
        ev.location = {num(a, "lat"), num(a, "lon")};
        ev.residual_autonomy_m = num(a, "autonomy_m");
        ev.battery_capacity_wh = num_or(a, "capacity_wh", 0);
        bool on_behalf = a.contains("owner");
        if (on_behalf) ev.owner = wallets_.get(str(a, "owner")).address();
        call_and_seal(str(a, "by"), market_->config().ledger, register_ev_call(ev, on_behalf));
    } else if (act == "accept") {
        call_and_seal(str(a, "by"), market_->config().ledger,
                      accept_call(str(a, "request"), str(a, "ev"), str(a, "station")));
    } else if (act == "record_delivery") {
        call_and_seal(str(a, "by"), market_->config().ledger, record_delivery_call(str(a, "request")));
    } else if (act == "settle") {
        call_and_seal(str(a, "by"), market_->config().ledger, settle_request_call(str(a, "request")));
    } else if (act == "plan_day_ahead") {
        do_plan_day_ahead(a);
    } else if (act == "inject_fault") {
        do_fault(a);
    } else {
        throw Error(ErrorCode::SchemaError, "unknown action " + act);
    }
}

void Simulation::do_ingest(const nlohmann::json& a) {
    auto platform = str(a, "platform");
    std::vector<std::string> lines;
    if (a.contains("lines")) {
        for (const auto& l : a["lines"]) lines.push_back(l.is_string() ? l.get<std::string>() : l.dump());
    } else {
        std::ifstream in(scenario_.base_dir / str(a, "file"));
        if (!in) throw Error(ErrorCode::IoError, "cannot open " + str(a, "file"));
        for (std::string line; std::getline(in, line);) lines.push_back(line);
    }
    auto result = ingestor_.ingest_lines(lines, platform);

    // Seeded loss on the platform feed, applied after validation.
    std::vector<SensorEvent> kept;
    std::size_t dropped = 0;
    auto ppm = drop_ppm_.count(platform) ? drop_ppm_.at(platform) : 0;
    for (auto& e : result.accepted) {
        if (ppm > 0 && static_cast<std::int64_t>(rng_() % 1'000'000) < ppm) {
            ++dropped;
            continue;
        }
        kept.push_back(std::move(e));
    }

    SubmissionReport sub;
    if (foodchain_) {
        sub = foodchain_->record_observations(kept);
    } else {
        std::vector<MappedCall> mapped;
        for (const auto& e : kept) {
            try {
                mapped.push_back(map_event(e, scenario_.rules));
            } catch (const Error& err) {
                sub.failures.push_back({"", e.idempotency_key().hex(), err.code()});
            }
        }
        auto flushed = flush_batch(std::move(mapped), fed_, [this](const std::string& n) -> Wallet& { return wallets_.get(n); });
        flushed.failures.insert(flushed.failures.begin(), sub.failures.begin(), sub.failures.end());
        sub = std::move(flushed);
        for (const auto& [ledger, n] : sub.accepted) fed_.seal(ledger);
    }
    std::map<std::string, std::size_t> rejected;
    for (const auto& r : result.rejected) ++rejected[std::string(to_string(r.reason))];
    nlohmann::json record{{"platform", platform},
                          {"lines", lines.size()},
                          {"accepted", result.accepted.size()},
                          {"dropped", dropped},
                          {"rejected", rejected},
                          {"submitted", sub.accepted},
                          {"failures", sub.failures}};
    fed_.events().append("ingest", record);
    ingestion_.push_back(std::move(record));
}

void Simulation::do_transfer_custody(const nlohmann::json& a) {
    auto lot = str(a, "lot");
    FaultSchedule faults;
    if (auto it = lot_faults_.find(lot); it != lot_faults_.end()) {
        faults = it->second;
        lot_faults_.erase(it);  // one-shot: a retry runs fault-free
    }
    auto t = foodchain_->transfer_custody(lot, str(a, "from"), str(a, "to"), faults);
    custody_.push_back(t);
}

void Simulation::do_plan_day_ahead(const nlohmann::json& a) {
    auto forecast = load_json_arg(a.at("forecast"), scenario_.base_dir).get<PowerForecast>();
    TokenRate rate;
    if (a.contains("rate")) {
        rate.tokens = num_or(a["rate"], "tokens", rate.tokens);
        rate.per_wh = num_or(a["rate"], "per_wh", rate.per_wh);
    }
    auto requests = plan_day_ahead(forecast, {num_or(a, "lat", 0), num_or(a, "lon", 0)}, num_or(a, "radius_m", 0), rate);
    for (const auto& r : requests) call_and_seal(str(a, "by"), market_->config().ledger, post_request_call(r));
}

FaultSchedule& Simulation::faults_for(const nlohmann::json& a) {
    if (a.contains("lot")) return lot_faults_[str(a, "lot")];
    if (a.contains("request")) return request_faults_[str(a, "request")];
    throw Error(ErrorCode::BadTarget, "fault needs a 'lot' or 'request' target");
}

void Simulation::do_fault(const nlohmann::json& a) {
    auto kind = str(a, "kind");
    if (kind == "drop_events") {
        auto pct = num(a, "percent");
        if (pct < 0 || pct > 100) throw Error(ErrorCode::BadTarget, "percent out of range");
        drop_ppm_[str(a, "platform")] = pct * 10'000;
        return;
    }
    if (kind == "tamper_block") return do_tamper(a);

    auto step = num(a, "step");
    if (step < 1 || step > 4) throw Error(ErrorCode::BadTarget, "protocol steps are numbered 1 to 4");
    auto& f = faults_for(a);
    auto& s = f.steps[static_cast<std::size_t>(step - 1)];
    if (kind == "crash_coordinator_at_step") {
        s = {StepFaultKind::crash, 0};
    } else {
        s = {StepFaultKind::delay, num(a, "delay_ms")};
    }
    if (a.contains("slow_party")) {
        auto p = str(a, "slow_party");
        if (p != "initiator" && p != "responder") throw Error(ErrorCode::BadTarget, "slow_party");
        f.slow_party = p == "initiator" ? Party::initiator : Party::responder;
    }
    if (a.contains("request") && market_) market_->set_faults(str(a, "request"), f);
}

void Simulation::do_tamper(const nlohmann::json& a) {
    auto id = str(a, "ledger");
    const auto& l = fed_.ledger(id);
    auto height = static_cast<std::uint64_t>(num(a, "height"));
    if (height > l.height()) throw Error(ErrorCode::BadTarget, "no block at that height");
    auto mode = a.value("mode", std::string("payload"));
    auto mask = static_cast<std::uint8_t>(num_or(a, "mask", 1));
    if (mask == 0) throw Error(ErrorCode::BadTarget, "mask must be nonzero");

    // Work on a private copy of the persisted chain; the live ledger is never touched.
    auto dir = std::filesystem::temp_directory_path() /
               ("fedledger-tamper-" + std::to_string(::getpid()) + "-" + std::to_string(tamper_.size()));
    std::filesystem::create_directories(dir);
    auto chain_file = dir / (id + ".chain");
    auto sidecar = dir / (id + ".json");
    nlohmann::json record{{"ledger", id}, {"height", height}, {"mode", mode}, {"mask", mask}};
    try {
        auto blocks = l.blocks();
        write_chain(dir, l.config(), blocks);
        auto bytes = encode_chain(blocks);
        auto base = block_file_offset(bytes, height);
        std::size_t within = 0;
        if (mode == "payload") {
            within = payload_int_offset(blocks[height], static_cast<std::size_t>(num_or(a, "tx", 0)));
        } else if (mode == "byte") {
            within = static_cast<std::size_t>(num_or(a, "offset", 0));
            if (within >= blocks[height].encode().size()) throw Error(ErrorCode::BadTarget, "offset past block end");
        } else {
            throw Error(ErrorCode::BadTarget, "mode must be payload or byte");
        }
        flip_byte_in_file(chain_file, base + within, mask);
        record["offset"] = within;
        record["chain"] = verify_chain_file(chain_file, sidecar);

        if (scenario_.anchoring && scenario_.anchoring->source == id) {
            auto loaded = load_chain(chain_file, sidecar);
            auto checkpoints = read_checkpoints(fed_.ledger(scenario_.anchoring->public_ledger), id);
            try {
                record["anchors"] = verify_anchors(loaded.config, loaded.blocks, checkpoints);
            } catch (const Error& e) {
                record["anchors"] = {{"error", to_string(e.code())}};
            }
        }
    } catch (...) {
        std::filesystem::remove_all(dir);
        throw;
    }
    std::filesystem::remove_all(dir);
    fed_.events().append("tamper", record);
    tamper_.push_back(std::move(record));
}

TraceReport Simulation::trace(const std::string& lot) {
    if (!foodchain_) throw Error(ErrorCode::LotNotFound, "no food chain configured");
    return foodchain_->trace_lot(lot);
}

AssertionOutcome Simulation::do_assert(const ScriptStep& step) {
    const auto& a = step.args;
    AssertionOutcome out{step.index, step.line, a.value("check", std::string()), false, ""};
    auto expect_eq = [&](const nlohmann::json& actual) {
        const auto& want = a.at("equals");
        out.ok = actual == want;
        out.detail = "expected " + want.dump() + ", got " + actual.dump();
    };
    try {
        const auto& check = out.check;
        if (check == "balance") {
            auto who = wallets_.get(str(a, "actor")).address();
            expect_eq(fed_.ledger(str(a, "ledger")).with_state([&](const ContractState& s) { return s.token.balance_of(who); }));
        } else if (check == "trace_verdict") {
            expect_eq(std::string(to_string(trace(str(a, "lot")).verdict)));
        } else if (check == "handovers") {
            expect_eq(trace(str(a, "lot")).handovers);
        } else if (check == "violations") {
            auto report = trace(str(a, "lot"));
            std::size_t n = 0;
            for (const auto& v : report.violations) {
                if (a.contains("metric") && v.metric != str(a, "metric")) continue;
                if (a.contains("segment") && v.segment != str(a, "segment")) continue;
                ++n;
            }
            expect_eq(n);
        } else if (check == "readings") {
            auto n = trace(str(a, "lot")).readings.size();
            if (a.contains("equals")) {
                expect_eq(n);
            } else {
                auto lo = static_cast<std::size_t>(num_or(a, "at_least", 0));
                auto hi = static_cast<std::size_t>(num_or(a, "at_most", static_cast<std::int64_t>(n)));
                out.ok = n >= lo && n <= hi;
                out.detail = "got " + std::to_string(n) + " readings";
            }
        } else if (check == "custody_segments") {
            expect_eq(trace(str(a, "lot")).segments());
        } else if (check == "holder") {
            expect_eq(foodchain_->holder(str(a, "lot")));
        } else if (check == "proofs_ok") {
            auto report = trace(str(a, "lot"));
            out.ok = report.unverifiable.empty() && report.proofs_checked == report.readings.size() &&
                     report.proofs_checked > 0;
            out.detail = std::to_string(report.proofs_checked) + " proofs checked, " +
                         std::to_string(report.unverifiable.size()) + " unverifiable";
        } else if (check == "request_status") {
            auto r = market_ ? market_->request(str(a, "request")) : std::nullopt;
            if (!r) throw Error(ErrorCode::UnknownRequest, str(a, "request"));
            expect_eq(std::string(to_string(r->status)));
        } else if (check == "settlement") {
            auto id = str(a, "request");
            auto outcome = fed_.ledger(market_->config().ledger).with_state([&](const ContractState& s) -> std::string {
                auto it = s.market.settlements.find(id);
                return it == s.market.settlements.end() ? "none" : std::string(to_string(it->second.outcome));
            });
            expect_eq(outcome);
        } else if (check == "swaps_atomic") {
            out.ok = true;
            std::size_t n = 0;
            for (const auto& t : custody_) {
                ++n;
                if (t.swap.mixed() || !t.swap.terminal()) out.ok = false;
            }
            if (market_) {
                for (const auto& r : market_->settlement_runs()) {
                    ++n;
                    if (r.swap.mixed()) out.ok = false;
                }
            }
            out.detail = std::to_string(n) + " swaps inspected";
        } else if (check == "chains_valid") {
            out.ok = true;
            for (const auto& id : fed_.ledger_ids()) {
                auto r = fed_.ledger(id).verify();
                if (!r.ok) {
                    out.ok = false;
                    out.detail += id + ": " + r.reason + "; ";
                }
            }
            if (out.ok) out.detail = std::to_string(fed_.ledger_ids().size()) + " ledgers valid";
        } else if (check == "conservation") {
            out.ok = true;
            for (const auto& id : fed_.ledger_ids()) {
                if (!fed_.ledger(id).with_state([](const ContractState& s) { return s.conserves_tokens(); })) {
                    out.ok = false;
                    out.detail += id + " ";
                }
            }
            if (out.ok) out.detail = "tokens conserved on every ledger";
        } else if (check == "anchors_ok") {
            auto r = verify_anchors_now();
            if (!r) throw Error(ErrorCode::NoCheckpoints);
            expect_eq(r->ok);
        } else if (check == "tamper_detected") {
            out.ok = !tamper_.empty();
            for (const auto& t : tamper_) {
                if (t.at("chain").at("ok").get<bool>()) out.ok = false;
                // A payload rewrite changes replayed state, so anchors must see it too;
                // header-only flips are caught by the hash links alone.
                if (t.at("mode") == "payload" && t.contains("anchors") && t["anchors"].value("ok", true)) out.ok = false;
            }
            out.detail = std::to_string(tamper_.size()) + " tamper records";
        } else {
            throw Error(ErrorCode::SchemaError, "unknown check " + check);
        }
    } catch (const Error& e) {
        out.ok = false;
        out.detail = e.what();
    } catch (const nlohmann::json::exception& e) {
        out.ok = false;
        out.detail = e.what();
    }
    return out;
}

std::vector<AnchorCheckpoint> Simulation::anchor_checkpoints() const {
    if (!scenario_.anchoring) return {};
    return read_checkpoints(fed_.ledger(scenario_.anchoring->public_ledger), scenario_.anchoring->source);
}

std::optional<AnchorReport> Simulation::verify_anchors_now() const {
    if (!scenario_.anchoring) return std::nullopt;
    try {
        return verify_anchors(fed_, scenario_.anchoring->source, scenario_.anchoring->public_ledger);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::NoCheckpoints) return std::nullopt;
        throw;
    }
}

bool Simulation::ok() const {
    if (!invariant_failures_.empty()) return false;
    for (const auto& a : actions_) {
        if (!a.ok) return false;
    }
    for (const auto& a : assertions_) {
        if (!a.ok) return false;
    }
    return true;
}

nlohmann::json Simulation::report() const {
    nlohmann::json j;
    j["scenario"] = scenario_.name;
    j["seed"] = scenario_.seed;
    j["final_time"] = fed_.now();

    nlohmann::json ledgers = nlohmann::json::object();
    nlohmann::json balances = nlohmann::json::object();
    for (const auto& id : fed_.ledger_ids()) {
        const auto& l = fed_.ledger(id);
        auto tip = l.tip();
        std::size_t txs = 0;
        for (const auto& b : l.blocks()) txs += b.transactions.size();
        ledgers[id] = {{"kind", to_string(l.config().kind)},
                       {"height", tip.height},
                       {"tip", tip.hash.hex()},
                       {"state_root", tip.state_root.hex()},
                       {"transactions", txs},
                       {"valid", l.verify().ok}};
        nlohmann::json b = nlohmann::json::object();
        l.with_state([&](const ContractState& s) {
            for (const auto& [addr, amount] : s.token.balances) {
                if (amount != 0) b[wallets_.name_of(addr)] = amount;
            }
            return 0;
        });
        if (!b.empty()) balances[id] = b;
    }
    j["ledgers"] = ledgers;
    j["balances"] = balances;

    nlohmann::json traces = nlohmann::json::object();
    nlohmann::json qr = nlohmann::json::object();
    if (foodchain_) {
        for (const auto& lot : foodchain_->lots()) {
            traces[lot] = foodchain_->trace_lot(lot);
            qr[lot] = foodchain_->qr_payload(lot);
        }
    }
    j["traces"] = traces;
    j["qr"] = qr;
    j["custody_transfers"] = custody_;

    nlohmann::json settlements = nlohmann::json::array();
    nlohmann::json requests = nlohmann::json::array();
    if (market_) {
        settlements = market_->settlement_runs();
        requests = market_->requests();
    }
    j["settlements"] = settlements;
    j["requests"] = requests;

    nlohmann::json anchors = nlohmann::json::object();
    if (scenario_.anchoring) {
        anchors["checkpoints"] = anchor_checkpoints();
        auto r = verify_anchors_now();
        anchors["verification"] = r ? nlohmann::json(*r) : nlohmann::json(nullptr);
    }
    j["anchors"] = anchors;
    j["ingestion"] = ingestion_;
    j["tamper"] = tamper_;
    j["invariants"] = {{"seals_checked", seals_checked_}, {"failures", invariant_failures_}};
    j["actions"] = actions_;
    j["assertions"] = assertions_;
    j["events"] = fed_.events().since(0);
    j["ok"] = ok();
    return j;
}

// -------------------------------------------------------------- reporting

std::string report_text(const nlohmann::json& report) { return report.dump(2) + "\n"; }

std::string summarize(const nlohmann::json& report) {
    std::ostringstream out;
    out << "scenario " << report.value("scenario", "") << " (seed " << report.value("seed", std::uint64_t{0})
        << "): " << (report.value("ok", false) ? "ok" : "FAILED") << "\n";
    std::size_t actions_ok = 0, asserts_ok = 0;
    const auto& actions = report.at("actions");
    const auto& asserts = report.at("assertions");
    for (const auto& a : actions) actions_ok += a.at("ok").get<bool>() ? 1 : 0;
    for (const auto& a : asserts) asserts_ok += a.at("ok").get<bool>() ? 1 : 0;
    out << "  actions:    " << actions_ok << "/" << actions.size() << " ok\n";
    out << "  assertions: " << asserts_ok << "/" << asserts.size() << " passed\n";
    out << "  seals checked: " << report.at("invariants").at("seals_checked").get<std::size_t>() << "\n";
    for (const auto& item : report.at("traces").items()) {
        const auto& t = item.value();
        out << "  trace " << item.key() << ": " << t.at("verdict").get<std::string>() << ", "
            << t.at("violations").size() << " violation(s), " << t.at("readings") << " reading(s)\n";
    }
    for (const auto& s : report.at("settlements")) {
        out << "  settlement " << s.at("request").get<std::string>() << ": "
            << (s.at("onchain_outcome").is_null() ? "pending" : s.at("onchain_outcome").get<std::string>()) << ", swap "
            << s.at("swap").at("phase").get<std::string>() << "\n";
    }
    for (const auto& a : actions) {
        if (!a.at("ok").get<bool>())
            out << "  FAILED action step " << a.at("step") << " (" << a.at("action").get<std::string>()
                << "): " << a.at("detail").get<std::string>() << "\n";
    }
    for (const auto& a : asserts) {
        if (!a.at("ok").get<bool>())
            out << "  FAILED assert step " << a.at("step") << " line " << a.at("line") << " ("
                << a.at("check").get<std::string>() << "): " << a.at("detail").get<std::string>() << "\n";
    }
    for (const auto& f : report.at("invariants").at("failures")) out << "  FAILED invariant: " << f.dump() << "\n";
    return out.str();
}

RunResult run_scenario(const Scenario& scenario) {
    Simulation sim(scenario);
    sim.run();
    RunResult r;
    r.report = sim.report();
    r.summary = summarize(r.report);
    r.exit_code = sim.ok() ? 0 : 2;
    return r;
}

}  // namespace fedledger

#include "fedledger/foodchain.hpp"

#include "fedledger/enum_names.hpp"

#include <algorithm>
#include <sstream>

namespace fedledger {

namespace {

constexpr detail::EnumTable<TraceVerdict, 2> kVerdicts{{{TraceVerdict::clean, "clean"},
                                                       {TraceVerdict::violations, "violations"}}};
constexpr detail::EnumTable<PinStatus, 3> kPins{{{PinStatus::current, "current"},
                                                {PinStatus::tip_advanced, "tip_advanced"},
                                                {PinStatus::history_diverged, "history_diverged"}}};

constexpr std::string_view kQrPrefix = "fedledger://trace/";
constexpr std::string_view kQrTip = "?tip=";

void add_to_summary(MetricSummary& s, std::int64_t v) {
    if (s.count == 0) {
        s.min = s.max = v;
    } else {
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }
    ++s.count;
}

}  // namespace

std::optional<std::size_t> segment_index(std::string_view segment) {
    for (std::size_t i = 0; i < kSegments.size(); ++i) {
        if (kSegments[i] == segment) return i;
    }
    return std::nullopt;
}

bool ConditionRule::applies_to(const std::string& segment) const {
    return segments.empty() || std::find(segments.begin(), segments.end(), segment) != segments.end();
}

std::string ConditionRule::describe() const {
    return metric + " in [" + std::to_string(min) + ", " + std::to_string(max) + "]";
}

void to_json(nlohmann::json& j, const ConditionRule& r) {
    j = {{"metric", r.metric}, {"min", r.min}, {"max", r.max}, {"segments", r.segments}};
}

void from_json(const nlohmann::json& j, ConditionRule& r) {
    r.metric = j.at("metric").get<std::string>();
    r.min = j.at("min").get<std::int64_t>();
    r.max = j.at("max").get<std::int64_t>();
    r.segments = j.value("segments", std::vector<std::string>{});
    if (r.min > r.max) throw Error(ErrorCode::BadConfig, "condition rule for " + r.metric + " has min > max");
}

void to_json(nlohmann::json& j, const Violation& v) {
    j = {{"segment", v.segment}, {"metric", v.metric}, {"value", v.value},
         {"ts", v.ts},           {"rule", v.rule},     {"tx_id", v.tx_id.hex()}};
}

std::vector<Violation> evaluate_conditions(std::span<const Reading> readings, std::span<const ConditionRule> rules) {
    std::vector<Violation> out;
    for (const auto& r : readings) {
        for (const auto& rule : rules) {
            if (rule.metric != r.metric || !rule.applies_to(r.segment)) continue;
            if (r.value < rule.min || r.value > rule.max)
                out.push_back({r.segment, r.metric, r.value, r.ts, rule.describe(), r.tx_id});
        }
    }
    return out;
}

std::string_view to_string(TraceVerdict v) noexcept { return detail::enum_name(kVerdicts, v); }
std::string_view to_string(PinStatus v) noexcept { return detail::enum_name(kPins, v); }

std::vector<std::string> TraceReport::segments() const {
    std::vector<std::string> out;
    for (const auto& hop : custody_chain) out.push_back(hop.segment);
    return out;
}

std::string TraceReport::to_text() const {
    std::ostringstream os;
    os << "lot " << lot << ": " << to_string(verdict) << "\n";
    os << "custody:";
    for (const auto& hop : custody_chain) os << " " << hop.segment << "@" << hop.ts;
    os << "\nhandovers: " << handovers << ", readings: " << readings.size() << ", proofs checked: " << proofs_checked
       << "\n";
    for (const auto& [segment, metrics] : summaries) {
        for (const auto& [metric, s] : metrics) {
            os << "  " << segment << " " << metric << ": n=" << s.count << " min=" << s.min << " max=" << s.max << "\n";
        }
    }
    for (const auto& v : violations) {
        os << "  VIOLATION " << v.segment << " " << v.metric << "=" << v.value << " at " << v.ts << " (" << v.rule
           << ")\n";
    }
    for (const auto& u : unverifiable) os << "  UNVERIFIABLE " << u.segment << " " << u.tx_id.hex() << ": " << u.reason << "\n";
    os << "consortium tip: " << consortium_tip.hex() << "\n";
    return os.str();
}

void to_json(nlohmann::json& j, const TraceReport& r) {
    nlohmann::json chain = nlohmann::json::array();
    for (const auto& h : r.custody_chain) chain.push_back({{"segment", h.segment}, {"ts", h.ts}, {"escrow", h.escrow}});
    nlohmann::json summaries = nlohmann::json::object();
    for (const auto& [segment, metrics] : r.summaries) {
        for (const auto& [metric, s] : metrics)
            summaries[segment][metric] = {{"count", s.count}, {"min", s.min}, {"max", s.max}};
    }
    nlohmann::json unverifiable = nlohmann::json::array();
    for (const auto& u : r.unverifiable)
        unverifiable.push_back(
            {{"segment", u.segment}, {"ledger_id", u.ledger}, {"tx_id", u.tx_id.hex()}, {"reason", u.reason}});
    j = {{"lot", r.lot},
         {"custody_chain", chain},
         {"segments", r.segments()},
         {"summaries", summaries},
         {"violations", r.violations},
         {"unverifiable", unverifiable},
         {"verdict", to_string(r.verdict)},
         {"handovers", r.handovers},
         {"readings", r.readings.size()},
         {"proofs_checked", r.proofs_checked},
         {"consortium_tip", r.consortium_tip.hex()}};
}

void FoodchainConfig::validate() const {
    if (consortium.empty()) throw Error(ErrorCode::BadConfig, "foodchain needs a consortium ledger");
    std::set<std::string> ledgers{consortium};
    for (const auto& s : kSegments) {
        auto it = segments.find(s);
        if (it == segments.end()) throw Error(ErrorCode::BadConfig, "segment " + s + " is not bound");
        if (!ledgers.insert(it->second.ledger).second)
            throw Error(ErrorCode::BadConfig, "segment " + s + " shares a ledger");
    }
    if (segments.size() != kSegments.size()) throw Error(ErrorCode::BadConfig, "unknown segment in foodchain config");
}

void from_json(const nlohmann::json& j, FoodchainConfig& c) {
    c.consortium = j.at("consortium").get<std::string>();
    for (const auto& [seg, b] : j.at("segments").items())
        c.segments[seg] = SegmentBinding{b.at("ledger").get<std::string>(), b.at("identity").get<std::string>()};
    c.conditions = j.value("conditions", std::vector<ConditionRule>{});
}

std::string qr_payload(const std::string& lot, const Digest& consortium_tip) {
    return std::string(kQrPrefix) + lot + std::string(kQrTip) + consortium_tip.hex().substr(0, 16);
}

QrTarget parse_qr_payload(std::string_view payload) {
    if (payload.substr(0, kQrPrefix.size()) != kQrPrefix) throw Error(ErrorCode::BadQrPayload, "wrong scheme");
    auto rest = payload.substr(kQrPrefix.size());
    auto q = rest.find(kQrTip);
    if (q == std::string_view::npos || q == 0) throw Error(ErrorCode::BadQrPayload, "missing lot or tip");
    QrTarget t{std::string(rest.substr(0, q)), std::string(rest.substr(q + kQrTip.size()))};
    if (t.tip_prefix.size() != 16 ||
        t.tip_prefix.find_first_not_of("0123456789abcdef") != std::string::npos)
        throw Error(ErrorCode::BadQrPayload, "tip must be 16 lowercase hex digits");
    return t;
}

PinStatus pin_status(const std::string& tip_prefix, std::span<const Block> chain) {
    if (chain.empty()) return PinStatus::history_diverged;
    auto matches = [&](const Block& b) { return b.hash.hex().compare(0, tip_prefix.size(), tip_prefix) == 0; };
    // Walk back from the tip along prev_hash links.
    const Block* cur = &chain.back();
    bool at_tip = true;
    while (true) {
        if (matches(*cur)) return at_tip ? PinStatus::current : PinStatus::tip_advanced;
        if (cur->height == 0 || cur->height > chain.size() - 1) break;
        const Block& parent = chain[cur->height - 1];
        if (parent.hash != cur->prev_hash) break;
        cur = &parent;
        at_tip = false;
    }
    return PinStatus::history_diverged;
}

void to_json(nlohmann::json& j, const QrResolution& r) {
    j = {{"report", r.report}, {"pin", to_string(r.pin)}};
}

void to_json(nlohmann::json& j, const CustodyTransfer& t) {
    j = {{"lot", t.lot}, {"from", t.from}, {"to", t.to}, {"swap", t.swap}};
}

// ------------------------------------------------------------- FoodChain

FoodChain::FoodChain(Federation& fed, FoodchainConfig config, WalletLookup wallets, std::vector<AdapterRule> rules,
                     std::uint64_t seed)
    : fed_(fed), config_(std::move(config)), wallets_(std::move(wallets)), rules_(std::move(rules)), seed_(seed) {
    config_.validate();
}

std::string FoodChain::segment_of_ledger(const std::string& ledger) const {
    for (const auto& [seg, b] : config_.segments) {
        if (b.ledger == ledger) return seg;
    }
    return {};
}

void FoodChain::register_lot(const std::string& lot, const std::string& segment) {
    auto it = config_.segments.find(segment);
    if (it == config_.segments.end()) throw Error(ErrorCode::BadTarget, "unknown segment " + segment);
    ContractCall call{ContractKind::provenance, "register_lot", {}};
    call.args["lot"] = lot;
    call.args["segment"] = segment;
    auto tx = wallets_(it->second.identity).sign(config_.consortium, std::move(call), fed_.now());
    fed_.submit(tx);
    auto block = fed_.seal(config_.consortium);
    for (std::size_t i = 0; i < block.transactions.size(); ++i) {
        if (block.transactions[i].id == tx.id && !block.results[i].ok) throw Error(block.results[i].error, lot);
    }
    fed_.events().append("lot_registered", {{"lot", lot}, {"segment", segment}});
}

SubmissionReport FoodChain::record_observations(std::span<const SensorEvent> events) {
    std::vector<MappedCall> mapped;
    std::vector<SubmitFailure> unmapped;
    for (const auto& e : events) {
        try {
            mapped.push_back(map_event(e, rules_));
        } catch (const Error& err) {
            unmapped.push_back({"", e.idempotency_key().hex(), err.code()});
        }
    }
    auto report = flush_batch(std::move(mapped), fed_, wallets_);
    report.failures.insert(report.failures.begin(), unmapped.begin(), unmapped.end());
    for (const auto& [ledger, n] : report.accepted) fed_.seal(ledger);

    std::size_t digests = 0;
    for (const auto& [call, tx_id] : report.submitted) {
        if (!call.event.lot || call.call.contract != ContractKind::provenance) continue;
        auto segment = segment_of_ledger(call.ledger);
        if (segment.empty()) continue;
        const auto& ledger = fed_.ledger(call.ledger);
        auto loc = ledger.locate(tx_id);
        if (!loc || !ledger.block(loc->height).results[loc->index].ok) continue;
        ContractCall digest{ContractKind::provenance, "digest", {}};
        digest.args["lot"] = *call.event.lot;
        digest.args["segment"] = segment;
        digest.args["ledger"] = call.ledger;
        digest.args["metric"] = std::string(to_string(call.event.metric));
        digest.args["record_tx"] = tx_id.hex();
        digest.args["ts"] = call.event.ts;
        try {
            fed_.submit(wallets_(call.signer).sign(config_.consortium, std::move(digest), fed_.now()));
            ++digests;
        } catch (const Error& err) {
            report.failures.push_back({config_.consortium, call.event.idempotency_key().hex(), err.code()});
        }
    }
    if (digests > 0) fed_.seal(config_.consortium);
    return report;
}

std::unique_ptr<SwapDriver> FoodChain::prepare_transfer(const std::string& lot, const std::string& from,
                                                        const std::string& to, const FaultSchedule& faults) {
    auto fi = segment_index(from);
    auto ti = segment_index(to);
    if (!fi || !ti || *ti != *fi + 1) throw Error(ErrorCode::WrongSequence, from + " -> " + to);
    fed_.ledger(config_.consortium).with_state([&](const ContractState& s) {
        auto it = s.provenance.lots.find(lot);
        if (it == s.provenance.lots.end()) throw Error(ErrorCode::LotNotFound, lot);
        if (it->second.segment != from || !it->second.locked_by.empty()) throw Error(ErrorCode::NotCurrentHolder, lot);
        return 0;
    });
    const auto& sender = config_.segments.at(from);
    const auto& receiver = config_.segments.at(to);
    Wallet& from_w = wallets_(sender.identity);
    Wallet& to_w = wallets_(receiver.identity);

    auto attempt = ++attempts_[lot + "/" + from + "-" + to];
    SwapPlan plan;
    plan.id = "custody/" + lot + "/" + from + "-" + to + "/" + std::to_string(attempt);
    auto secret = sha256("custody-secret:" + plan.id + ":" + std::to_string(seed_));
    plan.a = SwapLeg{config_.consortium, from_w.address(), to_w.address(), AssetKind::custody, 0, lot, from, to};
    plan.b = SwapLeg{receiver.ledger, to_w.address(), from_w.address(), AssetKind::handover, 0, lot, from, to};
    plan.secret_holder = from_w.address();
    plan.hashlock = sha256(secret.view());
    plan.delta = config_.delta;
    plan.set_default_timelocks(fed_.now());
    return std::make_unique<SwapDriver>(fed_, std::move(plan), SwapParties{&from_w, &to_w, &from_w, &to_w}, secret,
                                        faults);
}

CustodyTransfer FoodChain::transfer_custody(const std::string& lot, const std::string& from, const std::string& to,
                                            const FaultSchedule& faults) {
    auto driver = prepare_transfer(lot, from, to, faults);
    driver->start();
    CustodyTransfer t{lot, from, to, drive_to_completion(fed_, *driver)};
    fed_.events().append("custody_transfer", t);
    return t;
}

std::vector<std::string> FoodChain::lots() const {
    return fed_.ledger(config_.consortium).with_state([](const ContractState& s) {
        std::vector<std::string> out;
        for (const auto& [lot, _] : s.provenance.lots) out.push_back(lot);
        return out;
    });
}

std::string FoodChain::holder(const std::string& lot) const {
    return fed_.ledger(config_.consortium).with_state([&](const ContractState& s) {
        auto it = s.provenance.lots.find(lot);
        if (it == s.provenance.lots.end()) throw Error(ErrorCode::LotNotFound, lot);
        return it->second.segment;
    });
}

TraceReport FoodChain::trace_lot(const std::string& lot) const {
    const auto& consortium = fed_.ledger(config_.consortium);
    TraceReport report;
    report.lot = lot;

    std::optional<LotCustody> custody;
    std::vector<CustodyEvent> events;
    std::vector<DigestEvent> digests;
    consortium.with_state([&](const ContractState& s) {
        if (auto it = s.provenance.lots.find(lot); it != s.provenance.lots.end()) custody = it->second;
        for (const auto& e : s.provenance.custody) {
            if (e.lot == lot) events.push_back(e);
        }
        for (const auto& d : s.provenance.digests) {
            if (d.lot == lot) digests.push_back(d);
        }
        return 0;
    });
    if (!custody && digests.empty()) throw Error(ErrorCode::LotNotFound, lot);
    report.consortium_tip = consortium.tip().hash;

    if (custody) {
        std::string origin = custody->segment;
        for (const auto& e : events) {
            if (e.kind == CustodyKind::custody_out) {
                origin = e.segment;
                break;
            }
        }
        report.custody_chain.push_back({origin, custody->registered_at, ""});
    }
    for (const auto& e : events) {
        if (e.kind != CustodyKind::custody_in) continue;
        report.custody_chain.push_back({e.segment, e.ts, e.escrow});
        ++report.handovers;
        // The matching handover record must exist on the receiving segment's ledger.
        auto binding = config_.segments.find(e.segment);
        auto leg_b = e.escrow.substr(0, e.escrow.size() - 2) + "/b";
        bool found = binding != config_.segments.end() && fed_.has_ledger(binding->second.ledger) &&
                     fed_.ledger(binding->second.ledger).with_state([&](const ContractState& s) {
                         return std::any_of(s.provenance.handovers.begin(), s.provenance.handovers.end(),
                                            [&](const HandoverRecord& h) { return h.escrow == leg_b && h.lot == lot; });
                     });
        if (!found) {
            report.unverifiable.push_back(
                {e.segment, binding != config_.segments.end() ? binding->second.ledger : "", e.tx_id,
                 "handover record missing on receiving ledger"});
        }
    }

    for (const auto& d : digests) {
        auto unverifiable = [&](std::string reason) {
            report.unverifiable.push_back({d.segment, d.ledger, d.record_tx, std::move(reason)});
        };
        if (!fed_.has_ledger(d.ledger) || segment_of_ledger(d.ledger) != d.segment) {
            unverifiable("digest names an unknown segment ledger");
            continue;
        }
        const auto& ledger = fed_.ledger(d.ledger);
        auto loc = ledger.locate(d.record_tx);
        if (!loc) {
            unverifiable("record not sealed");
            continue;
        }
        auto block = ledger.block(loc->height);
        auto proof = ledger.inclusion_proof(d.record_tx);
        ++report.proofs_checked;
        if (!verify_inclusion(proof, block)) {
            unverifiable("inclusion proof failed");
            continue;
        }
        const auto& tx = block.transactions.at(loc->index);
        const auto& call = tx.payload;
        bool consistent = tx.id == d.record_tx && block.results.at(loc->index).ok &&
                          call.contract == ContractKind::provenance && call.method == "record" &&
                          call.opt_str("lot") == lot && call.opt_str("metric") == d.metric;
        if (!consistent) {
            unverifiable("record does not match digest");
            continue;
        }
        Reading r{d.segment, d.ledger, call.str_arg("device"), d.metric, call.opt_int("value").value_or(0),
                  call.int_arg("ts"), tx.id};
        auto& summary = report.summaries[r.segment][r.metric];
        if (r.metric == "gps") {
            ++summary.count;
        } else {
            add_to_summary(summary, r.value);
        }
        report.readings.push_back(std::move(r));
    }

    std::vector<Reading> scalar;
    std::copy_if(report.readings.begin(), report.readings.end(), std::back_inserter(scalar),
                 [](const Reading& r) { return r.metric != "gps"; });
    report.violations = evaluate_conditions(scalar, config_.conditions);
    report.verdict = report.violations.empty() ? TraceVerdict::clean : TraceVerdict::violations;
    return report;
}

std::string FoodChain::qr_payload(const std::string& lot) const {
    trace_lot(lot);  // LotNotFound for unknown lots
    return fedledger::qr_payload(lot, fed_.ledger(config_.consortium).tip().hash);
}

QrResolution FoodChain::resolve_qr(std::string_view payload) const {
    auto target = parse_qr_payload(payload);
    QrResolution out{trace_lot(target.lot), PinStatus::current};
    auto chain = fed_.ledger(config_.consortium).blocks();
    out.pin = pin_status(target.tip_prefix, chain);
    return out;
}

}  // namespace fedledger

#include "fedledger/scenario.hpp"

#include "fedledger/error.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fedledger {

namespace {

struct ActionShape {
    std::vector<std::string> required;
};

const std::map<std::string, ActionShape>& shapes() {
    static const std::map<std::string, ActionShape> s{
        {"mint", {{"ledger", "by", "to", "amount"}}},
        {"transfer", {{"ledger", "by", "to", "amount"}}},
        {"grant_role", {{"ledger", "by", "actor", "role"}}},
        {"membership", {{"ledger", "by", "op", "member"}}},
        {"register_lot", {{"lot"}}},
        {"ingest", {{"platform"}}},
        {"transfer_custody", {{"lot", "from", "to"}}},
        {"seal", {{}}},
        {"advance", {{}}},
        {"anchor", {{}}},
        {"post_request", {{"by", "scenario", "energy_wh", "start", "end", "lat", "lon", "incentive"}}},
        {"post_offer", {{"by", "request", "price", "committed_wh"}}},
        {"close", {{"by", "request"}}},
        {"register_ev", {{"by", "ev", "lat", "lon", "autonomy_m"}}},
        {"accept", {{"by", "request", "ev", "station"}}},
        {"record_delivery", {{"by", "request"}}},
        {"settle", {{"by", "request"}}},
        {"plan_day_ahead", {{"by", "forecast"}}},
        {"inject_fault", {{"kind"}}},
        {"assert", {{"check"}}},
    };
    return s;
}

const std::set<std::string> kFaultKinds{"crash_coordinator_at_step", "delay_message", "drop_events", "tamper_block"};

/// Builds SchemaError messages with source/line/path context.
class Context {
public:
    Context(std::string source, const std::string& text) : source_(std::move(source)) {
        // Best-effort line numbers for script steps: the n-th "action" key
        // after the "script" key belongs to step n.
        auto script = text.find("\"script\"");
        if (script == std::string::npos) return;
        auto pos = script;
        while ((pos = text.find("\"action\"", pos + 1)) != std::string::npos) {
            step_lines_.push_back(1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n')));
        }
    }

    std::size_t step_line(std::size_t i) const { return i < step_lines_.size() ? step_lines_[i] : 0; }

    [[noreturn]] void fail(const std::string& path, const std::string& msg, std::size_t line = 0) const {
        std::string where = source_;
        if (line) where += ":" + std::to_string(line);
        throw Error(ErrorCode::SchemaError, where + ": " + path + ": " + msg);
    }

private:
    std::string source_;
    std::vector<std::size_t> step_lines_;
};

template <class T>
T get_or_fail(const Context& ctx, const nlohmann::json& j, const std::string& path, std::size_t line = 0) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception& e) {
        ctx.fail(path, e.what(), line);
    } catch (const Error& e) {
        ctx.fail(path, e.what(), line);
    }
}

}  // namespace

const ActorSpec* Scenario::actor(const std::string& name) const {
    for (const auto& a : actors) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

const LedgerSpec* Scenario::ledger(const std::string& id) const {
    for (const auto& l : ledgers) {
        if (l.id == id) return &l;
    }
    return nullptr;
}

const std::vector<std::string>& script_actions() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, _] : shapes()) out.push_back(name);
        return out;
    }();
    return names;
}

Scenario parse_scenario(const std::string& text, const std::string& source_name, const std::filesystem::path& base_dir) {
    Context ctx(source_name, text);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        auto upto = std::min<std::size_t>(e.byte, text.size());
        auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
        ctx.fail("/", e.what(), line);
    }
    if (!j.is_object()) ctx.fail("/", "scenario must be a JSON object");

    Scenario s;
    s.base_dir = base_dir;
    s.name = j.value("name", source_name);
    if (!j.contains("seed")) ctx.fail("/seed", "missing");
    s.seed = get_or_fail<std::uint64_t>(ctx, j["seed"], "/seed");
    s.delta_ms = get_or_fail<std::int64_t>(ctx, j.value("delta_ms", nlohmann::json(kDefaultDeltaMs)), "/delta_ms");
    s.tick_ms = get_or_fail<std::int64_t>(ctx, j.value("tick_ms", nlohmann::json(1000)), "/tick_ms");
    s.start_ms = get_or_fail<std::int64_t>(ctx, j.value("start_ms", nlohmann::json(0)), "/start_ms");
    if (s.delta_ms <= 0) ctx.fail("/delta_ms", "must be positive");
    if (s.tick_ms <= 0) ctx.fail("/tick_ms", "must be positive");

    // actors
    std::set<std::string> actor_names;
    for (std::size_t i = 0; i < j.value("actors", nlohmann::json::array()).size(); ++i) {
        const auto& a = j["actors"][i];
        auto path = "/actors/" + std::to_string(i);
        ActorSpec spec;
        spec.name = get_or_fail<std::string>(ctx, a.value("name", nlohmann::json()), path + "/name");
        if (auto role = a.find("role"); role != a.end() && !role->is_null()) {
            spec.role = role_from_string(get_or_fail<std::string>(ctx, *role, path + "/role"));
            if (!spec.role) ctx.fail(path + "/role", "unknown role");
        }
        spec.token = a.value("token", std::string());
        if (!actor_names.insert(spec.name).second) ctx.fail(path + "/name", "duplicate actor " + spec.name);
        s.actors.push_back(std::move(spec));
    }
    auto need_actor = [&](const std::string& name, const std::string& path, std::size_t line = 0) {
        if (!actor_names.count(name)) ctx.fail(path, "undeclared actor '" + name + "'", line);
    };

    // ledgers
    std::set<std::string> ledger_ids;
    if (!j.contains("ledgers") || !j["ledgers"].is_array()) ctx.fail("/ledgers", "missing ledger list");
    for (std::size_t i = 0; i < j["ledgers"].size(); ++i) {
        const auto& l = j["ledgers"][i];
        auto path = "/ledgers/" + std::to_string(i);
        LedgerSpec spec;
        spec.id = get_or_fail<std::string>(ctx, l.value("ledger_id", nlohmann::json()), path + "/ledger_id");
        auto kind = ledger_kind_from_string(l.value("kind", std::string("open")));
        if (!kind) ctx.fail(path + "/kind", "unknown ledger kind");
        spec.kind = *kind;
        spec.members = l.value("members", std::vector<std::string>{});
        for (const auto& m : spec.members) need_actor(m, path + "/members");
        if (l.contains("authority")) {
            spec.authority = get_or_fail<std::string>(ctx, l["authority"], path + "/authority");
            need_actor(*spec.authority, path + "/authority");
        }
        if (l.contains("minter")) {
            spec.minter = get_or_fail<std::string>(ctx, l["minter"], path + "/minter");
            need_actor(*spec.minter, path + "/minter");
        }
        spec.restricted_read = l.value("restricted_read", false);
        if (l.contains("market_params")) {
            const auto& p = l["market_params"];
            spec.market.bid_lead_ms = p.value("bid_lead_ms", spec.market.bid_lead_ms);
            spec.market.tolerance_bps = p.value("tolerance_bps", spec.market.tolerance_bps);
            spec.market.day_ms = p.value("day_ms", spec.market.day_ms);
        }
        if (spec.kind == LedgerKind::permissioned && (spec.members.empty() || !spec.authority))
            ctx.fail(path, "permissioned ledger needs members and an authority");
        if (spec.kind != LedgerKind::permissioned && (!spec.members.empty() || spec.authority))
            ctx.fail(path, "members/authority only apply to permissioned ledgers");
        if (!ledger_ids.insert(spec.id).second) ctx.fail(path + "/ledger_id", "duplicate ledger " + spec.id);
        s.ledgers.push_back(std::move(spec));
    }
    auto need_ledger = [&](const std::string& id, const std::string& path, std::size_t line = 0) {
        if (!ledger_ids.count(id)) ctx.fail(path, "undeclared ledger '" + id + "'", line);
    };

    // adapter rules
    for (std::size_t i = 0; i < j.value("adapter_rules", nlohmann::json::array()).size(); ++i) {
        auto path = "/adapter_rules/" + std::to_string(i);
        auto rule = get_or_fail<AdapterRule>(ctx, j["adapter_rules"][i], path);
        need_ledger(rule.ledger, path + "/ledger");
        need_actor(rule.signer, path + "/signer");
        s.rules.push_back(std::move(rule));
    }

    std::set<std::string> lots;
    for (const auto& lot : j.value("lots", std::vector<std::string>{})) lots.insert(lot);
    s.lots.assign(lots.begin(), lots.end());

    if (j.contains("foodchain")) {
        auto fc = get_or_fail<FoodchainConfig>(ctx, j["foodchain"], "/foodchain");
        fc.delta = s.delta_ms;
        try {
            fc.validate();
        } catch (const Error& e) {
            ctx.fail("/foodchain", e.what());
        }
        need_ledger(fc.consortium, "/foodchain/consortium");
        for (const auto& [seg, b] : fc.segments) {
            need_ledger(b.ledger, "/foodchain/segments/" + seg + "/ledger");
            need_actor(b.identity, "/foodchain/segments/" + seg + "/identity");
        }
        s.foodchain = std::move(fc);
    }
    if (j.contains("market")) {
        auto mc = get_or_fail<MarketConfig>(ctx, j["market"], "/market");
        mc.delta = s.delta_ms;
        need_ledger(mc.ledger, "/market/ledger");
        need_ledger(mc.reward_ledger, "/market/reward_ledger");
        need_actor(mc.dso, "/market/dso");
        need_actor(mc.reward_pool, "/market/reward_pool");
        if (mc.ledger == mc.reward_ledger) ctx.fail("/market", "market and reward ledgers must differ");
        s.market = std::move(mc);
    }
    if (j.contains("anchoring")) {
        const auto& a = j["anchoring"];
        AnchoringSpec spec;
        spec.source = get_or_fail<std::string>(ctx, a.value("source", nlohmann::json()), "/anchoring/source");
        spec.public_ledger = get_or_fail<std::string>(ctx, a.value("public", nlohmann::json()), "/anchoring/public");
        spec.signer = get_or_fail<std::string>(ctx, a.value("signer", nlohmann::json()), "/anchoring/signer");
        spec.every = get_or_fail<std::uint64_t>(ctx, a.value("every", nlohmann::json(5)), "/anchoring/every");
        need_ledger(spec.source, "/anchoring/source");
        need_ledger(spec.public_ledger, "/anchoring/public");
        need_actor(spec.signer, "/anchoring/signer");
        if (spec.every == 0) ctx.fail("/anchoring/every", "must be at least 1");
        if (spec.source == spec.public_ledger) ctx.fail("/anchoring", "source and public ledger must differ");
        s.anchoring = spec;
    }

    // script
    std::set<std::string> requests;
    std::int64_t last_at = s.start_ms;
    const auto script = j.value("script", nlohmann::json::array());
    if (!script.is_array()) ctx.fail("/script", "must be an array");
    for (std::size_t i = 0; i < script.size(); ++i) {
        const auto& st = script[i];
        auto path = "/script/" + std::to_string(i);
        auto line = ctx.step_line(i);
        if (!st.is_object()) ctx.fail(path, "step must be an object", line);
        ScriptStep step;
        step.index = i;
        step.line = line;
        step.at = get_or_fail<std::int64_t>(ctx, st.value("at", nlohmann::json(last_at)), path + "/at", line);
        step.action = get_or_fail<std::string>(ctx, st.value("action", nlohmann::json()), path + "/action", line);
        step.args = st;
        if (step.at < last_at) ctx.fail(path + "/at", "script times must be non-decreasing", line);
        last_at = step.at;
        auto shape = shapes().find(step.action);
        if (shape == shapes().end()) ctx.fail(path + "/action", "unknown action '" + step.action + "'", line);
        for (const auto& key : shape->second.required) {
            if (!st.contains(key)) ctx.fail(path + "/" + key, "missing for action " + step.action, line);
        }
        for (const char* key : {"by", "actor", "member"}) {
            if (st.contains(key)) need_actor(get_or_fail<std::string>(ctx, st[key], path + "/" + key, line), path + "/" + key, line);
        }
        if ((step.action == "mint" || step.action == "transfer") && st.contains("to"))
            need_actor(get_or_fail<std::string>(ctx, st["to"], path + "/to", line), path + "/to", line);
        if (st.contains("ledger")) need_ledger(get_or_fail<std::string>(ctx, st["ledger"], path + "/ledger", line), path + "/ledger", line);
        if (st.contains("lot")) {
            auto lot = get_or_fail<std::string>(ctx, st["lot"], path + "/lot", line);
            if (!lots.count(lot)) ctx.fail(path + "/lot", "undeclared lot '" + lot + "'", line);
        }
        if (st.contains("request")) {
            auto req = get_or_fail<std::string>(ctx, st["request"], path + "/request", line);
            if (!requests.count(req) && req.rfind("DA-", 0) != 0)
                ctx.fail(path + "/request", "undeclared request '" + req + "'", line);
        }
        if (step.action == "post_request") {
            if (!st.contains("id")) ctx.fail(path + "/id", "scripted requests need an explicit id", line);
            requests.insert(get_or_fail<std::string>(ctx, st["id"], path + "/id", line));
        }
        if ((step.action == "register_lot" || step.action == "transfer_custody") && !s.foodchain)
            ctx.fail(path, step.action + " needs a foodchain section", line);
        if (step.action == "anchor" && !s.anchoring) ctx.fail(path, "anchor needs an anchoring section", line);
        static const std::set<std::string> market_actions{"post_request", "post_offer",      "close",  "register_ev",
                                                          "accept",       "record_delivery", "settle", "plan_day_ahead"};
        if (market_actions.count(step.action) && !s.market) ctx.fail(path, step.action + " needs a market section", line);
        if (step.action == "inject_fault") {
            auto kind = get_or_fail<std::string>(ctx, st["kind"], path + "/kind", line);
            if (!kFaultKinds.count(kind)) ctx.fail(path + "/kind", "unknown fault kind '" + kind + "'", line);
        }
        if (step.action == "ingest" && !st.contains("lines") && !st.contains("file"))
            ctx.fail(path, "ingest needs 'lines' or 'file'", line);
        s.script.push_back(std::move(step));
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::SchemaError, path.string() + ": cannot open");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string(), path.parent_path());
}

}  // namespace fedledger

#include "fedledger/adapter.hpp"

#include "fedledger/enum_names.hpp"

#include <algorithm>

namespace fedledger {

namespace {

constexpr detail::EnumTable<Metric, 9> kMetrics{{{Metric::temperature, "temperature"},
                                                {Metric::humidity, "humidity"},
                                                {Metric::wind_speed, "wind_speed"},
                                                {Metric::wind_direction, "wind_direction"},
                                                {Metric::rainfall, "rainfall"},
                                                {Metric::soil_moisture, "soil_moisture"},
                                                {Metric::gps, "gps"},
                                                {Metric::box_presence, "box_presence"},
                                                {Metric::meter_power, "meter_power"}}};

constexpr detail::EnumTable<Metric, 9> kUnits{{{Metric::temperature, "celsius_x1000"},
                                              {Metric::humidity, "pct_x1000"},
                                              {Metric::wind_speed, "mps_x1000"},
                                              {Metric::wind_direction, "deg_x1000"},
                                              {Metric::rainfall, "mm_x1000"},
                                              {Metric::soil_moisture, "pct_x1000"},
                                              {Metric::gps, "udeg"},
                                              {Metric::box_presence, "bool"},
                                              {Metric::meter_power, "wh_x1000"}}};

[[noreturn]] void parse_error(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

std::int64_t int_field(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) parse_error(std::string("missing field '") + key + "'");
    if (!it->is_number_integer()) parse_error(std::string("field '") + key + "' must be an integer");
    return it->get<std::int64_t>();
}

std::string str_field(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) parse_error(std::string("missing field '") + key + "'");
    if (!it->is_string()) parse_error(std::string("field '") + key + "' must be a string");
    auto s = it->get<std::string>();
    if (s.empty()) parse_error(std::string("field '") + key + "' must not be empty");
    return s;
}

}  // namespace

std::string_view to_string(Metric m) noexcept { return detail::enum_name(kMetrics, m); }
std::optional<Metric> metric_from_string(std::string_view name) noexcept { return detail::enum_parse(kMetrics, name); }
std::string_view unit_of(Metric m) noexcept { return detail::enum_name(kUnits, m); }

Digest SensorEvent::idempotency_key() const {
    Writer w;
    w.str(platform);
    w.str(device);
    w.str(to_string(metric));
    w.i64(ts);
    return sha256(w.data());
}

SensorEvent SensorEvent::parse(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        parse_error(e.what());
    }
    if (!j.is_object()) parse_error("line is not a JSON object");
    SensorEvent e;
    e.platform = str_field(j, "platform");
    e.device = str_field(j, "device");
    auto metric_name = str_field(j, "metric");
    e.unit = str_field(j, "unit");
    e.ts = int_field(j, "ts");
    if (e.ts < 0) parse_error("ts must be non-negative");
    auto metric = metric_from_string(metric_name);
    if (!metric) throw Error(ErrorCode::UnknownMetric, metric_name);
    e.metric = *metric;
    if (e.unit != unit_of(e.metric)) throw Error(ErrorCode::UnknownMetric, metric_name + " is not reported in " + e.unit);
    if (e.metric == Metric::gps) {
        e.lat = int_field(j, "lat");
        e.lon = int_field(j, "lon");
    } else {
        e.value = int_field(j, "value");
    }
    if (auto it = j.find("lot"); it != j.end() && !it->is_null()) {
        if (!it->is_string() || it->get<std::string>().empty()) parse_error("field 'lot' must be a non-empty string");
        e.lot = it->get<std::string>();
    }
    return e;
}

void to_json(nlohmann::json& j, const SensorEvent& e) {
    j = {{"platform", e.platform}, {"device", e.device}, {"metric", to_string(e.metric)},
         {"unit", e.unit},         {"ts", e.ts}};
    if (e.metric == Metric::gps) {
        j["lat"] = e.lat;
        j["lon"] = e.lon;
    } else {
        j["value"] = e.value;
    }
    if (e.lot) j["lot"] = *e.lot;
}

void to_json(nlohmann::json& j, const RejectedLine& r) {
    j = {{"line", r.line}, {"reason", to_string(r.reason)}, {"detail", r.detail}};
}

void EventIngestor::take(std::size_t line_no, std::string_view line, const std::optional<std::string>& platform,
                         IngestResult& out) {
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) return;  // blank lines are not events
    try {
        auto e = SensorEvent::parse(line);
        if (platform && e.platform != *platform) {
            out.rejected.push_back({line_no, ErrorCode::PlatformMismatch, e.platform});
            return;
        }
        auto key = e.idempotency_key();
        std::lock_guard lock(mu_);
        if (!seen_.insert(key).second) {
            out.rejected.push_back({line_no, ErrorCode::DuplicateEvent, key.hex()});
            return;
        }
        out.accepted.push_back(std::move(e));
    } catch (const Error& err) {
        out.rejected.push_back({line_no, err.code(), err.what()});
    }
}

IngestResult EventIngestor::ingest(std::istream& in, const std::optional<std::string>& platform) {
    IngestResult out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) take(++n, line, platform, out);
    return out;
}

IngestResult EventIngestor::ingest_lines(std::span<const std::string> lines, const std::optional<std::string>& platform) {
    IngestResult out;
    for (std::size_t i = 0; i < lines.size(); ++i) take(i + 1, lines[i], platform, out);
    return out;
}

std::size_t EventIngestor::unique_keys() const {
    std::lock_guard lock(mu_);
    return seen_.size();
}

bool AdapterRule::matches(const SensorEvent& e) const {
    return e.platform == platform && (metrics.empty() || metrics.count(e.metric) > 0);
}

void to_json(nlohmann::json& j, const AdapterRule& r) {
    std::vector<std::string> metrics;
    for (auto m : r.metrics) metrics.emplace_back(to_string(m));
    j = {{"platform", r.platform}, {"metrics", metrics},         {"ledger", r.ledger},
         {"contract", to_string(r.contract)}, {"method", r.method}, {"signer", r.signer}};
}

void from_json(const nlohmann::json& j, AdapterRule& r) {
    r = AdapterRule{};
    r.platform = j.at("platform").get<std::string>();
    r.ledger = j.at("ledger").get<std::string>();
    r.signer = j.at("signer").get<std::string>();
    for (const auto& m : j.value("metrics", nlohmann::json::array())) {
        auto metric = metric_from_string(m.get<std::string>());
        if (!metric) throw Error(ErrorCode::UnknownMetric, m.get<std::string>());
        r.metrics.insert(*metric);
    }
    auto contract = contract_kind_from_string(j.value("contract", std::string("provenance")));
    if (!contract) throw Error(ErrorCode::UnknownContract, j.value("contract", std::string()));
    r.contract = *contract;
    r.method = j.value("method", std::string("record"));
}

ContractCall event_call(const SensorEvent& e, ContractKind contract, const std::string& method) {
    ContractCall c{contract, method, {}};
    c.args["key"] = e.idempotency_key().hex();
    c.args["device"] = e.device;
    c.args["ts"] = e.ts;
    if (contract == ContractKind::market) {
        c.args["value"] = e.value;
        return c;
    }
    c.args["platform"] = e.platform;
    c.args["metric"] = std::string(to_string(e.metric));
    c.args["unit"] = e.unit;
    if (e.metric == Metric::gps) {
        c.args["lat"] = e.lat;
        c.args["lon"] = e.lon;
    } else {
        c.args["value"] = e.value;
    }
    if (e.lot) c.args["lot"] = *e.lot;
    return c;
}

MappedCall map_event(const SensorEvent& e, std::span<const AdapterRule> rules) {
    for (const auto& r : rules) {
        if (r.matches(e)) return MappedCall{e, r.ledger, r.signer, event_call(e, r.contract, r.method)};
    }
    throw Error(ErrorCode::NoMatchingRule, e.platform + "/" + std::string(to_string(e.metric)));
}

void to_json(nlohmann::json& j, const SubmitFailure& f) {
    j = {{"ledger_id", f.ledger}, {"key", f.key}, {"reason", to_string(f.reason)}};
}

void to_json(nlohmann::json& j, const SubmissionReport& r) {
    j = {{"accepted", r.accepted}, {"failures", r.failures}};
}

SubmissionReport flush_batch(std::vector<MappedCall> calls, TransactionSink& sink, const WalletLookup& wallets) {
    SubmissionReport report;
    std::map<std::string, std::vector<MappedCall>> by_ledger;
    for (auto& c : calls) by_ledger[c.ledger].push_back(std::move(c));
    for (auto& [ledger, group] : by_ledger) {
        std::stable_sort(group.begin(), group.end(),
                         [](const MappedCall& x, const MappedCall& y) { return x.event.ts < y.event.ts; });
        for (auto& c : group) {
            auto key = c.event.idempotency_key().hex();
            try {
                auto tx = wallets(c.signer).sign(ledger, c.call, sink.now());
                sink.submit(tx);
                ++report.accepted[ledger];
                report.submitted.emplace_back(std::move(c), tx.id);
            } catch (const Error& e) {
                report.failures.push_back({ledger, key, e.code()});
            }
        }
    }
    return report;
}

}  // namespace fedledger

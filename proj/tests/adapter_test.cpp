#include "fedledger/adapter.hpp"

#include "support.hpp"

#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <type_traits>

using namespace fedtest;

namespace {

std::string line(const std::string& platform, const std::string& device, const std::string& metric, std::int64_t ts,
                 std::int64_t value, const std::string& extra = "") {
    nlohmann::json j{{"platform", platform}, {"device", device}, {"metric", metric},
                     {"unit", std::string(unit_of(*metric_from_string(metric)))}, {"ts", ts}, {"value", value}};
    auto s = j.dump();
    if (!extra.empty()) s.insert(s.size() - 1, "," + extra);
    return s;
}

// Records what an adapter hands over; nothing else is reachable from here.
struct RecordingSink : TransactionSink {
    std::vector<Transaction> txs;
    std::set<std::string> refuse_devices;
    Receipt submit(const Transaction& tx) override {
        if (refuse_devices.count(tx.payload.str_arg("device"))) throw Error(ErrorCode::NotMember);
        txs.push_back(tx);
        return {true, txs.size() - 1, tx.id};
    }
    std::int64_t now() const override { return 42; }
};

AdapterRule rule(const std::string& platform, std::set<Metric> metrics, const std::string& ledger,
                 const std::string& signer = "s") {
    AdapterRule r;
    r.platform = platform;
    r.metrics = std::move(metrics);
    r.ledger = ledger;
    r.signer = signer;
    return r;
}

}  // namespace

TEST(SensorEvent, ParsesScalarGpsAndLot) {
    auto e = SensorEvent::parse(line("p", "d", "temperature", 5, 4200, "\"lot\":\"L1\""));
    EXPECT_EQ(e.platform, "p");
    EXPECT_EQ(e.metric, Metric::temperature);
    EXPECT_EQ(e.value, 4200);
    EXPECT_EQ(e.lot, "L1");
    auto g = SensorEvent::parse(
        R"({"platform":"p","device":"t","metric":"gps","unit":"udeg","ts":1,"lat":45000000,"lon":-9000000})");
    EXPECT_EQ(g.lat, 45'000'000);
    EXPECT_EQ(g.lon, -9'000'000);
    EXPECT_FALSE(g.lot.has_value());
    nlohmann::json round = e;
    EXPECT_EQ(SensorEvent::parse(round.dump()).idempotency_key(), e.idempotency_key());
}

TEST(SensorEvent, RejectsMalformedLines) {
    struct Case {
        std::string text;
        ErrorCode code;
    };
    std::vector<Case> cases{
        {"not json", ErrorCode::ParseError},
        {"[1,2]", ErrorCode::ParseError},
        {R"({"platform":"p","device":"d","metric":"temperature","unit":"celsius_x1000","value":1})", ErrorCode::ParseError},
        {R"({"platform":"p","device":"d","metric":"temperature","unit":"celsius_x1000","ts":"1","value":1})", ErrorCode::ParseError},
        {R"({"platform":"p","device":"d","metric":"temperature","unit":"celsius_x1000","ts":1,"value":1.5})", ErrorCode::ParseError},
        {R"({"platform":"p","device":"d","metric":"temperature","unit":"celsius_x1000","ts":-1,"value":1})", ErrorCode::ParseError},
        {R"({"platform":"","device":"d","metric":"temperature","unit":"celsius_x1000","ts":1,"value":1})", ErrorCode::ParseError},
        {R"({"platform":"p","device":"d","metric":"pressure","unit":"hpa","ts":1,"value":1})", ErrorCode::UnknownMetric},
        {R"({"platform":"p","device":"d","metric":"temperature","unit":"fahrenheit","ts":1,"value":1})", ErrorCode::UnknownMetric},
        {R"({"platform":"p","device":"d","metric":"gps","unit":"udeg","ts":1,"value":1})", ErrorCode::ParseError},
        {R"({"platform":"p","device":"d","metric":"temperature","unit":"celsius_x1000","ts":1,"value":1,"lot":""})", ErrorCode::ParseError},
    };
    for (const auto& c : cases) expect_error(c.code, [&] { SensorEvent::parse(c.text); });
}

TEST(SensorEvent, EveryMetricHasOneUnit) {
    const std::map<std::string, std::string> want{
        {"temperature", "celsius_x1000"}, {"humidity", "pct_x1000"},   {"wind_speed", "mps_x1000"},
        {"wind_direction", "deg_x1000"},  {"rainfall", "mm_x1000"},     {"soil_moisture", "pct_x1000"},
        {"gps", "udeg"},                  {"box_presence", "bool"},     {"meter_power", "wh_x1000"}};
    for (const auto& [metric, unit] : want) {
        auto m = metric_from_string(metric);
        ASSERT_TRUE(m.has_value()) << metric;
        EXPECT_EQ(unit_of(*m), unit);
        EXPECT_EQ(to_string(*m), metric);
    }
}

TEST(IdempotencyKey, MatchesHandEncodingAndIgnoresValue) {
    auto e = SensorEvent::parse(line("plat", "dev", "humidity", 0x0102030405060708, 1));
    Bytes b;
    auto put_str = [&](const std::string& s) {
        for (int shift = 24; shift >= 0; shift -= 8) b.push_back(static_cast<std::uint8_t>(s.size() >> shift));
        b.insert(b.end(), s.begin(), s.end());
    };
    put_str("plat");
    put_str("dev");
    put_str("humidity");
    for (std::uint8_t i = 1; i <= 8; ++i) b.push_back(i);
    EXPECT_EQ(e.idempotency_key(), sha256(ByteView(b)));
    auto other_value = SensorEvent::parse(line("plat", "dev", "humidity", 0x0102030405060708, 99));
    EXPECT_EQ(other_value.idempotency_key(), e.idempotency_key());
}

TEST(IdempotencyKey, TenThousandDistinctTuplesNeverCollide) {
    std::set<Digest> keys;
    std::set<std::tuple<std::string, std::string, std::string, std::int64_t>> tuples;
    std::mt19937_64 rng(8);
    const std::vector<std::string> metrics{"temperature", "humidity", "rainfall", "meter_power"};
    while (tuples.size() < 10'000) {
        // short, overlapping strings so a naive concatenation would collide
        std::string p = std::string(rng() % 3, 'a') + "b";
        std::string d = std::string(rng() % 3, 'b') + "a";
        const auto& m = metrics[rng() % metrics.size()];
        std::int64_t ts = static_cast<std::int64_t>(rng() % 400);
        if (!tuples.insert({p, d, m, ts}).second) continue;
        keys.insert(SensorEvent::parse(line(p, d, m, ts, 0)).idempotency_key());
    }
    EXPECT_EQ(keys.size(), tuples.size());
}

TEST(Ingestor, DeduplicatesAcrossBatchesAndNumbersLines) {
    EventIngestor ing;
    std::vector<std::string> batch{line("p", "d", "temperature", 1, 10), "", line("p", "d", "temperature", 1, 11),
                                   "garbage", line("q", "d", "temperature", 2, 10), line("p", "d", "humidity", 1, 10)};
    auto r = ing.ingest_lines(batch, std::string("p"));
    ASSERT_EQ(r.accepted.size(), 2u);
    ASSERT_EQ(r.rejected.size(), 3u);
    EXPECT_EQ(r.rejected[0].line, 3u);
    EXPECT_EQ(r.rejected[0].reason, ErrorCode::DuplicateEvent);
    EXPECT_EQ(r.rejected[1].line, 4u);
    EXPECT_EQ(r.rejected[1].reason, ErrorCode::ParseError);
    EXPECT_EQ(r.rejected[2].line, 5u);
    EXPECT_EQ(r.rejected[2].reason, ErrorCode::PlatformMismatch);

    std::stringstream replay;
    for (const auto& l : batch) replay << l << "\n";
    auto again = ing.ingest(replay, std::string("p"));
    EXPECT_TRUE(again.accepted.empty());
    EXPECT_EQ(ing.unique_keys(), 2u);

    auto any = ing.ingest_lines(std::vector<std::string>{line("q", "d", "temperature", 2, 10)});
    EXPECT_EQ(any.accepted.size(), 1u);  // no platform filter
}

TEST(Ingestor, ConcurrentFeedsAcceptEachKeyOnce) {
    EventIngestor ing;
    std::vector<std::string> lines;
    for (int i = 0; i < 2000; ++i) lines.push_back(line("p", "d" + std::to_string(i % 7), "rainfall", i, i));
    std::atomic<std::size_t> accepted{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            auto copy = lines;
            std::shuffle(copy.begin(), copy.end(), std::mt19937_64(static_cast<std::uint64_t>(t)));
            accepted += ing.ingest_lines(copy).accepted.size();
        });
    }
    for (auto& th : threads) th.join();
    EXPECT_EQ(accepted.load(), 2000u);
    EXPECT_EQ(ing.unique_keys(), 2000u);
}

TEST(Rules, FirstMatchWinsInConfigOrder) {
    std::vector<AdapterRule> rules{rule("p", {Metric::temperature}, "cold"), rule("p", {}, "any"),
                                   rule("p", {Metric::humidity}, "never")};
    auto t = SensorEvent::parse(line("p", "d", "temperature", 1, 1));
    auto h = SensorEvent::parse(line("p", "d", "humidity", 1, 1));
    EXPECT_EQ(map_event(t, rules).ledger, "cold");
    EXPECT_EQ(map_event(h, rules).ledger, "any");
    expect_error(ErrorCode::NoMatchingRule, [&] { map_event(SensorEvent::parse(line("x", "d", "humidity", 1, 1)), rules); });
}

TEST(Rules, JsonRoundTripAndValidation) {
    auto r = nlohmann::json::parse(R"({"platform":"m","ledger":"market","contract":"market","method":"meter",
                                        "signer":"meter-adapter","metrics":["meter_power"]})")
                 .get<AdapterRule>();
    EXPECT_EQ(r.contract, ContractKind::market);
    EXPECT_EQ(r.metrics, std::set<Metric>{Metric::meter_power});
    nlohmann::json back = r;
    EXPECT_EQ(back.get<AdapterRule>().method, "meter");
    expect_error(ErrorCode::UnknownMetric,
                 [] { nlohmann::json::parse(R"({"platform":"a","ledger":"b","signer":"c","metrics":["x"]})").get<AdapterRule>(); });
    expect_error(ErrorCode::UnknownContract,
                 [] { nlohmann::json::parse(R"({"platform":"a","ledger":"b","signer":"c","contract":"y"})").get<AdapterRule>(); });
}

TEST(EventCall, MarketShapeCarriesOnlyMeterFields) {
    auto e = SensorEvent::parse(line("m", "ST-7", "meter_power", 9, 5000, "\"lot\":\"L\""));
    auto c = event_call(e, ContractKind::market, "meter");
    EXPECT_EQ(c.args.size(), 4u);
    EXPECT_EQ(c.int_arg("value"), 5000);
    EXPECT_EQ(c.str_arg("device"), "ST-7");
    auto p = event_call(e, ContractKind::provenance, "record");
    EXPECT_EQ(p.str_arg("lot"), "L");
    EXPECT_EQ(p.str_arg("key"), e.idempotency_key().hex());
}

TEST(FlushBatch, GroupsByLedgerSortsByTsAndRecordsFailures) {
    static_assert(std::is_same_v<decltype(&flush_batch),
                                 SubmissionReport (*)(std::vector<MappedCall>, TransactionSink&, const WalletLookup&)>,
                  "adapters only ever see the sink");
    WalletBook wallets;
    wallets.add("s", 0);
    std::vector<AdapterRule> rules{rule("p", {Metric::temperature}, "zeta"), rule("p", {}, "alpha")};
    std::vector<MappedCall> calls;
    // arrival order: ts 5, 3, 3(b), 1 on zeta; ts 2, 1 on alpha
    for (auto [dev, metric, ts] : std::vector<std::tuple<std::string, std::string, int>>{
             {"a", "temperature", 5}, {"a", "temperature", 3}, {"b", "temperature", 3},
             {"bad", "temperature", 1}, {"a", "humidity", 2}, {"a", "humidity", 1}}) {
        calls.push_back(map_event(SensorEvent::parse(line("p", dev, metric, ts, 0)), rules));
    }
    RecordingSink sink;
    sink.refuse_devices = {"bad"};
    auto report = flush_batch(calls, sink, [&](const std::string& n) -> Wallet& { return wallets.get(n); });
    ASSERT_EQ(sink.txs.size(), 5u);
    std::vector<std::pair<std::string, std::int64_t>> order;
    for (const auto& tx : sink.txs) order.emplace_back(tx.ledger, tx.payload.int_arg("ts"));
    std::vector<std::pair<std::string, std::int64_t>> want{{"alpha", 1}, {"alpha", 2}, {"zeta", 3}, {"zeta", 3}, {"zeta", 5}};
    EXPECT_EQ(order, want);
    EXPECT_EQ(sink.txs[2].payload.str_arg("device"), "a");  // equal ts keeps arrival order
    EXPECT_EQ(sink.txs[3].payload.str_arg("device"), "b");
    EXPECT_EQ(report.accepted.at("alpha"), 2u);
    EXPECT_EQ(report.accepted.at("zeta"), 3u);
    ASSERT_EQ(report.failures.size(), 1u);
    EXPECT_EQ(report.failures[0].reason, ErrorCode::NotMember);
    for (const auto& tx : sink.txs) EXPECT_EQ(tx.timestamp, 42);
    // per-ledger nonces increase in submission order
    EXPECT_LT(sink.txs[0].nonce, sink.txs[1].nonce);
    EXPECT_LT(sink.txs[2].nonce, sink.txs[4].nonce);
}

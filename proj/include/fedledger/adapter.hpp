#pragma once

#include "fedledger/call.hpp"
#include "fedledger/error.hpp"
#include "fedledger/federation.hpp"

#include "json.hpp"

#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace fedledger {

enum class Metric : std::uint8_t {
    temperature,
    humidity,
    wind_speed,
    wind_direction,
    rainfall,
    soil_moisture,
    gps,
    box_presence,
    meter_power,
};

std::string_view to_string(Metric m) noexcept;
std::optional<Metric> metric_from_string(std::string_view name) noexcept;
/// The one unit each metric may be reported in.
std::string_view unit_of(Metric m) noexcept;

/// One platform reading. Scalar values are fixed-point integers (x1000);
/// gps carries lat/lon in micro-degrees instead.
struct SensorEvent {
    std::string platform;
    std::string device;
    Metric metric = Metric::temperature;
    std::int64_t value = 0;
    std::int64_t lat = 0;
    std::int64_t lon = 0;
    std::string unit;
    std::int64_t ts = 0;
    std::optional<std::string> lot;

    /// sha256 over the canonical (platform, device, metric, ts).
    Digest idempotency_key() const;

    /// Parses one NDJSON line. Throws Error(ParseError | UnknownMetric).
    static SensorEvent parse(std::string_view line);
};

void to_json(nlohmann::json& j, const SensorEvent& e);

struct RejectedLine {
    std::size_t line = 0;  // 1-based
    ErrorCode reason = ErrorCode::ParseError;
    std::string detail;
};

void to_json(nlohmann::json& j, const RejectedLine& r);

struct IngestResult {
    std::vector<SensorEvent> accepted;
    std::vector<RejectedLine> rejected;
};

/// Validates and deduplicates platform feeds. The seen-key set persists
/// across calls, so a replayed batch is rejected line by line.
class EventIngestor {
public:
    /// `platform`, when set, rejects lines from any other platform.
    IngestResult ingest(std::istream& in, const std::optional<std::string>& platform = std::nullopt);
    IngestResult ingest_lines(std::span<const std::string> lines,
                              const std::optional<std::string>& platform = std::nullopt);
    std::size_t unique_keys() const;

private:
    void take(std::size_t line_no, std::string_view line, const std::optional<std::string>& platform,
              IngestResult& out);

    mutable std::mutex mu_;
    std::set<Digest> seen_;
};

struct AdapterRule {
    std::string platform;
    std::set<Metric> metrics;  // empty matches every metric
    std::string ledger;
    ContractKind contract = ContractKind::provenance;
    std::string method = "record";
    std::string signer;  // wallet name

    bool matches(const SensorEvent& e) const;
};

void to_json(nlohmann::json& j, const AdapterRule& r);
void from_json(const nlohmann::json& j, AdapterRule& r);

struct MappedCall {
    SensorEvent event;
    std::string ledger;
    std::string signer;
    ContractCall call;
};

/// The contract call a reading turns into for the given target.
ContractCall event_call(const SensorEvent& e, ContractKind contract, const std::string& method);

/// First matching rule in config order wins. Throws Error(NoMatchingRule).
MappedCall map_event(const SensorEvent& e, std::span<const AdapterRule> rules);

struct SubmitFailure {
    std::string ledger;
    std::string key;  // idempotency key hex
    ErrorCode reason = ErrorCode::BadArgs;
};

void to_json(nlohmann::json& j, const SubmitFailure& f);

struct SubmissionReport {
    std::map<std::string, std::size_t> accepted;  // per ledger
    std::vector<SubmitFailure> failures;
    std::vector<std::pair<MappedCall, Digest>> submitted;  // call and its tx id, in submission order
};

void to_json(nlohmann::json& j, const SubmissionReport& r);

using WalletLookup = std::function<Wallet&(const std::string& name)>;

/// Submits the calls grouped by ledger (ids in order), each group sorted by
/// event ts with arrival order kept for equal ts. Rejections are recorded,
/// never thrown. Sealing is left to the caller.
SubmissionReport flush_batch(std::vector<MappedCall> calls, TransactionSink& sink, const WalletLookup& wallets);

}  // namespace fedledger

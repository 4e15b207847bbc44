#pragma once

#include "fedledger/adapter.hpp"
#include "fedledger/federation.hpp"
#include "fedledger/interledger.hpp"

#include "json.hpp"

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fedledger {

/// Farm, transport A, storage & distribution, transport B, supermarket.
inline const std::array<std::string, 5> kSegments{"SF", "TRA", "SDC", "TRB", "SM"};

std::optional<std::size_t> segment_index(std::string_view segment);

/// Bounds on a fixed-point (x1000) metric; both ends inclusive.
struct ConditionRule {
    std::string metric;
    std::int64_t min = 0;
    std::int64_t max = 0;
    std::vector<std::string> segments;  // empty applies everywhere

    bool applies_to(const std::string& segment) const;
    std::string describe() const;
};

void to_json(nlohmann::json& j, const ConditionRule& r);
void from_json(const nlohmann::json& j, ConditionRule& r);

struct Reading {
    std::string segment;
    std::string ledger;
    std::string device;
    std::string metric;
    std::int64_t value = 0;
    std::int64_t ts = 0;
    Digest tx_id;
};

struct Violation {
    std::string segment;
    std::string metric;
    std::int64_t value = 0;
    std::int64_t ts = 0;
    std::string rule;
    Digest tx_id;
};

void to_json(nlohmann::json& j, const Violation& v);

/// One violation per (reading, applicable rule) the reading falls outside of.
std::vector<Violation> evaluate_conditions(std::span<const Reading> readings, std::span<const ConditionRule> rules);

struct CustodyHop {
    std::string segment;
    std::int64_t ts = 0;
    std::string escrow;  // empty for the registration hop
};

struct MetricSummary {
    std::size_t count = 0;
    std::int64_t min = 0;
    std::int64_t max = 0;
};

struct UnverifiableEntry {
    std::string segment;
    std::string ledger;
    Digest tx_id;
    std::string reason;
};

enum class TraceVerdict : std::uint8_t { clean, violations };
std::string_view to_string(TraceVerdict v) noexcept;

struct TraceReport {
    std::string lot;
    std::vector<CustodyHop> custody_chain;
    std::map<std::string, std::map<std::string, MetricSummary>> summaries;  // segment -> metric -> summary
    std::vector<Reading> readings;  // verified readings, consortium order
    std::vector<Violation> violations;
    std::vector<UnverifiableEntry> unverifiable;
    TraceVerdict verdict = TraceVerdict::clean;
    std::size_t handovers = 0;
    std::size_t proofs_checked = 0;
    Digest consortium_tip;

    std::vector<std::string> segments() const;
    std::string to_text() const;
};

void to_json(nlohmann::json& j, const TraceReport& r);

struct SegmentBinding {
    std::string ledger;
    std::string identity;  // wallet name of the segment's adapter/operator
};

struct FoodchainConfig {
    std::string consortium;
    std::map<std::string, SegmentBinding> segments;
    std::vector<ConditionRule> conditions;
    std::int64_t delta = kDefaultDeltaMs;

    /// Throws Error(BadConfig) unless all five segments are bound to distinct ledgers.
    void validate() const;
};

void from_json(const nlohmann::json& j, FoodchainConfig& c);

std::string qr_payload(const std::string& lot, const Digest& consortium_tip);

enum class PinStatus : std::uint8_t { current, tip_advanced, history_diverged };
std::string_view to_string(PinStatus v) noexcept;

struct QrTarget {
    std::string lot;
    std::string tip_prefix;  // 16 lowercase hex digits
};

/// Throws Error(BadQrPayload).
QrTarget parse_qr_payload(std::string_view payload);
/// Where a pinned tip prefix sits in `chain`: the tip itself, an ancestor, or nowhere.
PinStatus pin_status(const std::string& tip_prefix, std::span<const Block> chain);

struct QrResolution {
    TraceReport report;
    PinStatus pin = PinStatus::current;
};

void to_json(nlohmann::json& j, const QrResolution& r);

/// Result of one transfer attempt.
struct CustodyTransfer {
    std::string lot;
    std::string from;
    std::string to;
    SwapStatus swap;
};

void to_json(nlohmann::json& j, const CustodyTransfer& t);

class FoodChain {
public:
    FoodChain(Federation& fed, FoodchainConfig config, WalletLookup wallets, std::vector<AdapterRule> rules,
              std::uint64_t seed);

    const FoodchainConfig& config() const noexcept { return config_; }

    /// Registers a lot as held by `segment` (default: the farm). Seals the consortium.
    void register_lot(const std::string& lot, const std::string& segment = "SF");

    /// Full readings go to segment ledgers; lot-tagged readings also get a
    /// digest on the consortium. Seals every ledger it touched.
    SubmissionReport record_observations(std::span<const SensorEvent> events);

    /// Validates the hop and builds (but does not start) the custody swap.
    /// Errors: WrongSequence, NotCurrentHolder, LotNotFound.
    std::unique_ptr<SwapDriver> prepare_transfer(const std::string& lot, const std::string& from, const std::string& to,
                                                 const FaultSchedule& faults = {});
    /// Runs the custody swap to a terminal state, advancing the clock.
    CustodyTransfer transfer_custody(const std::string& lot, const std::string& from, const std::string& to,
                                     const FaultSchedule& faults = {});

    /// Errors: LotNotFound.
    TraceReport trace_lot(const std::string& lot) const;
    std::string qr_payload(const std::string& lot) const;
    QrResolution resolve_qr(std::string_view payload) const;

    std::vector<std::string> lots() const;
    /// Segment currently holding the lot.
    std::string holder(const std::string& lot) const;

private:
    std::string segment_of_ledger(const std::string& ledger) const;

    Federation& fed_;
    FoodchainConfig config_;
    WalletLookup wallets_;
    std::vector<AdapterRule> rules_;
    std::uint64_t seed_;
    std::map<std::string, int> attempts_;
};

}  // namespace fedledger

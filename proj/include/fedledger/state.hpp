#pragma once

#include "fedledger/codec.hpp"
#include "fedledger/crypto.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace fedledger {

// ---------------------------------------------------------------- token

struct TokenState {
    std::map<Address, std::int64_t> balances;
    std::int64_t total_minted = 0;
    std::optional<Address> minter;

    std::int64_t balance_of(const Address& who) const;
};

// ----------------------------------------------------------------- htlc

enum class AssetKind : std::uint8_t { token, custody, handover };
enum class EscrowStatus : std::uint8_t { locked, claimed, refunded };

std::string_view to_string(AssetKind v) noexcept;
std::string_view to_string(EscrowStatus v) noexcept;
std::optional<AssetKind> asset_kind_from_string(std::string_view name) noexcept;

/// A hash/time-locked escrow. The claim window is [locked_at, timelock);
/// refunds are possible from timelock onwards.
struct HtlcEscrow {
    std::string id;
    Address payer;
    Address payee;
    AssetKind asset = AssetKind::token;
    std::int64_t amount = 0;
    std::string lot;
    std::string from_segment;
    std::string to_segment;
    Digest hashlock;
    std::int64_t timelock = 0;
    std::int64_t locked_at = 0;
    EscrowStatus status = EscrowStatus::locked;
    std::optional<Preimage> preimage;  // public once claimed
};

// ----------------------------------------------------------- provenance

struct ProvenanceRecord {
    Digest tx_id;
    std::string key;
    std::string platform;
    std::string device;
    std::string metric;
    std::string unit;
    std::string lot;
    std::int64_t value = 0;
    std::int64_t lat = 0;
    std::int64_t lon = 0;
    std::int64_t ts = 0;
};

/// Compact pointer from the consortium ledger to a full reading on a segment ledger.
struct DigestEvent {
    Digest tx_id;
    std::string lot;
    std::string segment;
    std::string ledger;
    std::string metric;
    Digest record_tx;
    std::int64_t ts = 0;
};

struct LotCustody {
    std::string segment;
    Address holder;
    std::string locked_by;  // escrow id while a handover is in flight
    std::int64_t registered_at = 0;
};

enum class CustodyKind : std::uint8_t { custody_out, custody_in };
std::string_view to_string(CustodyKind v) noexcept;

struct CustodyEvent {
    std::string lot;
    CustodyKind kind = CustodyKind::custody_out;
    std::string segment;
    std::int64_t ts = 0;
    std::string escrow;
    Digest tx_id;
};

struct HandoverRecord {
    std::string lot;
    std::string from_segment;
    std::string to_segment;
    std::string escrow;
    std::int64_t ts = 0;
    Digest tx_id;
};

struct ProvenanceState {
    std::vector<ProvenanceRecord> records;
    std::set<std::string> record_keys;
    std::vector<DigestEvent> digests;
    std::map<std::string, LotCustody> lots;
    std::vector<CustodyEvent> custody;
    std::vector<HandoverRecord> handovers;
};

// --------------------------------------------------------------- market

enum class Role : std::uint8_t { dso, fleet_manager, ev_user, auditor };
enum class RequestScenario : std::uint8_t { day_ahead, intraday };
enum class RequestStatus : std::uint8_t { open, closed, assigned, settled, expired };
enum class UserType : std::uint8_t { commuter, fleet, casual };
enum class EvStatus : std::uint8_t { idle, charging, driving };
enum class SettlementOutcome : std::uint8_t { paid, refunded };

std::string_view to_string(Role v) noexcept;
std::string_view to_string(RequestScenario v) noexcept;
std::string_view to_string(RequestStatus v) noexcept;
std::string_view to_string(UserType v) noexcept;
std::string_view to_string(EvStatus v) noexcept;
std::string_view to_string(SettlementOutcome v) noexcept;
std::optional<Role> role_from_string(std::string_view) noexcept;
std::optional<RequestScenario> scenario_from_string(std::string_view) noexcept;
std::optional<UserType> user_type_from_string(std::string_view) noexcept;
std::optional<EvStatus> ev_status_from_string(std::string_view) noexcept;

/// Coordinates in micro-degrees.
struct GeoPoint {
    std::int64_t lat = 0;
    std::int64_t lon = 0;
    bool operator==(const GeoPoint&) const = default;
};

struct Timeslot {
    std::int64_t start = 0;
    std::int64_t end = 0;
    bool operator==(const Timeslot&) const = default;
};

struct Offer {
    std::string request;
    Address fleet_manager;
    std::int64_t price_tokens = 0;
    std::int64_t committed_wh = 0;
    std::int64_t submitted_at = 0;
    Digest tx_id;
    bool operator==(const Offer&) const = default;
};

struct FlexRequest {
    std::string id;
    RequestScenario scenario = RequestScenario::intraday;
    std::int64_t energy_wh = 0;
    Timeslot slot;
    GeoPoint location;
    std::int64_t radius_m = 0;
    std::int64_t incentive_tokens = 0;
    RequestStatus status = RequestStatus::open;
    Address issuer;
    std::int64_t posted_at = 0;
    std::vector<Offer> offers;
    std::optional<Offer> winner;
};

struct EvProfile {
    std::string id;
    UserType user_type = UserType::commuter;
    GeoPoint location;
    std::int64_t residual_autonomy_m = 0;
    EvStatus status = EvStatus::idle;
    std::int64_t battery_capacity_wh = 0;
    Address owner;
    bool operator==(const EvProfile&) const = default;
};

struct Assignment {
    std::string request;
    std::string ev;
    std::string station;
    Address owner;
    Timeslot slot;
    std::int64_t accepted_at = 0;
    Digest tx_id;
};

/// One meter increment; value is Wh x 1000.
struct MeterReading {
    std::string key;
    std::string device;
    std::int64_t value = 0;
    std::int64_t ts = 0;
    Digest tx_id;
};

struct ChargingRecord {
    std::string request;
    std::string ev;
    std::string station;
    std::int64_t start = 0;
    std::int64_t end = 0;
    std::int64_t delivered_wh = 0;
    std::vector<Digest> meter_txs;
};

struct Settlement {
    std::string request;
    std::int64_t delivered_wh = 0;
    std::int64_t committed_wh = 0;
    std::int64_t tolerance_bps = 0;
    SettlementOutcome outcome = SettlementOutcome::refunded;
    std::int64_t settled_at = 0;
};

struct MarketParams {
    std::int64_t bid_lead_ms = 30 * 60 * 1000;
    std::int64_t tolerance_bps = 500;
    std::int64_t day_ms = 24LL * 60 * 60 * 1000;
};

struct MarketState {
    MarketParams params;
    std::map<Address, Role> roles;
    std::map<std::string, FlexRequest> requests;
    std::map<std::string, EvProfile> evs;
    std::vector<MeterReading> meters;
    std::set<std::string> meter_keys;
    std::map<std::string, Assignment> assignments;
    std::map<std::string, ChargingRecord> deliveries;
    std::map<std::string, Settlement> settlements;
};

// --------------------------------------------------------------- anchor

struct AnchorEntry {
    std::uint64_t height = 0;
    Digest state_root;
    std::int64_t anchored_at = 0;
    Digest tx_id;
};

struct AnchorState {
    std::map<std::string, std::vector<AnchorEntry>> by_source;
};

// ----------------------------------------------------------- membership

struct MembershipState {
    bool gated = false;
    std::optional<Address> authority;
    std::set<Address> members;

    bool admits(const Address& who) const { return !gated || members.count(who) > 0; }
};

// ------------------------------------------------------------ aggregate

/// Everything the contracts of one ledger know. Only integers and strings,
/// all containers ordered, so the encoding (and therefore the root) is a
/// pure function of the contents.
struct ContractState {
    TokenState token;
    std::map<std::string, HtlcEscrow> escrows;
    ProvenanceState provenance;
    MarketState market;
    AnchorState anchors;
    MembershipState membership;

    std::int64_t locked_tokens() const;
    /// Sum of balances plus tokens held in locked escrows.
    std::int64_t accounted_tokens() const;
    bool conserves_tokens() const { return accounted_tokens() == token.total_minted; }

    void encode(Writer& w) const;
    Digest root() const;
};

void to_json(nlohmann::json& j, const HtlcEscrow& v);
void to_json(nlohmann::json& j, const Offer& v);
void to_json(nlohmann::json& j, const FlexRequest& v);
void to_json(nlohmann::json& j, const EvProfile& v);
void to_json(nlohmann::json& j, const Assignment& v);
void to_json(nlohmann::json& j, const ChargingRecord& v);
void to_json(nlohmann::json& j, const Settlement& v);
void to_json(nlohmann::json& j, const AnchorEntry& v);

}  // namespace fedledger

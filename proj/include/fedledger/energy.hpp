#pragma once

#include "fedledger/federation.hpp"
#include "fedledger/geo.hpp"
#include "fedledger/interledger.hpp"

#include "json.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fedledger {

/// Production and consumption per slot for one grid zone.
struct PowerForecast {
    std::int64_t start_ms = 0;  // start of slot 0
    std::int64_t slot_ms = 3'600'000;
    std::vector<std::int64_t> production_wh;
    std::vector<std::int64_t> consumption_wh;

    /// Throws Error(BadArgs) on unequal lengths, negative entries or slot_ms <= 0.
    void validate() const;
};

void from_json(const nlohmann::json& j, PowerForecast& f);

struct SurplusSlot {
    std::size_t slot = 0;
    std::int64_t surplus_wh = 0;
    bool operator==(const SurplusSlot&) const = default;
};

/// Slots where production strictly exceeds consumption.
std::vector<SurplusSlot> detect_reverse_power_flow(const PowerForecast& f);

/// `tokens` per `per_wh` Wh.
struct TokenRate {
    std::int64_t tokens = 1;
    std::int64_t per_wh = 1000;
};

/// One day-ahead request per surplus slot, incentive rounded up.
/// Ids are "DA-<slot start>". Throws Error(EmptyForecast).
std::vector<FlexRequest> plan_day_ahead(const PowerForecast& f, const GeoPoint& zone, std::int64_t radius_m,
                                        const TokenRate& rate);

std::int64_t incentive_for(std::int64_t surplus_wh, const TokenRate& rate);

/// Contract calls for the market operations; each becomes exactly one transaction.
ContractCall post_request_call(const FlexRequest& r);
ContractCall post_offer_call(const std::string& request, std::int64_t price, std::int64_t committed_wh);
ContractCall close_call(const std::string& request);
ContractCall register_ev_call(const EvProfile& ev, bool on_behalf);
ContractCall accept_call(const std::string& request, const std::string& ev, const std::string& station);
ContractCall record_delivery_call(const std::string& request);
ContractCall settle_request_call(const std::string& request);

struct MarketConfig {
    std::string ledger;         // private market ledger
    std::string reward_ledger;  // where EV users are rewarded
    std::string dso;            // wallet names
    std::string reward_pool;
    std::int64_t reward_share_bps = 1000;
    std::int64_t settle_window_ms = 3'600'000;  // after slot end, before timelocks start running
    std::int64_t delta = kDefaultDeltaMs;
};

void from_json(const nlohmann::json& j, MarketConfig& c);

/// Settlement of one request: payment leg on the market ledger (DSO to
/// winning fleet manager), reward leg on the reward ledger (pool to EV
/// owner). Both are locked at acceptance and released together only when
/// the market contract has recorded a "paid" outcome.
struct SettlementRun {
    std::string request;
    std::int64_t price = 0;
    std::int64_t reward = 0;
    std::optional<SettlementOutcome> onchain;
    std::optional<ErrorCode> start_error;
    SwapStatus swap;
};

void to_json(nlohmann::json& j, const SettlementRun& r);

class EnergyMarket {
public:
    EnergyMarket(Federation& fed, MarketConfig config, const WalletBook& wallets);

    const MarketConfig& config() const noexcept { return config_; }

    /// Signs and submits one market transaction; sealing happens elsewhere.
    Receipt submit(Wallet& who, ContractCall call);

    /// Starts settlement swaps for newly assigned requests and polls the
    /// running ones. Called after every seal / clock step.
    void tick();
    /// Earliest time a running settlement needs attention.
    std::optional<std::int64_t> next_wakeup() const;
    bool settlements_idle() const;

    /// Schedule faults for the settlement swap of `request` (must precede acceptance).
    void set_faults(const std::string& request, FaultSchedule faults);

    std::vector<FlexRequest> requests() const;
    std::optional<FlexRequest> request(const std::string& id) const;
    std::vector<Candidate> candidates(const std::string& request) const;
    std::vector<SettlementRun> settlement_runs() const;

private:
    struct Running {
        SettlementRun run;
        std::unique_ptr<SwapDriver> driver;
    };
    void start_settlement(const FlexRequest& r, const Assignment& a);

    Federation& fed_;
    MarketConfig config_;
    const WalletBook& wallets_;
    std::map<std::string, Running> settlements_;
    std::map<std::string, FaultSchedule> faults_;
};

}  // namespace fedledger

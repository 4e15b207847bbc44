#pragma once

#include "fedledger/energy.hpp"
#include "fedledger/foodchain.hpp"
#include "fedledger/scenario.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fedledger {

struct AssertionOutcome {
    std::size_t step = 0;
    std::size_t line = 0;
    std::string check;
    bool ok = false;
    std::string detail;
};

void to_json(nlohmann::json& j, const AssertionOutcome& a);

struct ActionOutcome {
    std::size_t step = 0;
    std::int64_t at = 0;
    std::string action;
    bool ok = true;
    std::optional<ErrorCode> error;
    std::string detail;
};

void to_json(nlohmann::json& j, const ActionOutcome& a);

/// Drives a scenario on a logical clock. Single-threaded by design; the
/// gateway serializes its calls through mutex().
class Simulation {
public:
    explicit Simulation(Scenario scenario);
    ~Simulation();

    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    const Scenario& scenario() const noexcept { return scenario_; }
    Federation& federation() noexcept { return fed_; }
    const Federation& federation() const noexcept { return fed_; }
    WalletBook& wallets() noexcept { return wallets_; }
    FoodChain* foodchain() noexcept { return foodchain_.get(); }
    EnergyMarket* market() noexcept { return market_.get(); }
    std::recursive_mutex& mutex() noexcept { return mu_; }

    /// Runs every script step, then lets running settlements finish.
    void run();
    /// One scripted step: clock advance, the action, sealing, derived work.
    void run_step(const ScriptStep& step);
    /// Advances `ticks` * tick_ms, sealing pending transactions and driving
    /// settlements on the way.
    void step_ticks(std::int64_t ticks);
    /// Seals one ledger (or every ledger with pending transactions) and runs
    /// derived work.
    void seal(const std::optional<std::string>& ledger);
    /// Processes settlement wakeups until none is left.
    void drain();

    /// Submits without sealing; rejects calls whose dry run fails. Returns the tx id.
    Digest submit(const std::string& actor, const std::string& ledger, ContractCall call);

    std::vector<AnchorCheckpoint> anchor_checkpoints() const;
    std::optional<AnchorReport> verify_anchors_now() const;

    nlohmann::json report() const;
    bool ok() const;

private:
    void build();
    void advance_until(std::int64_t t);
    void after_change();
    void on_seal(const Ledger& ledger, const Block& block);
    CallResult call_and_seal(const std::string& actor, const std::string& ledger, ContractCall call);
    void execute(const ScriptStep& step);
    void do_ingest(const nlohmann::json& args);
    void do_transfer_custody(const nlohmann::json& args);
    void do_plan_day_ahead(const nlohmann::json& args);
    void do_fault(const nlohmann::json& args);
    void do_tamper(const nlohmann::json& args);
    AssertionOutcome do_assert(const ScriptStep& step);
    FaultSchedule& faults_for(const nlohmann::json& target);
    TraceReport trace(const std::string& lot);

    Scenario scenario_;
    Federation fed_;
    WalletBook wallets_;
    std::unique_ptr<FoodChain> foodchain_;
    std::unique_ptr<EnergyMarket> market_;
    EventIngestor ingestor_;
    std::mt19937_64 rng_;
    std::recursive_mutex mu_;

    std::map<std::string, FaultSchedule> lot_faults_;
    std::map<std::string, FaultSchedule> request_faults_;
    std::map<std::string, std::int64_t> drop_ppm_;  // per platform

    std::uint64_t last_anchored_ = 0;
    std::size_t seals_checked_ = 0;
    std::vector<nlohmann::json> invariant_failures_;
    std::vector<CustodyTransfer> custody_;
    std::vector<nlohmann::json> ingestion_;
    std::vector<nlohmann::json> tamper_;
    std::vector<ActionOutcome> actions_;
    std::vector<AssertionOutcome> assertions_;
};

struct RunResult {
    nlohmann::json report;
    std::string summary;
    int exit_code = 0;  // 0 ok, 2 failed assertion or action
};

/// Runs a scenario from start to end. The report's key order is canonical,
/// so the same scenario and seed give byte-identical report text.
RunResult run_scenario(const Scenario& scenario);
std::string report_text(const nlohmann::json& report);
std::string summarize(const nlohmann::json& report);

}  // namespace fedledger

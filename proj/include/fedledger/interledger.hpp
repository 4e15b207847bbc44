#pragma once

#include "fedledger/federation.hpp"

#include "json.hpp"

#include <array>
#include <climits>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fedledger {

/// Per-hop latency of a responsive party or coordinator, in logical ms.
inline constexpr std::int64_t kStepLatencyMs = 100;
inline constexpr std::int64_t kDefaultDeltaMs = 2000;

struct SwapLeg {
    std::string ledger;
    Address payer;
    Address payee;
    AssetKind asset = AssetKind::token;
    std::int64_t amount = 0;
    // custody / handover legs
    std::string lot;
    std::string from_segment;
    std::string to_segment;
};

/// Leg A is locked first by the secret holder's side and claimed last; leg B
/// is locked second and its claim reveals the preimage.
struct SwapPlan {
    std::string id;
    SwapLeg a;
    SwapLeg b;
    Address secret_holder;
    Digest hashlock;
    std::int64_t timelock_a = 0;
    std::int64_t timelock_b = 0;
    std::int64_t delta = kDefaultDeltaMs;

    std::string escrow_a() const { return id + "/a"; }
    std::string escrow_b() const { return id + "/b"; }

    /// Throws Error(BadSwapPlan) on same-ledger legs, bad timelock ordering
    /// or a hashlock that does not match `secret` (when given).
    void validate(const std::optional<Preimage>& secret = std::nullopt) const;

    /// Default timing: timelock_b = now + 6Δ, timelock_a = timelock_b + 2Δ.
    void set_default_timelocks(std::int64_t now);
};

enum class SwapPhase : std::uint8_t { init, a_locked, b_locked, b_claimed, complete, refunding, refunded };
enum class LegState : std::uint8_t { none, locked, claimed, refunded };

std::string_view to_string(SwapPhase v) noexcept;
std::string_view to_string(LegState v) noexcept;

struct SwapStatus {
    std::string swap;
    SwapPhase phase = SwapPhase::init;
    LegState leg_a = LegState::none;
    LegState leg_b = LegState::none;
    std::optional<Preimage> revealed;
    std::optional<ErrorCode> error;  // Timeout when the swap ended in refunds
    std::int64_t finished_at = 0;

    bool terminal() const { return phase == SwapPhase::complete || phase == SwapPhase::refunded; }
    /// Exactly one leg claimed: the outcome atomicity forbids.
    bool mixed() const { return (leg_a == LegState::claimed) != (leg_b == LegState::claimed); }
};

void to_json(nlohmann::json& j, const SwapStatus& s);

enum class StepFaultKind : std::uint8_t { none, delay, crash };

struct StepFault {
    StepFaultKind kind = StepFaultKind::none;
    std::int64_t delay_ms = 0;
};

enum class Party : std::uint8_t { initiator, responder };

/// Faults for the four coordinator steps (lock A, lock B, claim B, claim A)
/// plus which party reacts slowly (latency Δ instead of kStepLatencyMs).
struct FaultSchedule {
    std::array<StepFault, 4> steps{};
    std::optional<Party> slow_party;

    /// Every combination of {none, Δ, 2Δ, 3Δ delay, crash} per step for each
    /// slow party: 5^4 * 2 = 1250 schedules.
    static std::vector<FaultSchedule> enumerate(std::int64_t delta);
    std::string describe() const;
};

/// Wallets that act in a swap. Claims may be submitted by anyone (the escrow
/// credits its payee), so only the lockers, the secret holder and whoever
/// claims leg A need keys.
struct SwapParties {
    Wallet* a_payer = nullptr;
    Wallet* b_payer = nullptr;
    Wallet* secret_holder = nullptr;
    Wallet* a_claimer = nullptr;
};

enum class GateState : std::uint8_t { pending, open, closed };
/// Consulted before the reveal step; settlement uses it to hold the preimage
/// back until the on-chain outcome is known.
using RevealGate = std::function<GateState()>;

/// Drives one swap as a resumable state machine over a Federation.
///
/// The coordinator performs the four protocol steps and may crash or be
/// delayed. Independently, each party runs a watcher that never crashes: the
/// leg-A payee claims as soon as the preimage is public, and payers refund
/// once their timelock has passed. Safety rests on those watchers and the
/// timelock ordering, never on the coordinator.
class SwapDriver {
public:
    SwapDriver(Federation& fed, SwapPlan plan, SwapParties parties, Preimage secret, FaultSchedule faults = {},
               RevealGate gate = {});

    /// Pre-checks funding (Error InsufficientFunds / NotCurrentHolder; nothing
    /// is locked then) and schedules the first step.
    void start();
    /// Executes every action due at the federation's current time.
    void poll();
    /// Earliest time something is scheduled, if anything is.
    std::optional<std::int64_t> next_wakeup() const;
    bool terminal() const { return status_.terminal(); }

    const SwapPlan& plan() const noexcept { return plan_; }
    const SwapStatus& status() const noexcept { return status_; }

private:
    std::int64_t latency(Party p) const;
    LegState leg_state(const SwapLeg& leg, const std::string& escrow) const;
    std::optional<Preimage> revealed_on(const SwapLeg& leg, const std::string& escrow) const;
    bool submit_and_seal(Wallet& w, const std::string& ledger, ContractCall call);
    void coordinator_step();
    void watchers();
    void refresh();
    void schedule_next_step();

    Federation& fed_;
    SwapPlan plan_;
    SwapParties parties_;
    Preimage secret_;
    FaultSchedule faults_;
    RevealGate gate_;
    SwapStatus status_;

    int next_step_ = 0;  // 0..3, 4 = finished
    bool coordinator_done_ = false;
    std::optional<std::int64_t> step_due_;
    std::optional<std::int64_t> reveal_seen_at_;
    std::int64_t last_poll_ = INT64_MIN;
    bool started_ = false;
};

/// Polls a started driver until it is terminal, advancing the federation
/// clock to each wakeup.
SwapStatus drive_to_completion(Federation& fed, SwapDriver& driver);

/// Runs a swap to completion, advancing the federation clock as needed.
SwapStatus run_swap(Federation& fed, const SwapPlan& plan, const SwapParties& parties, const Preimage& secret,
                    const FaultSchedule& faults = {});

// -------------------------------------------------------------- anchoring

struct AnchorCheckpoint {
    std::string source_ledger;
    std::uint64_t height = 0;
    Digest state_root;
    std::string public_ledger;
    Digest tx_id;
    std::int64_t anchored_at = 0;
};

void to_json(nlohmann::json& j, const AnchorCheckpoint& c);

/// Commits the source ledger's tip (height, state_root) to the public ledger
/// and seals it. Errors: NothingNew, PublicLedgerRejected.
AnchorCheckpoint anchor_checkpoint(Federation& fed, Wallet& signer, const std::string& source,
                                   const std::string& public_ledger);

/// Checkpoints for `source` as recorded in the public ledger's sealed state.
std::vector<AnchorCheckpoint> read_checkpoints(const Ledger& public_ledger, const std::string& source);

struct AnchorReport {
    bool ok = true;
    std::optional<std::size_t> first_divergent_checkpoint;  // index into the checkpoint list
    std::optional<std::uint64_t> divergent_height;
    std::size_t checkpoints = 0;
    std::string reason;
};

void to_json(nlohmann::json& j, const AnchorReport& r);

/// Replays the source chain from genesis and compares the state root at every
/// anchored height. Read-only. Error: NoCheckpoints.
AnchorReport verify_anchors(const LedgerConfig& source_config, std::span<const Block> source_blocks,
                            const std::vector<AnchorCheckpoint>& checkpoints);
AnchorReport verify_anchors(const Federation& fed, const std::string& source, const std::string& public_ledger);

}  // namespace fedledger

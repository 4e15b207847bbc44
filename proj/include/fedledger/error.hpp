#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fedledger {

/// Every failure the library can report. Names are stable: they appear in
/// block receipts, run reports and gateway responses.
enum class ErrorCode : std::uint16_t {
    // ledger-core
    UnknownLedger,
    DuplicateLedger,
    BadSignature,
    StaleNonce,
    NotMember,
    WrongPayloadKind,
    NotAuthority,
    NotPermissioned,
    AlreadyMember,
    NotAMember,
    TxNotFound,
    TxPendingNotSealed,
    DecodeError,
    BadConfig,
    // contract-runtime
    UnknownContract,
    UnknownMethod,
    BadArgs,
    InsufficientBalance,
    NotTokenAuthority,
    NegativeAmount,
    TimelockInPast,
    WrongPreimage,
    Expired,
    NotLocked,
    NotYetExpired,
    EscrowExists,
    UnknownEscrow,
    DuplicateRecord,
    StaleAnchor,
    // interledger
    InsufficientFunds,
    Timeout,
    BadSwapPlan,
    NothingNew,
    PublicLedgerRejected,
    NoCheckpoints,
    // federation-adapter
    ParseError,
    UnknownMetric,
    DuplicateEvent,
    PlatformMismatch,
    NoMatchingRule,
    // foodchain
    WrongSequence,
    NotCurrentHolder,
    LotNotFound,
    LotExists,
    BadQrPayload,
    // energy-market
    EmptyForecast,
    NotDso,
    NotFleetManager,
    BadTimeslot,
    NonPositiveValue,
    UnknownRequest,
    RequestExists,
    RequestNotOpen,
    OverAsk,
    UnderCommit,
    BiddingStillOpen,
    NoOffers,
    UnknownEv,
    NotEvOwner,
    NotACandidate,
    AlreadyAssigned,
    NotAssigned,
    NoMeterData,
    NotEnded,
    AlreadySettled,
    // scenario-harness / gateway
    SchemaError,
    AssertionFailed,
    BadTarget,
    IoError,
    PortInUse,
    Forbidden,
};

std::string_view to_string(ErrorCode code) noexcept;
std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept;

class Error : public std::runtime_error {
public:
    explicit Error(ErrorCode code);
    Error(ErrorCode code, const std::string& detail);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace fedledger

#include "fedledger/error.hpp"

#include <array>
#include <utility>

namespace fedledger {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 71> kNames{{
    {ErrorCode::UnknownLedger, "UnknownLedger"},
    {ErrorCode::DuplicateLedger, "DuplicateLedger"},
    {ErrorCode::BadSignature, "BadSignature"},
    {ErrorCode::StaleNonce, "StaleNonce"},
    {ErrorCode::NotMember, "NotMember"},
    {ErrorCode::WrongPayloadKind, "WrongPayloadKind"},
    {ErrorCode::NotAuthority, "NotAuthority"},
    {ErrorCode::NotPermissioned, "NotPermissioned"},
    {ErrorCode::AlreadyMember, "AlreadyMember"},
    {ErrorCode::NotAMember, "NotAMember"},
    {ErrorCode::TxNotFound, "TxNotFound"},
    {ErrorCode::TxPendingNotSealed, "TxPendingNotSealed"},
    {ErrorCode::DecodeError, "DecodeError"},
    {ErrorCode::BadConfig, "BadConfig"},
    {ErrorCode::UnknownContract, "UnknownContract"},
    {ErrorCode::UnknownMethod, "UnknownMethod"},
    {ErrorCode::BadArgs, "BadArgs"},
    {ErrorCode::InsufficientBalance, "InsufficientBalance"},
    {ErrorCode::NotTokenAuthority, "NotTokenAuthority"},
    {ErrorCode::NegativeAmount, "NegativeAmount"},
    {ErrorCode::TimelockInPast, "TimelockInPast"},
    {ErrorCode::WrongPreimage, "WrongPreimage"},
    {ErrorCode::Expired, "Expired"},
    {ErrorCode::NotLocked, "NotLocked"},
    {ErrorCode::NotYetExpired, "NotYetExpired"},
    {ErrorCode::EscrowExists, "EscrowExists"},
    {ErrorCode::UnknownEscrow, "UnknownEscrow"},
    {ErrorCode::DuplicateRecord, "DuplicateRecord"},
    {ErrorCode::StaleAnchor, "StaleAnchor"},
    {ErrorCode::InsufficientFunds, "InsufficientFunds"},
    {ErrorCode::Timeout, "Timeout"},
    {ErrorCode::BadSwapPlan, "BadSwapPlan"},
    {ErrorCode::NothingNew, "NothingNew"},
    {ErrorCode::PublicLedgerRejected, "PublicLedgerRejected"},
    {ErrorCode::NoCheckpoints, "NoCheckpoints"},
    {ErrorCode::ParseError, "ParseError"},
    {ErrorCode::UnknownMetric, "UnknownMetric"},
    {ErrorCode::DuplicateEvent, "DuplicateEvent"},
    {ErrorCode::PlatformMismatch, "PlatformMismatch"},
    {ErrorCode::NoMatchingRule, "NoMatchingRule"},
    {ErrorCode::WrongSequence, "WrongSequence"},
    {ErrorCode::NotCurrentHolder, "NotCurrentHolder"},
    {ErrorCode::LotNotFound, "LotNotFound"},
    {ErrorCode::LotExists, "LotExists"},
    {ErrorCode::BadQrPayload, "BadQrPayload"},
    {ErrorCode::EmptyForecast, "EmptyForecast"},
    {ErrorCode::NotDso, "NotDso"},
    {ErrorCode::NotFleetManager, "NotFleetManager"},
    {ErrorCode::BadTimeslot, "BadTimeslot"},
    {ErrorCode::NonPositiveValue, "NonPositiveValue"},
    {ErrorCode::UnknownRequest, "UnknownRequest"},
    {ErrorCode::RequestExists, "RequestExists"},
    {ErrorCode::RequestNotOpen, "RequestNotOpen"},
    {ErrorCode::OverAsk, "OverAsk"},
    {ErrorCode::UnderCommit, "UnderCommit"},
    {ErrorCode::BiddingStillOpen, "BiddingStillOpen"},
    {ErrorCode::NoOffers, "NoOffers"},
    {ErrorCode::UnknownEv, "UnknownEv"},
    {ErrorCode::NotEvOwner, "NotEvOwner"},
    {ErrorCode::NotACandidate, "NotACandidate"},
    {ErrorCode::AlreadyAssigned, "AlreadyAssigned"},
    {ErrorCode::NotAssigned, "NotAssigned"},
    {ErrorCode::NoMeterData, "NoMeterData"},
    {ErrorCode::NotEnded, "NotEnded"},
    {ErrorCode::AlreadySettled, "AlreadySettled"},
    {ErrorCode::SchemaError, "SchemaError"},
    {ErrorCode::AssertionFailed, "AssertionFailed"},
    {ErrorCode::BadTarget, "BadTarget"},
    {ErrorCode::IoError, "IoError"},
    {ErrorCode::PortInUse, "PortInUse"},
    {ErrorCode::Forbidden, "Forbidden"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
    for (const auto& [c, name] : kNames) {
        if (c == code) return name;
    }
    return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept {
    for (const auto& [c, n] : kNames) {
        if (n == name) return c;
    }
    return std::nullopt;
}

Error::Error(ErrorCode code) : std::runtime_error(std::string(to_string(code))), code_(code) {}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace fedledger

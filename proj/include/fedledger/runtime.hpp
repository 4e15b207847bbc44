#pragma once

#include "fedledger/call.hpp"
#include "fedledger/error.hpp"
#include "fedledger/state.hpp"

#include <cstdint>
#include <string>
#include <utility>

namespace fedledger {

struct ExecContext {
    Address submitter;
    std::int64_t now = 0;
    Digest tx_id;
};

/// Outcome of one contract call, recorded next to the transaction in its block.
struct CallResult {
    bool ok = true;
    ErrorCode error = ErrorCode::BadArgs;  // meaningful only when !ok
    std::string value;

    static CallResult success(std::string value = {}) { return {true, ErrorCode::BadArgs, std::move(value)}; }
    static CallResult failure(ErrorCode code) { return {false, code, {}}; }

    bool operator==(const CallResult& o) const {
        return ok == o.ok && value == o.value && (ok || error == o.error);
    }

    void encode(Writer& w) const;
    static CallResult decode(Reader& r);
};

/// Executes `call` against `state`. On failure the state is left untouched.
/// Deterministic: the result depends only on (state, call, ctx).
CallResult execute_call(ContractState& state, const ContractCall& call, const ExecContext& ctx);

/// Pure form of execute_call.
std::pair<ContractState, CallResult> apply_call(const ContractState& state, const ContractCall& call,
                                                const ExecContext& ctx);

/// Returns the start of the logical day after `now`.
std::int64_t next_midnight(std::int64_t now, std::int64_t day_ms);

/// Settlement threshold: delivered >= committed * (1 - tolerance), in exact integer arithmetic.
bool delivery_sufficient(std::int64_t delivered_wh, std::int64_t committed_wh, std::int64_t tolerance_bps);

}  // namespace fedledger

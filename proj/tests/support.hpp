#pragma once

// Shared fixtures for the unit tests.

#include "fedledger/error.hpp"
#include "fedledger/federation.hpp"
#include "fedledger/ledger.hpp"

#include <gtest/gtest.h>

#include <string>

namespace fedtest {

using namespace fedledger;

inline KeyPair key(const std::string& name) { return KeyPair::from_seed(sha256("test-key:" + name)); }

inline ContractCall mint(const Address& to, std::int64_t amount) {
    return {ContractKind::token, "mint", {{"to", to.hex()}, {"amount", amount}}};
}

inline ContractCall transfer(const Address& to, std::int64_t amount) {
    return {ContractKind::token, "transfer", {{"to", to.hex()}, {"amount", amount}}};
}

inline LedgerConfig open_ledger(const std::string& id, const std::optional<Address>& minter = std::nullopt) {
    LedgerConfig c;
    c.id = id;
    c.minter = minter;
    return c;
}

/// Expects `fn` to throw fedledger::Error with `code`.
template <class Fn>
void expect_error(ErrorCode code, Fn&& fn) {
    try {
        fn();
        ADD_FAILURE() << "expected " << to_string(code) << ", nothing thrown";
    } catch (const Error& e) {
        EXPECT_EQ(to_string(e.code()), to_string(code)) << e.what();
    }
}

/// Result recorded for `tx_id` in its sealed block.
inline CallResult result_of(const Ledger& l, const Digest& tx_id) {
    auto loc = l.locate(tx_id);
    if (!loc) throw Error(ErrorCode::TxNotFound);
    return l.block(loc->height).results[loc->index];
}

}  // namespace fedtest

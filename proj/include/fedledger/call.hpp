#pragma once

#include "fedledger/codec.hpp"
#include "fedledger/crypto.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace fedledger {

enum class ContractKind : std::uint8_t { token = 0, htlc = 1, provenance = 2, market = 3, anchor = 4, membership = 5 };

std::string_view to_string(ContractKind kind) noexcept;
std::optional<ContractKind> contract_kind_from_string(std::string_view name) noexcept;

/// Argument values are integers or strings only; binary values travel as hex.
using Value = std::variant<std::int64_t, std::string>;
using Args = std::map<std::string, Value, std::less<>>;

struct ContractCall {
    ContractKind contract = ContractKind::token;
    std::string method;
    Args args;

    bool operator==(const ContractCall&) const = default;

    // Accessors throw Error(BadArgs) on a missing key or a type mismatch.
    std::int64_t int_arg(std::string_view key) const;
    const std::string& str_arg(std::string_view key) const;
    std::optional<std::int64_t> opt_int(std::string_view key) const;
    std::optional<std::string> opt_str(std::string_view key) const;
    Digest digest_arg(std::string_view key) const;
    Address address_arg(std::string_view key) const;

    void encode(Writer& w) const;
    static ContractCall decode(Reader& r);
};

void to_json(nlohmann::json& j, const ContractCall& call);
void from_json(const nlohmann::json& j, ContractCall& call);

}  // namespace fedledger

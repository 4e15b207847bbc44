#include "fedledger/call.hpp"

#include "fedledger/error.hpp"

#include <array>
#include <utility>

namespace fedledger {

namespace {

constexpr std::array<std::pair<ContractKind, std::string_view>, 6> kContracts{{
    {ContractKind::token, "token"},
    {ContractKind::htlc, "htlc"},
    {ContractKind::provenance, "provenance"},
    {ContractKind::market, "market"},
    {ContractKind::anchor, "anchor"},
    {ContractKind::membership, "membership"},
}};

constexpr std::uint8_t kIntTag = 0;
constexpr std::uint8_t kStrTag = 1;

const Value& find_arg(const Args& args, std::string_view key) {
    auto it = args.find(key);
    if (it == args.end()) throw Error(ErrorCode::BadArgs, "missing argument '" + std::string(key) + "'");
    return it->second;
}

}  // namespace

std::string_view to_string(ContractKind kind) noexcept {
    for (const auto& [k, name] : kContracts) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<ContractKind> contract_kind_from_string(std::string_view name) noexcept {
    for (const auto& [k, n] : kContracts) {
        if (n == name) return k;
    }
    return std::nullopt;
}

std::int64_t ContractCall::int_arg(std::string_view key) const {
    const auto& v = find_arg(args, key);
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    throw Error(ErrorCode::BadArgs, "argument '" + std::string(key) + "' must be an integer");
}

const std::string& ContractCall::str_arg(std::string_view key) const {
    const auto& v = find_arg(args, key);
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw Error(ErrorCode::BadArgs, "argument '" + std::string(key) + "' must be a string");
}

std::optional<std::int64_t> ContractCall::opt_int(std::string_view key) const {
    if (args.find(key) == args.end()) return std::nullopt;
    return int_arg(key);
}

std::optional<std::string> ContractCall::opt_str(std::string_view key) const {
    if (args.find(key) == args.end()) return std::nullopt;
    return str_arg(key);
}

Digest ContractCall::digest_arg(std::string_view key) const {
    try {
        return Digest::from_hex(str_arg(key));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::BadArgs) throw;
        throw Error(ErrorCode::BadArgs, "argument '" + std::string(key) + "' must be 64 hex digits");
    }
}

Address ContractCall::address_arg(std::string_view key) const { return Address{digest_arg(key)}; }

void ContractCall::encode(Writer& w) const {
    w.u8(static_cast<std::uint8_t>(contract));
    w.str(method);
    w.u32(static_cast<std::uint32_t>(args.size()));
    for (const auto& [key, value] : args) {
        w.str(key);
        if (const auto* i = std::get_if<std::int64_t>(&value)) {
            w.u8(kIntTag);
            w.i64(*i);
        } else {
            w.u8(kStrTag);
            w.str(std::get<std::string>(value));
        }
    }
}

ContractCall ContractCall::decode(Reader& r) {
    ContractCall call;
    auto kind = r.u8();
    if (kind >= kContracts.size()) throw Error(ErrorCode::DecodeError, "unknown contract tag");
    call.contract = static_cast<ContractKind>(kind);
    call.method = r.str();
    auto n = r.count(5);
    std::string previous;
    for (std::uint32_t i = 0; i < n; ++i) {
        auto key = r.str();
        // Canonical form: strictly ascending keys, so every call has one encoding.
        if (i > 0 && key <= previous) throw Error(ErrorCode::DecodeError, "argument keys not canonical");
        auto tag = r.u8();
        if (tag == kIntTag) {
            call.args.emplace(key, r.i64());
        } else if (tag == kStrTag) {
            call.args.emplace(key, r.str());
        } else {
            throw Error(ErrorCode::DecodeError, "unknown value tag");
        }
        previous = std::move(key);
    }
    return call;
}

void to_json(nlohmann::json& j, const ContractCall& call) {
    nlohmann::json args = nlohmann::json::object();
    for (const auto& [key, value] : call.args) {
        std::visit([&](const auto& v) { args[key] = v; }, value);
    }
    j = nlohmann::json{{"contract", to_string(call.contract)}, {"method", call.method}, {"args", args}};
}

void from_json(const nlohmann::json& j, ContractCall& call) {
    auto kind = contract_kind_from_string(j.at("contract").get<std::string>());
    if (!kind) throw Error(ErrorCode::UnknownContract, j.at("contract").get<std::string>());
    call.contract = *kind;
    call.method = j.at("method").get<std::string>();
    call.args.clear();
    if (j.contains("args")) {
        for (const auto& [key, value] : j.at("args").items()) {
            if (value.is_number_integer()) {
                call.args.emplace(key, value.get<std::int64_t>());
            } else if (value.is_string()) {
                call.args.emplace(key, value.get<std::string>());
            } else {
                throw Error(ErrorCode::BadArgs, "argument '" + key + "' must be an integer or string");
            }
        }
    }
}

}  // namespace fedledger

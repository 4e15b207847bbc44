#pragma once

#include "fedledger/adapter.hpp"
#include "fedledger/energy.hpp"
#include "fedledger/foodchain.hpp"
#include "fedledger/ledger.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fedledger {

struct ActorSpec {
    std::string name;
    std::optional<Role> role;  // gateway role; absent for platform identities
    std::string token;         // static bearer token, may be empty
};

/// A ledger as written in a scenario: members and authorities by actor name.
struct LedgerSpec {
    std::string id;
    LedgerKind kind = LedgerKind::open;
    std::vector<std::string> members;
    std::optional<std::string> authority;
    std::optional<std::string> minter;
    bool restricted_read = false;
    MarketParams market;
};

struct AnchoringSpec {
    std::string source;
    std::string public_ledger;
    std::string signer;
    std::uint64_t every = 5;
};

struct ScriptStep {
    std::size_t index = 0;
    std::size_t line = 0;  // best-effort source line, 0 when unknown
    std::int64_t at = 0;
    std::string action;
    nlohmann::json args;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    std::int64_t delta_ms = kDefaultDeltaMs;
    std::int64_t tick_ms = 1000;
    std::int64_t start_ms = 0;
    std::vector<ActorSpec> actors;
    std::vector<LedgerSpec> ledgers;
    std::vector<AdapterRule> rules;
    std::optional<FoodchainConfig> foodchain;
    std::vector<std::string> lots;
    std::optional<MarketConfig> market;
    std::optional<AnchoringSpec> anchoring;
    std::vector<ScriptStep> script;
    std::filesystem::path base_dir;

    const ActorSpec* actor(const std::string& name) const;
    const LedgerSpec* ledger(const std::string& id) const;
};

/// Every action name the script understands.
const std::vector<std::string>& script_actions();

/// Parses and validates. Throws Error(SchemaError) whose message carries the
/// source name, a line number when one can be located, and the JSON path.
Scenario parse_scenario(const std::string& text, const std::string& source_name = "<scenario>",
                        const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace fedledger

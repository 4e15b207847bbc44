#pragma once

#include "fedledger/call.hpp"
#include "fedledger/crypto.hpp"
#include "fedledger/runtime.hpp"
#include "fedledger/state.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace fedledger {

enum class LedgerKind : std::uint8_t { open, permissioned, anchor_only };

std::string_view to_string(LedgerKind kind) noexcept;
std::optional<LedgerKind> ledger_kind_from_string(std::string_view name) noexcept;

struct LedgerConfig {
    std::string id;
    LedgerKind kind = LedgerKind::open;
    std::set<Address> members;         // permissioned only
    std::optional<Address> authority;  // membership controller, permissioned only
    std::optional<Address> minter;     // token authority
    bool restricted_read = false;      // "semi-open": enforced by the gateway
    MarketParams market;

    /// Throws Error(BadConfig) when the kind/members/authority combination is invalid.
    void validate() const;
    ContractState genesis_state() const;
};

void to_json(nlohmann::json& j, const LedgerConfig& c);
void from_json(const nlohmann::json& j, LedgerConfig& c);

struct Transaction {
    Digest id;
    std::string ledger;
    Address submitter;
    PublicKey public_key{};
    std::uint64_t nonce = 0;
    ContractCall payload;
    std::int64_t timestamp = 0;
    Signature signature{};

    static Transaction make(const KeyPair& key, std::string ledger, std::uint64_t nonce, ContractCall payload,
                            std::int64_t timestamp);

    /// Canonical bytes covered by the id and the signature.
    Bytes signing_bytes() const;
    Digest compute_id() const;
    /// id, signature and submitter/public-key binding all check out.
    bool authentic() const;

    void encode(Writer& w) const;
    static Transaction decode(Reader& r);
};

void to_json(nlohmann::json& j, const Transaction& tx);

struct Block {
    std::string ledger;
    std::uint64_t height = 0;
    Digest prev_hash;
    Digest tx_root;
    Digest state_root;
    std::int64_t sealed_at = 0;
    std::vector<Transaction> transactions;
    std::vector<CallResult> results;
    Digest hash;

    Digest results_root() const;
    Digest compute_hash() const;
    std::vector<Digest> tx_ids() const;

    void encode(Writer& w) const;
    Bytes encode() const;
    static Block decode(Reader& r);
};

void to_json(nlohmann::json& j, const Block& b);

struct Receipt {
    bool accepted = true;
    std::size_t queue_position = 0;
    Digest tx_id;
};

struct InclusionProof {
    Digest tx_id;
    std::size_t leaf_index = 0;
    std::vector<Digest> siblings;
    std::uint64_t height = 0;
    std::string ledger;
};

void to_json(nlohmann::json& j, const InclusionProof& p);

struct ChainReport {
    bool ok = true;
    std::optional<std::uint64_t> first_bad_height;
    std::string reason;
};

void to_json(nlohmann::json& j, const ChainReport& r);

struct TxLocation {
    std::uint64_t height = 0;
    std::size_t index = 0;
};

/// Executes `txs` on top of `state` and produces the block that follows
/// `prev` (or a genesis block when `prev` is null).
Block seal_next(const LedgerConfig& config, const Block* prev, ContractState& state,
                std::vector<Transaction> txs, std::int64_t now);

/// Full re-verification: hash links, block hashes, transaction ids and
/// signatures, nonces, payload gating, tx roots, and a replay from genesis
/// that must reproduce every receipt and state root.
ChainReport verify_chain(const LedgerConfig& config, std::span<const Block> blocks);

/// Replays the chain and returns the state root after each block, stopping
/// early at the first block that cannot be replayed. Signatures are not
/// checked; this answers "what state does this history produce".
std::vector<Digest> replay_state_roots(const LedgerConfig& config, std::span<const Block> blocks);

bool verify_inclusion(const InclusionProof& proof, const Block& block);

/// One append-only ledger with a single deterministic sequencer.
///
/// Mutations (submit, membership updates, seal) serialize on an internal
/// lock; reads of sealed history take it shared.
class Ledger {
public:
    explicit Ledger(LedgerConfig config);

    Ledger(const Ledger&) = delete;
    Ledger& operator=(const Ledger&) = delete;

    const LedgerConfig& config() const noexcept { return config_; }
    const std::string& id() const noexcept { return config_.id; }

    Receipt submit(const Transaction& tx);
    std::set<Address> update_membership(const Transaction& authority_tx);
    Block seal(std::int64_t now);

    ChainReport verify() const;
    InclusionProof inclusion_proof(const Digest& tx_id) const;
    std::optional<TxLocation> locate(const Digest& tx_id) const;
    bool is_pending(const Digest& tx_id) const;

    std::uint64_t height() const;
    Block tip() const;
    Block block(std::uint64_t height) const;
    std::vector<Block> blocks(std::uint64_t from = 0) const;
    std::vector<Transaction> pending() const;
    std::size_t pending_count() const;
    std::set<Address> members() const;
    std::optional<std::uint64_t> last_nonce(const Address& who) const;

    ContractState state() const;

    /// Runs `fn(const ContractState&)` under the shared lock, avoiding a copy.
    template <class Fn>
    auto with_state(Fn&& fn) const {
        std::shared_lock lock(mu_);
        return fn(state_);
    }

    /// Result `tx`'s call would have if sealed right now after the pending queue.
    CallResult dry_run(const ContractCall& call, const Address& submitter, std::int64_t now) const;

private:
    void check_signature_and_nonce(const Transaction& tx) const;

    LedgerConfig config_;
    mutable std::shared_mutex mu_;
    std::vector<Block> chain_;
    std::vector<Transaction> pending_;
    ContractState state_;
    std::set<Address> members_;
    std::map<Address, std::uint64_t> nonces_;
    std::map<Digest, TxLocation> index_;
};

// ------------------------------------------------------------ persistence

/// `<dir>/<id>.chain` holds u32-length-prefixed canonical blocks back to back;
/// `<dir>/<id>.json` is the config sidecar.
void write_chain(const std::filesystem::path& dir, const LedgerConfig& config, std::span<const Block> blocks);
void save_chain(const std::filesystem::path& dir, const Ledger& ledger);

struct LoadedChain {
    LedgerConfig config;
    std::vector<Block> blocks;
    /// Set when parsing stopped early; blocks holds what parsed before it.
    std::optional<std::string> parse_error;
};

LoadedChain load_chain(const std::filesystem::path& chain_file, const std::filesystem::path& sidecar);
ChainReport verify_chain_file(const std::filesystem::path& chain_file, const std::filesystem::path& sidecar);
Bytes encode_chain(std::span<const Block> blocks);
/// Parses as many blocks as possible from the raw chain-file bytes.
std::vector<Block> decode_chain(ByteView data, std::optional<std::string>* parse_error);

}  // namespace fedledger

#include "fedledger/ledger.hpp"

#include "fedledger/enum_names.hpp"
#include "fedledger/error.hpp"
#include "fedledger/merkle.hpp"

#include <fstream>
#include <iterator>
#include <mutex>
#include <set>

namespace fedledger {

namespace {

constexpr detail::EnumTable<LedgerKind, 3> kKinds{{
    {LedgerKind::open, "open"}, {LedgerKind::permissioned, "permissioned"}, {LedgerKind::anchor_only, "anchor_only"}}};

constexpr std::string_view kTxDomain = "fedledger/tx/v1";
constexpr std::string_view kBlockDomain = "fedledger/block/v1";

}  // namespace

std::string_view to_string(LedgerKind kind) noexcept { return detail::enum_name(kKinds, kind); }
std::optional<LedgerKind> ledger_kind_from_string(std::string_view name) noexcept {
    return detail::enum_parse(kKinds, name);
}

// ---------------------------------------------------------------- config

void LedgerConfig::validate() const {
    if (id.empty()) throw Error(ErrorCode::BadConfig, "ledger id must not be empty");
    if (kind == LedgerKind::permissioned) {
        if (members.empty()) throw Error(ErrorCode::BadConfig, id + ": permissioned ledger needs members");
        if (!authority) throw Error(ErrorCode::BadConfig, id + ": permissioned ledger needs an authority");
    } else if (!members.empty() || authority) {
        throw Error(ErrorCode::BadConfig, id + ": members/authority are only valid on permissioned ledgers");
    }
    if (market.tolerance_bps < 0 || market.tolerance_bps > 10'000 || market.day_ms <= 0 || market.bid_lead_ms < 0)
        throw Error(ErrorCode::BadConfig, id + ": bad market parameters");
}

ContractState LedgerConfig::genesis_state() const {
    ContractState s;
    s.token.minter = minter;
    s.market.params = market;
    if (kind == LedgerKind::permissioned) {
        s.membership.gated = true;
        s.membership.authority = authority;
        s.membership.members = members;
    }
    return s;
}

void to_json(nlohmann::json& j, const LedgerConfig& c) {
    std::vector<std::string> members;
    for (const auto& m : c.members) members.push_back(m.hex());
    j = {{"ledger_id", c.id},
         {"kind", to_string(c.kind)},
         {"members", members},
         {"authority", c.authority ? nlohmann::json(c.authority->hex()) : nlohmann::json(nullptr)},
         {"minter", c.minter ? nlohmann::json(c.minter->hex()) : nlohmann::json(nullptr)},
         {"restricted_read", c.restricted_read},
         {"market_params",
          {{"bid_lead_ms", c.market.bid_lead_ms},
           {"tolerance_bps", c.market.tolerance_bps},
           {"day_ms", c.market.day_ms}}}};
}

void from_json(const nlohmann::json& j, LedgerConfig& c) {
    c = LedgerConfig{};
    c.id = j.at("ledger_id").get<std::string>();
    auto kind = ledger_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::BadConfig, "unknown ledger kind");
    c.kind = *kind;
    for (const auto& m : j.value("members", nlohmann::json::array())) c.members.insert(Address::from_hex(m.get<std::string>()));
    if (j.contains("authority") && !j.at("authority").is_null())
        c.authority = Address::from_hex(j.at("authority").get<std::string>());
    if (j.contains("minter") && !j.at("minter").is_null())
        c.minter = Address::from_hex(j.at("minter").get<std::string>());
    c.restricted_read = j.value("restricted_read", false);
    if (j.contains("market_params")) {
        const auto& p = j.at("market_params");
        c.market.bid_lead_ms = p.value("bid_lead_ms", c.market.bid_lead_ms);
        c.market.tolerance_bps = p.value("tolerance_bps", c.market.tolerance_bps);
        c.market.day_ms = p.value("day_ms", c.market.day_ms);
    }
}

// ----------------------------------------------------------- transaction

Transaction Transaction::make(const KeyPair& key, std::string ledger, std::uint64_t nonce, ContractCall payload,
                              std::int64_t timestamp) {
    Transaction tx;
    tx.ledger = std::move(ledger);
    tx.submitter = key.address();
    tx.public_key = key.public_key();
    tx.nonce = nonce;
    tx.payload = std::move(payload);
    tx.timestamp = timestamp;
    auto bytes = tx.signing_bytes();
    tx.id = sha256(bytes);
    tx.signature = key.sign(bytes);
    return tx;
}

Bytes Transaction::signing_bytes() const {
    Writer w;
    w.str(kTxDomain);
    w.str(ledger);
    w.digest(submitter.digest);
    w.raw(public_key);
    w.u64(nonce);
    payload.encode(w);
    w.i64(timestamp);
    return std::move(w).take();
}

Digest Transaction::compute_id() const { return sha256(signing_bytes()); }

namespace {

// Signatures already verified, keyed by (id, public key, signature). The id
// binds the signed bytes, so a hit means the exact same check passed before.
// Chain verification re-checks the same transactions on every call.
class SignatureCache {
public:
    static constexpr std::size_t kCapacity = 1 << 16;

    bool contains(const Digest& key) const {
        std::lock_guard lock(mu_);
        return seen_.count(key) != 0;
    }
    void insert(const Digest& key) {
        std::lock_guard lock(mu_);
        if (seen_.size() >= kCapacity) seen_.clear();
        seen_.insert(key);
    }

private:
    mutable std::mutex mu_;
    std::set<Digest> seen_;
};

SignatureCache& signature_cache() {
    static SignatureCache cache;
    return cache;
}

}  // namespace

bool Transaction::authentic() const {
    if (Address::of(public_key) != submitter) return false;
    auto bytes = signing_bytes();
    if (sha256(bytes) != id) return false;
    Writer w;
    w.digest(id);
    w.raw(public_key);
    w.raw(signature);
    auto key = sha256(w.data());
    if (signature_cache().contains(key)) return true;
    if (!verify_signature(public_key, bytes, signature)) return false;
    signature_cache().insert(key);
    return true;
}

void Transaction::encode(Writer& w) const {
    w.digest(id);
    w.str(ledger);
    w.digest(submitter.digest);
    w.raw(public_key);
    w.u64(nonce);
    payload.encode(w);
    w.i64(timestamp);
    w.raw(signature);
}

Transaction Transaction::decode(Reader& r) {
    Transaction tx;
    tx.id = r.digest();
    tx.ledger = r.str();
    tx.submitter.digest = r.digest();
    tx.public_key = r.raw<32>();
    tx.nonce = r.u64();
    tx.payload = ContractCall::decode(r);
    tx.timestamp = r.i64();
    tx.signature = r.raw<64>();
    return tx;
}

void to_json(nlohmann::json& j, const Transaction& tx) {
    j = {{"tx_id", tx.id.hex()},
         {"ledger_id", tx.ledger},
         {"submitter", tx.submitter.hex()},
         {"nonce", tx.nonce},
         {"payload", tx.payload},
         {"timestamp", tx.timestamp}};
}

// ----------------------------------------------------------------- block

Digest Block::results_root() const {
    Writer w;
    w.u32(static_cast<std::uint32_t>(results.size()));
    for (const auto& r : results) r.encode(w);
    return sha256(w.data());
}

Digest Block::compute_hash() const {
    Writer w;
    w.str(kBlockDomain);
    w.str(ledger);
    w.u64(height);
    w.digest(prev_hash);
    w.digest(tx_root);
    w.digest(state_root);
    w.i64(sealed_at);
    w.digest(results_root());
    return sha256(w.data());
}

std::vector<Digest> Block::tx_ids() const {
    std::vector<Digest> ids;
    ids.reserve(transactions.size());
    for (const auto& tx : transactions) ids.push_back(tx.id);
    return ids;
}

void Block::encode(Writer& w) const {
    w.str(ledger);
    w.u64(height);
    w.digest(prev_hash);
    w.digest(tx_root);
    w.digest(state_root);
    w.i64(sealed_at);
    w.u32(static_cast<std::uint32_t>(transactions.size()));
    for (const auto& tx : transactions) tx.encode(w);
    w.u32(static_cast<std::uint32_t>(results.size()));
    for (const auto& r : results) r.encode(w);
    w.digest(hash);
}

Bytes Block::encode() const {
    Writer w;
    encode(w);
    return std::move(w).take();
}

Block Block::decode(Reader& r) {
    Block b;
    b.ledger = r.str();
    b.height = r.u64();
    b.prev_hash = r.digest();
    b.tx_root = r.digest();
    b.state_root = r.digest();
    b.sealed_at = r.i64();
    auto ntx = r.count(150);
    b.transactions.reserve(ntx);
    for (std::uint32_t i = 0; i < ntx; ++i) b.transactions.push_back(Transaction::decode(r));
    auto nres = r.count(9);
    b.results.reserve(nres);
    for (std::uint32_t i = 0; i < nres; ++i) b.results.push_back(CallResult::decode(r));
    b.hash = r.digest();
    return b;
}

void to_json(nlohmann::json& j, const Block& b) {
    nlohmann::json txs = nlohmann::json::array();
    for (std::size_t i = 0; i < b.transactions.size(); ++i) {
        nlohmann::json t = b.transactions[i];
        const auto& r = b.results.at(i);
        t["result"] = {{"ok", r.ok}, {"value", r.value}};
        if (!r.ok) t["result"]["error"] = to_string(r.error);
        txs.push_back(std::move(t));
    }
    j = {{"ledger_id", b.ledger},
         {"height", b.height},
         {"prev_hash", b.prev_hash.hex()},
         {"tx_root", b.tx_root.hex()},
         {"state_root", b.state_root.hex()},
         {"sealed_at", b.sealed_at},
         {"hash", b.hash.hex()},
         {"transactions", txs}};
}

void to_json(nlohmann::json& j, const InclusionProof& p) {
    std::vector<std::string> sib;
    for (const auto& s : p.siblings) sib.push_back(s.hex());
    j = {{"tx_id", p.tx_id.hex()}, {"leaf_index", p.leaf_index}, {"siblings", sib}, {"height", p.height}, {"ledger_id", p.ledger}};
}

void to_json(nlohmann::json& j, const ChainReport& r) {
    j = {{"ok", r.ok}};
    j["first_bad_height"] = r.first_bad_height ? nlohmann::json(*r.first_bad_height) : nlohmann::json(nullptr);
    if (!r.reason.empty()) j["reason"] = r.reason;
}

// ----------------------------------------------------- sealing & checking

Block seal_next(const LedgerConfig& config, const Block* prev, ContractState& state, std::vector<Transaction> txs,
                std::int64_t now) {
    Block b;
    b.ledger = config.id;
    b.height = prev ? prev->height + 1 : 0;
    b.prev_hash = prev ? prev->hash : Digest{};
    b.sealed_at = now;
    b.transactions = std::move(txs);
    b.results.reserve(b.transactions.size());
    for (const auto& tx : b.transactions) {
        b.results.push_back(execute_call(state, tx.payload, ExecContext{tx.submitter, now, tx.id}));
    }
    b.tx_root = merkle_root(b.tx_ids());
    b.state_root = state.root();
    b.hash = b.compute_hash();
    return b;
}

namespace {

ChainReport bad(std::uint64_t height, std::string reason) { return ChainReport{false, height, std::move(reason)}; }

}  // namespace

ChainReport verify_chain(const LedgerConfig& config, std::span<const Block> blocks) {
    if (blocks.empty()) return bad(0, "missing genesis block");
    ContractState state = config.genesis_state();
    std::map<Address, std::uint64_t> nonces;
    Digest prev{};
    for (std::size_t h = 0; h < blocks.size(); ++h) {
        const auto& b = blocks[h];
        if (b.height != h) return bad(h, "height out of sequence");
        if (b.ledger != config.id) return bad(h, "ledger id mismatch");
        if (b.prev_hash != prev) return bad(h, "prev_hash does not match predecessor");
        if (b.compute_hash() != b.hash) return bad(h, "block hash mismatch");
        if (b.results.size() != b.transactions.size()) return bad(h, "receipt count mismatch");
        if (h == 0 && (!b.transactions.empty() || b.sealed_at != 0)) return bad(h, "genesis block not empty");
        for (const auto& tx : b.transactions) {
            if (tx.ledger != config.id) return bad(h, "transaction for another ledger");
            if (!tx.authentic()) return bad(h, "transaction id or signature invalid");
            auto it = nonces.find(tx.submitter);
            if (it != nonces.end() && tx.nonce <= it->second) return bad(h, "nonce not increasing");
            nonces[tx.submitter] = tx.nonce;
            if (config.kind == LedgerKind::anchor_only && tx.payload.contract != ContractKind::anchor)
                return bad(h, "non-anchor payload on anchor-only ledger");
        }
        if (merkle_root(b.tx_ids()) != b.tx_root) return bad(h, "tx_root mismatch");
        for (std::size_t i = 0; i < b.transactions.size(); ++i) {
            const auto& tx = b.transactions[i];
            auto result = execute_call(state, tx.payload, ExecContext{tx.submitter, b.sealed_at, tx.id});
            if (!(result == b.results[i])) return bad(h, "receipt does not replay");
        }
        if (state.root() != b.state_root) return bad(h, "state_root does not replay");
        prev = b.hash;
    }
    return ChainReport{};
}

std::vector<Digest> replay_state_roots(const LedgerConfig& config, std::span<const Block> blocks) {
    std::vector<Digest> roots;
    ContractState state = config.genesis_state();
    for (const auto& b : blocks) {
        if (b.results.size() != b.transactions.size()) break;
        for (const auto& tx : b.transactions) {
            execute_call(state, tx.payload, ExecContext{tx.submitter, b.sealed_at, tx.id});
        }
        roots.push_back(state.root());
    }
    return roots;
}

bool verify_inclusion(const InclusionProof& proof, const Block& block) {
    if (proof.ledger != block.ledger || proof.height != block.height) return false;
    if (proof.leaf_index >= block.transactions.size()) return false;
    return merkle_fold(proof.tx_id, proof.leaf_index, proof.siblings) == block.tx_root;
}

// ---------------------------------------------------------------- ledger

Ledger::Ledger(LedgerConfig config) : config_(std::move(config)) {
    config_.validate();
    state_ = config_.genesis_state();
    members_ = config_.members;
    chain_.push_back(seal_next(config_, nullptr, state_, {}, 0));
}

void Ledger::check_signature_and_nonce(const Transaction& tx) const {
    if (tx.ledger != config_.id) throw Error(ErrorCode::UnknownLedger, "transaction addressed to " + tx.ledger);
    if (!tx.authentic()) throw Error(ErrorCode::BadSignature);
    auto it = nonces_.find(tx.submitter);
    if (it != nonces_.end() && tx.nonce <= it->second) throw Error(ErrorCode::StaleNonce);
}

Receipt Ledger::submit(const Transaction& tx) {
    if (tx.payload.contract == ContractKind::membership) {
        update_membership(tx);
        std::shared_lock lock(mu_);
        return Receipt{true, pending_.size() - 1, tx.id};
    }
    std::unique_lock lock(mu_);
    check_signature_and_nonce(tx);
    if (config_.kind == LedgerKind::permissioned && members_.count(tx.submitter) == 0)
        throw Error(ErrorCode::NotMember);
    if (config_.kind == LedgerKind::anchor_only && tx.payload.contract != ContractKind::anchor)
        throw Error(ErrorCode::WrongPayloadKind);
    nonces_[tx.submitter] = tx.nonce;
    pending_.push_back(tx);
    return Receipt{true, pending_.size() - 1, tx.id};
}

std::set<Address> Ledger::update_membership(const Transaction& tx) {
    std::unique_lock lock(mu_);
    if (config_.kind != LedgerKind::permissioned) throw Error(ErrorCode::NotPermissioned);
    check_signature_and_nonce(tx);
    if (tx.payload.contract != ContractKind::membership) throw Error(ErrorCode::WrongPayloadKind);
    if (!config_.authority || tx.submitter != *config_.authority) throw Error(ErrorCode::NotAuthority);
    auto member = tx.payload.address_arg("member");
    if (tx.payload.method == "add") {
        if (members_.count(member)) throw Error(ErrorCode::AlreadyMember);
        members_.insert(member);
    } else if (tx.payload.method == "revoke") {
        if (!members_.count(member)) throw Error(ErrorCode::NotAMember);
        members_.erase(member);
    } else {
        throw Error(ErrorCode::UnknownMethod);
    }
    nonces_[tx.submitter] = tx.nonce;
    pending_.push_back(tx);
    return members_;
}

Block Ledger::seal(std::int64_t now) {
    std::unique_lock lock(mu_);
    auto txs = std::move(pending_);
    pending_.clear();
    Block b = seal_next(config_, &chain_.back(), state_, std::move(txs), now);
    for (std::size_t i = 0; i < b.transactions.size(); ++i) index_[b.transactions[i].id] = TxLocation{b.height, i};
    chain_.push_back(b);
    return b;
}

ChainReport Ledger::verify() const {
    std::shared_lock lock(mu_);
    return verify_chain(config_, chain_);
}

std::optional<TxLocation> Ledger::locate(const Digest& tx_id) const {
    std::shared_lock lock(mu_);
    auto it = index_.find(tx_id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool Ledger::is_pending(const Digest& tx_id) const {
    std::shared_lock lock(mu_);
    for (const auto& tx : pending_) {
        if (tx.id == tx_id) return true;
    }
    return false;
}

InclusionProof Ledger::inclusion_proof(const Digest& tx_id) const {
    std::shared_lock lock(mu_);
    auto it = index_.find(tx_id);
    if (it == index_.end()) {
        for (const auto& tx : pending_) {
            if (tx.id == tx_id) throw Error(ErrorCode::TxPendingNotSealed);
        }
        throw Error(ErrorCode::TxNotFound);
    }
    const auto& b = chain_[it->second.height];
    auto ids = b.tx_ids();
    return InclusionProof{tx_id, it->second.index, merkle_path(ids, it->second.index), b.height, b.ledger};
}

std::uint64_t Ledger::height() const {
    std::shared_lock lock(mu_);
    return chain_.back().height;
}

Block Ledger::tip() const {
    std::shared_lock lock(mu_);
    return chain_.back();
}

Block Ledger::block(std::uint64_t height) const {
    std::shared_lock lock(mu_);
    if (height >= chain_.size()) throw std::out_of_range("no block at height " + std::to_string(height));
    return chain_[height];
}

std::vector<Block> Ledger::blocks(std::uint64_t from) const {
    std::shared_lock lock(mu_);
    if (from >= chain_.size()) return {};
    return std::vector<Block>(chain_.begin() + static_cast<std::ptrdiff_t>(from), chain_.end());
}

std::vector<Transaction> Ledger::pending() const {
    std::shared_lock lock(mu_);
    return pending_;
}

std::size_t Ledger::pending_count() const {
    std::shared_lock lock(mu_);
    return pending_.size();
}

std::set<Address> Ledger::members() const {
    std::shared_lock lock(mu_);
    return members_;
}

std::optional<std::uint64_t> Ledger::last_nonce(const Address& who) const {
    std::shared_lock lock(mu_);
    auto it = nonces_.find(who);
    if (it == nonces_.end()) return std::nullopt;
    return it->second;
}

ContractState Ledger::state() const {
    std::shared_lock lock(mu_);
    return state_;
}

CallResult Ledger::dry_run(const ContractCall& call, const Address& submitter, std::int64_t now) const {
    std::shared_lock lock(mu_);
    ContractState scratch = state_;
    for (const auto& tx : pending_) execute_call(scratch, tx.payload, ExecContext{tx.submitter, now, tx.id});
    return execute_call(scratch, call, ExecContext{submitter, now, Digest{}});
}

// ----------------------------------------------------------- persistence

Bytes encode_chain(std::span<const Block> blocks) {
    Writer w;
    for (const auto& b : blocks) w.bytes(b.encode());
    return std::move(w).take();
}

std::vector<Block> decode_chain(ByteView data, std::optional<std::string>* parse_error) {
    std::vector<Block> blocks;
    Reader outer(data);
    try {
        while (!outer.done()) {
            auto raw = outer.bytes();
            Reader inner(raw);
            blocks.push_back(Block::decode(inner));
            inner.expect_done();
        }
    } catch (const Error& e) {
        if (parse_error) *parse_error = e.what();
    }
    return blocks;
}

void write_chain(const std::filesystem::path& dir, const LedgerConfig& config, std::span<const Block> blocks) {
    std::filesystem::create_directories(dir);
    auto bytes = encode_chain(blocks);
    {
        std::ofstream out(dir / (config.id + ".chain"), std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write chain for " + config.id);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    std::ofstream side(dir / (config.id + ".json"), std::ios::trunc);
    if (!side) throw Error(ErrorCode::IoError, "cannot write sidecar for " + config.id);
    side << nlohmann::json(config).dump(2) << "\n";
}

void save_chain(const std::filesystem::path& dir, const Ledger& ledger) {
    write_chain(dir, ledger.config(), ledger.blocks());
}

LoadedChain load_chain(const std::filesystem::path& chain_file, const std::filesystem::path& sidecar) {
    LoadedChain out;
    std::ifstream side(sidecar);
    if (!side) throw Error(ErrorCode::IoError, "cannot read " + sidecar.string());
    try {
        out.config = nlohmann::json::parse(side).get<LedgerConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError, sidecar.string() + ": " + e.what());
    }
    std::ifstream in(chain_file, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + chain_file.string());
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    out.blocks = decode_chain(data, &out.parse_error);
    return out;
}

ChainReport verify_chain_file(const std::filesystem::path& chain_file, const std::filesystem::path& sidecar) {
    auto loaded = load_chain(chain_file, sidecar);
    auto report = verify_chain(loaded.config, loaded.blocks);
    if (!report.ok && !(loaded.parse_error && report.first_bad_height == loaded.blocks.size())) return report;
    if (loaded.parse_error) return bad(loaded.blocks.size(), "unparseable block: " + *loaded.parse_error);
    return report;
}

}  // namespace fedledger

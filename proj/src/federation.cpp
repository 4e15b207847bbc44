#include "fedledger/federation.hpp"

#include "fedledger/error.hpp"

namespace fedledger {

Wallet Wallet::derive(const std::string& name, std::uint64_t seed) {
    return Wallet(name, KeyPair::from_seed(sha256("actor:" + name + ":" + std::to_string(seed))));
}

Transaction Wallet::sign(const std::string& ledger, ContractCall call, std::int64_t timestamp) {
    std::uint64_t nonce;
    {
        std::lock_guard lock(mu_);
        nonce = next_nonce_[ledger]++;
    }
    return Transaction::make(key_, ledger, nonce, std::move(call), timestamp);
}

Wallet& WalletBook::add(const std::string& name, std::uint64_t seed) {
    std::lock_guard lock(mu_);
    auto& slot = wallets_[name];
    if (!slot) {
        slot = std::make_unique<Wallet>(name, KeyPair::from_seed(sha256("actor:" + name + ":" + std::to_string(seed))));
        by_address_[slot->address()] = name;
    }
    return *slot;
}

Wallet& WalletBook::get(const std::string& name) const {
    std::lock_guard lock(mu_);
    auto it = wallets_.find(name);
    if (it == wallets_.end()) throw Error(ErrorCode::BadTarget, "unknown actor " + name);
    return *it->second;
}

Wallet* WalletBook::find(const Address& address) const {
    std::lock_guard lock(mu_);
    auto it = by_address_.find(address);
    return it == by_address_.end() ? nullptr : wallets_.at(it->second).get();
}

bool WalletBook::contains(const std::string& name) const {
    std::lock_guard lock(mu_);
    return wallets_.count(name) > 0;
}

std::vector<std::string> WalletBook::names() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [name, _] : wallets_) out.push_back(name);
    return out;
}

std::string WalletBook::name_of(const Address& address) const {
    std::lock_guard lock(mu_);
    auto it = by_address_.find(address);
    return it == by_address_.end() ? address.hex() : it->second;
}

void to_json(nlohmann::json& j, const EventEnvelope& e) {
    j = {{"seq", e.seq}, {"kind", e.kind}, {"payload", e.payload}};
}

std::uint64_t EventLog::append(std::string kind, nlohmann::json payload) {
    std::uint64_t seq;
    {
        std::lock_guard lock(mu_);
        seq = events_.size() + 1;
        events_.push_back({seq, std::move(kind), std::move(payload)});
    }
    cv_.notify_all();
    return seq;
}

std::vector<EventEnvelope> EventLog::since(std::uint64_t since) const {
    std::lock_guard lock(mu_);
    if (since >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(since), events_.end()};
}

std::uint64_t EventLog::head() const {
    std::lock_guard lock(mu_);
    return events_.size();
}

std::uint64_t EventLog::wait_beyond(std::uint64_t since, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return events_.size() > since; });
    return events_.size();
}

Ledger& Federation::add_ledger(LedgerConfig config) {
    std::unique_lock lock(mu_);
    if (ledgers_.count(config.id)) throw Error(ErrorCode::DuplicateLedger, config.id);
    auto id = config.id;
    auto [it, _] = ledgers_.emplace(id, std::make_unique<Ledger>(std::move(config)));
    return *it->second;
}

Ledger& Federation::ledger(std::string_view id) {
    std::shared_lock lock(mu_);
    auto it = ledgers_.find(id);
    if (it == ledgers_.end()) throw Error(ErrorCode::UnknownLedger, std::string(id));
    return *it->second;
}

const Ledger& Federation::ledger(std::string_view id) const {
    std::shared_lock lock(mu_);
    auto it = ledgers_.find(id);
    if (it == ledgers_.end()) throw Error(ErrorCode::UnknownLedger, std::string(id));
    return *it->second;
}

bool Federation::has_ledger(std::string_view id) const {
    std::shared_lock lock(mu_);
    return ledgers_.find(id) != ledgers_.end();
}

std::vector<std::string> Federation::ledger_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : ledgers_) ids.push_back(id);
    return ids;
}

Receipt Federation::submit(const Transaction& tx) { return ledger(tx.ledger).submit(tx); }

void Federation::advance_to(std::int64_t t) {
    auto cur = clock_.load();
    while (t > cur && !clock_.compare_exchange_weak(cur, t)) {
    }
}

Block Federation::seal(std::string_view id) {
    auto& l = ledger(id);
    auto block = l.seal(now());
    events_.append("block", {{"ledger_id", l.id()},
                             {"height", block.height},
                             {"hash", block.hash.hex()},
                             {"tx_count", block.transactions.size()},
                             {"sealed_at", block.sealed_at}});
    std::vector<SealObserver> observers;
    {
        std::lock_guard lock(observers_mu_);
        observers = observers_;
    }
    for (const auto& obs : observers) obs(l, block);
    return block;
}

std::vector<Block> Federation::seal_pending() {
    std::vector<Block> out;
    for (const auto& id : ledger_ids()) {
        if (ledger(id).pending_count() > 0) out.push_back(seal(id));
    }
    return out;
}

void Federation::on_seal(SealObserver observer) {
    std::lock_guard lock(observers_mu_);
    observers_.push_back(std::move(observer));
}

}  // namespace fedledger

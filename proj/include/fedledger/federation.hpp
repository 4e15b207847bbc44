#pragma once

#include "fedledger/ledger.hpp"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace fedledger {

/// A named signing identity with its own nonce counter per ledger. Shared by
/// every component that acts for the same actor, so nonces never collide.
class Wallet {
public:
    Wallet(std::string name, KeyPair key) : name_(std::move(name)), key_(std::move(key)) {}

    /// Deterministic wallet: keys derived from sha256("actor:<name>:<seed>").
    static Wallet derive(const std::string& name, std::uint64_t seed);

    const std::string& name() const noexcept { return name_; }
    Address address() const { return key_.address(); }
    const KeyPair& key() const noexcept { return key_; }

    /// Signs `call` for `ledger` with the next nonce for that ledger.
    Transaction sign(const std::string& ledger, ContractCall call, std::int64_t timestamp);

private:
    std::string name_;
    KeyPair key_;
    std::mutex mu_;
    std::map<std::string, std::uint64_t> next_nonce_;
};

/// Named wallets of one deployment.
class WalletBook {
public:
    /// Adds (or returns the existing) deterministic wallet for `name`.
    Wallet& add(const std::string& name, std::uint64_t seed);
    /// Throws Error(BadTarget) for unknown names.
    Wallet& get(const std::string& name) const;
    Wallet* find(const Address& address) const;
    bool contains(const std::string& name) const;
    std::vector<std::string> names() const;
    /// Name for an address, or its hex when unknown.
    std::string name_of(const Address& address) const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::unique_ptr<Wallet>> wallets_;
    std::map<Address, std::string> by_address_;
};

/// The only write path adapters and drivers get: submit a signed transaction,
/// read the logical clock.
class TransactionSink {
public:
    virtual ~TransactionSink() = default;
    virtual Receipt submit(const Transaction& tx) = 0;
    virtual std::int64_t now() const = 0;
};

struct EventEnvelope {
    std::uint64_t seq = 0;
    std::string kind;
    nlohmann::json payload;
};

void to_json(nlohmann::json& j, const EventEnvelope& e);

/// Append-only, sequence-numbered event log with blocking waits for streaming.
/// Sequence numbers start at 1.
class EventLog {
public:
    std::uint64_t append(std::string kind, nlohmann::json payload);
    /// Events with seq > `since`, in order.
    std::vector<EventEnvelope> since(std::uint64_t since) const;
    std::uint64_t head() const;
    /// Blocks until head() > `since` or the timeout elapses; returns head().
    std::uint64_t wait_beyond(std::uint64_t since, std::chrono::milliseconds timeout) const;

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<EventEnvelope> events_;
};

/// A set of ledgers sharing one logical clock.
class Federation : public TransactionSink {
public:
    using SealObserver = std::function<void(const Ledger&, const Block&)>;

    explicit Federation(std::int64_t start_ms = 0) : clock_(start_ms) {}

    Ledger& add_ledger(LedgerConfig config);
    Ledger& ledger(std::string_view id);
    const Ledger& ledger(std::string_view id) const;
    bool has_ledger(std::string_view id) const;
    std::vector<std::string> ledger_ids() const;

    Receipt submit(const Transaction& tx) override;
    std::int64_t now() const override { return clock_.load(); }

    /// The clock never moves backwards; earlier targets are ignored.
    void advance_to(std::int64_t t);
    void advance_by(std::int64_t dt) { advance_to(now() + dt); }

    Block seal(std::string_view id);
    /// Seals every ledger with pending transactions, in id order.
    std::vector<Block> seal_pending();

    void on_seal(SealObserver observer);
    EventLog& events() noexcept { return events_; }
    const EventLog& events() const noexcept { return events_; }

private:
    std::atomic<std::int64_t> clock_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::unique_ptr<Ledger>, std::less<>> ledgers_;
    std::mutex observers_mu_;
    std::vector<SealObserver> observers_;
    EventLog events_;
};

}  // namespace fedledger

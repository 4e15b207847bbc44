#include "fedledger/federation.hpp"

#include "support.hpp"

#include <atomic>
#include <random>
#include <set>
#include <thread>

using namespace fedtest;

namespace {

constexpr int kSenders = 8;
constexpr int kTxPerSender = 400;
constexpr std::int64_t kFunding = 10'000;

}  // namespace

// Several submitters, a sealer and a reader hammer one ledger. Afterwards
// every accepted transaction is sealed exactly once, in per-sender nonce
// order, the chain replays, and no token was created or lost.
TEST(Stress, ConcurrentSubmittersKeepInvariants) {
    Federation fed(1'000);
    WalletBook wallets;
    auto& minter = wallets.add("minter", 3);
    fed.add_ledger(open_ledger("L", minter.address()));
    std::vector<Wallet*> senders;
    for (int i = 0; i < kSenders; ++i) {
        senders.push_back(&wallets.add("sender-" + std::to_string(i), 3));
        fed.submit(minter.sign("L", mint(senders.back()->address(), kFunding), fed.now()));
    }
    fed.seal("L");

    std::atomic<bool> done{false};
    std::atomic<int> bad_snapshots{0};
    std::vector<std::vector<Digest>> accepted(kSenders);

    std::thread sealer([&] {
        while (!done) {
            fed.advance_by(1);
            fed.seal("L");
            std::this_thread::yield();
        }
    });
    std::thread reader([&] {
        while (!done) {
            bool ok = fed.ledger("L").with_state([](const ContractState& s) { return s.conserves_tokens(); });
            if (!ok) ++bad_snapshots;
            auto tip = fed.ledger("L").tip();
            if (!tip.transactions.empty()) {
                auto proof = fed.ledger("L").inclusion_proof(tip.transactions.front().id);
                if (!verify_inclusion(proof, fed.ledger("L").block(proof.height))) ++bad_snapshots;
            }
        }
    });
    std::vector<std::thread> workers;
    for (int i = 0; i < kSenders; ++i) {
        workers.emplace_back([&, i] {
            std::mt19937_64 rng(100 + i);
            for (int n = 0; n < kTxPerSender; ++n) {
                auto to = senders[rng() % kSenders]->address();
                auto tx = senders[i]->sign("L", transfer(to, static_cast<std::int64_t>(rng() % 40)), fed.now());
                accepted[i].push_back(fed.submit(tx).tx_id);
            }
        });
    }
    for (auto& w : workers) w.join();
    done = true;
    sealer.join();
    reader.join();
    fed.seal("L");

    const auto& L = fed.ledger("L");
    EXPECT_EQ(bad_snapshots.load(), 0);
    EXPECT_TRUE(L.verify().ok) << L.verify().reason;
    EXPECT_EQ(L.pending_count(), 0u);

    std::set<Digest> sealed;
    std::map<Address, std::uint64_t> last_nonce;
    for (const auto& b : L.blocks()) {
        for (const auto& tx : b.transactions) {
            EXPECT_TRUE(sealed.insert(tx.id).second);
            auto who = tx.submitter;
            auto it = last_nonce.find(who);
            if (it != last_nonce.end()) EXPECT_GT(tx.nonce, it->second);
            last_nonce[who] = tx.nonce;
        }
    }
    for (const auto& ids : accepted) {
        for (const auto& id : ids) EXPECT_TRUE(sealed.count(id));
    }
    EXPECT_EQ(sealed.size(), static_cast<std::size_t>(kSenders * (kTxPerSender + 1)));

    auto state = L.state();
    EXPECT_TRUE(state.conserves_tokens());
    EXPECT_EQ(state.token.total_minted, kSenders * kFunding);
    std::int64_t held = 0;
    for (auto* s : senders) held += state.token.balance_of(s->address());
    EXPECT_EQ(held, kSenders * kFunding);
}

// One wallet shared by many threads: nonces are handed out uniquely, and a
// transaction that loses the race to a higher nonce is refused, never sealed.
TEST(Stress, SharedWalletNoncesNeverRepeat) {
    Federation fed;
    WalletBook wallets;
    auto& w = wallets.add("shared", 4);
    fed.add_ledger(open_ledger("L", w.address()));
    std::atomic<int> ok{0}, stale{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 6; ++t) {
        threads.emplace_back([&] {
            for (int n = 0; n < 200; ++n) {
                try {
                    fed.submit(w.sign("L", mint(w.address(), 1), fed.now()));
                    ++ok;
                } catch (const Error& e) {
                    EXPECT_EQ(e.code(), ErrorCode::StaleNonce);
                    ++stale;
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    fed.seal("L");
    EXPECT_EQ(ok + stale, 1200);
    EXPECT_EQ(fed.ledger("L").state().token.balance_of(w.address()), ok.load());
    EXPECT_EQ(*fed.ledger("L").last_nonce(w.address()) >= static_cast<std::uint64_t>(ok.load()), true);
    EXPECT_TRUE(fed.ledger("L").verify().ok);
}

// The same per-sender scripts, run concurrently and then sequentially, end
// in the same state. Transfers never overdraw, so the outcome does not
// depend on how the threads interleave.
TEST(Stress, ConcurrentRunMatchesSequentialRun) {
    constexpr int kPerSender = 150;
    auto run = [&](bool concurrent) {
        Federation fed(1'000);
        WalletBook wallets;
        auto& minter = wallets.add("minter", 8);
        fed.add_ledger(open_ledger("L", minter.address()));
        std::vector<Wallet*> senders;
        for (int i = 0; i < kSenders; ++i) {
            senders.push_back(&wallets.add("s" + std::to_string(i), 8));
            fed.submit(minter.sign("L", mint(senders.back()->address(), kPerSender * 40), fed.now()));
        }
        fed.seal("L");
        auto script = [&](int i) {
            std::mt19937_64 rng(7 + i);
            for (int n = 0; n < kPerSender; ++n) {
                auto to = senders[rng() % kSenders]->address();
                fed.submit(senders[i]->sign("L", transfer(to, static_cast<std::int64_t>(rng() % 40)), 1'000));
                if (n % 25 == 0 && !concurrent) fed.seal("L");
            }
        };
        if (concurrent) {
            std::atomic<bool> done{false};
            std::thread sealer([&] {
                while (!done) fed.seal("L");
            });
            std::vector<std::thread> ts;
            for (int i = 0; i < kSenders; ++i) ts.emplace_back(script, i);
            for (auto& t : ts) t.join();
            done = true;
            sealer.join();
        } else {
            for (int i = 0; i < kSenders; ++i) script(i);
        }
        fed.seal("L");
        const auto& L = fed.ledger("L");
        EXPECT_TRUE(L.verify().ok);
        std::size_t failed = 0;
        for (const auto& b : L.blocks()) {
            for (const auto& r : b.results) failed += !r.ok;
        }
        EXPECT_EQ(failed, 0u);
        return L.state().root();
    };
    EXPECT_EQ(run(true), run(false));
}

#include "fedledger/interledger.hpp"

#include "support.hpp"

#include <set>

using namespace fedtest;

namespace {

struct World {
    Federation fed{1'000'000};
    WalletBook wallets;
    Wallet& alice = wallets.add("alice", 1);
    Wallet& bob = wallets.add("bob", 1);
    Preimage secret = sha256("swap-secret");

    World() {
        fed.add_ledger(open_ledger("A", alice.address()));
        fed.add_ledger(open_ledger("B", bob.address()));
        fed.submit(alice.sign("A", mint(alice.address(), 100), fed.now()));
        fed.submit(bob.sign("B", mint(bob.address(), 100), fed.now()));
        fed.seal_pending();
    }

    SwapPlan plan(std::int64_t a_amount = 30, std::int64_t b_amount = 20) {
        SwapPlan p;
        p.id = "S1";
        p.a = {"A", alice.address(), bob.address(), AssetKind::token, a_amount, {}, {}, {}};
        p.b = {"B", bob.address(), alice.address(), AssetKind::token, b_amount, {}, {}, {}};
        p.secret_holder = alice.address();
        p.hashlock = sha256(secret.view());
        p.set_default_timelocks(fed.now());
        return p;
    }
    SwapParties parties() { return {&alice, &bob, &alice, &bob}; }

    std::int64_t balance(const std::string& ledger, const Wallet& w) {
        return fed.ledger(ledger).with_state([&](const ContractState& s) { return s.token.balance_of(w.address()); });
    }
    bool conserved() {
        for (const auto& id : fed.ledger_ids()) {
            if (!fed.ledger(id).with_state([](const ContractState& s) { return s.conserves_tokens(); })) return false;
        }
        return true;
    }
};

FaultSchedule crash_at(int step) {
    FaultSchedule f;
    f.steps[static_cast<std::size_t>(step)].kind = StepFaultKind::crash;
    return f;
}

}  // namespace

TEST(Swap, HappyPathExchangesBothLegs) {
    World w;
    auto st = run_swap(w.fed, w.plan(), w.parties(), w.secret);
    EXPECT_EQ(st.phase, SwapPhase::complete);
    EXPECT_EQ(st.leg_a, LegState::claimed);
    EXPECT_EQ(st.leg_b, LegState::claimed);
    EXPECT_EQ(st.revealed, w.secret);
    EXPECT_FALSE(st.error.has_value());
    EXPECT_EQ(w.balance("A", w.alice), 70);
    EXPECT_EQ(w.balance("A", w.bob), 30);
    EXPECT_EQ(w.balance("B", w.bob), 80);
    EXPECT_EQ(w.balance("B", w.alice), 20);
    EXPECT_TRUE(w.conserved());
}

TEST(Swap, PlanValidation) {
    World w;
    auto p = w.plan();
    p.b.ledger = "A";
    expect_error(ErrorCode::BadSwapPlan, [&] { p.validate(); });
    p = w.plan();
    p.timelock_a = p.timelock_b + 2 * p.delta - 1;
    expect_error(ErrorCode::BadSwapPlan, [&] { p.validate(); });
    p = w.plan();
    expect_error(ErrorCode::BadSwapPlan, [&] { p.validate(sha256("other")); });
    p.a.amount = -1;
    expect_error(ErrorCode::BadSwapPlan, [&] { p.validate(); });
    EXPECT_NO_THROW(w.plan().validate(w.secret));
}

TEST(Swap, UnderfundedSwapLocksNothing) {
    World w;
    SwapDriver d(w.fed, w.plan(101, 5), w.parties(), w.secret);
    expect_error(ErrorCode::InsufficientFunds, [&] { d.start(); });
    EXPECT_EQ(w.fed.ledger("A").height(), 1u);
    EXPECT_EQ(w.fed.ledger("B").height(), 1u);
}

TEST(Swap, CoordinatorCrashBeforeLockBRefundsA) {
    World w;
    auto plan = w.plan();
    auto st = run_swap(w.fed, plan, w.parties(), w.secret, crash_at(1));
    EXPECT_EQ(st.phase, SwapPhase::refunded);
    EXPECT_EQ(st.leg_a, LegState::refunded);
    EXPECT_EQ(st.leg_b, LegState::none);
    EXPECT_EQ(st.error, ErrorCode::Timeout);
    EXPECT_EQ(w.balance("A", w.alice), 100);
    EXPECT_GE(st.finished_at, plan.timelock_a);
}

TEST(Swap, CrashBeforeRevealRefundsBoth) {
    World w;
    auto st = run_swap(w.fed, w.plan(), w.parties(), w.secret, crash_at(2));
    EXPECT_EQ(st.phase, SwapPhase::refunded);
    EXPECT_EQ(st.leg_a, LegState::refunded);
    EXPECT_EQ(st.leg_b, LegState::refunded);
    EXPECT_EQ(w.balance("A", w.alice), 100);
    EXPECT_EQ(w.balance("B", w.bob), 100);
}

TEST(Swap, WatcherFinishesAfterCrashAtLastStep) {
    World w;
    auto st = run_swap(w.fed, w.plan(), w.parties(), w.secret, crash_at(3));
    EXPECT_EQ(st.phase, SwapPhase::complete);
    EXPECT_EQ(w.balance("A", w.bob), 30);
}

TEST(Swap, CrashBeforeFirstLockIsANoOp) {
    World w;
    auto st = run_swap(w.fed, w.plan(), w.parties(), w.secret, crash_at(0));
    EXPECT_EQ(st.phase, SwapPhase::refunded);
    EXPECT_EQ(st.leg_a, LegState::none);
    EXPECT_FALSE(st.error.has_value());
}

TEST(Swap, EnumeratesAllSchedules) {
    auto all = FaultSchedule::enumerate(kDefaultDeltaMs);
    ASSERT_EQ(all.size(), 1250u);
    std::set<std::string> names;
    for (const auto& f : all) names.insert(f.describe());
    EXPECT_EQ(names.size(), 1250u);
}

TEST(Swap, SampledSchedulesNeverEndMixed) {
    // The acceptance binary runs all 1250; a sample keeps this quick.
    auto all = FaultSchedule::enumerate(kDefaultDeltaMs);
    for (std::size_t i = 0; i < all.size(); i += 37) {
        World w;
        auto st = run_swap(w.fed, w.plan(), w.parties(), w.secret, all[i]);
        ASSERT_TRUE(st.terminal()) << all[i].describe();
        EXPECT_FALSE(st.mixed()) << all[i].describe();
        EXPECT_EQ(w.balance("A", w.alice) + w.balance("A", w.bob), 100);
        EXPECT_EQ(w.balance("B", w.alice) + w.balance("B", w.bob), 100);
        EXPECT_TRUE(w.conserved());
    }
}

TEST(Swap, RevealGateHoldsThenReleases) {
    for (auto final_state : {GateState::open, GateState::closed}) {
        World w;
        GateState gate = GateState::pending;
        SwapDriver d(w.fed, w.plan(), w.parties(), w.secret, {}, [&] { return gate; });
        d.start();
        for (int i = 0; i < 20; ++i) {
            w.fed.advance_by(kStepLatencyMs);
            d.poll();
        }
        EXPECT_EQ(d.status().phase, SwapPhase::b_locked);
        gate = final_state;
        auto st = drive_to_completion(w.fed, d);
        EXPECT_EQ(st.phase, final_state == GateState::open ? SwapPhase::complete : SwapPhase::refunded);
        EXPECT_FALSE(st.mixed());
    }
}

TEST(Swap, CustodyAgainstHandover) {
    World w;
    auto& farm = w.wallets.add("farm", 1);
    auto& truck = w.wallets.add("truck", 1);
    w.fed.submit(farm.sign("A", {ContractKind::provenance, "register_lot", {{"lot", "LOT"}, {"segment", "SF"}}}, w.fed.now()));
    w.fed.seal("A");
    SwapPlan p;
    p.id = "H1";
    p.a = {"A", farm.address(), truck.address(), AssetKind::custody, 0, "LOT", "SF", "TRA"};
    p.b = {"B", truck.address(), farm.address(), AssetKind::handover, 0, "LOT", "SF", "TRA"};
    p.secret_holder = farm.address();
    p.hashlock = sha256(w.secret.view());
    p.set_default_timelocks(w.fed.now());
    auto st = run_swap(w.fed, p, {&farm, &truck, &farm, &truck}, w.secret);
    EXPECT_EQ(st.phase, SwapPhase::complete);
    w.fed.ledger("A").with_state([&](const ContractState& s) {
        EXPECT_EQ(s.provenance.lots.at("LOT").holder, truck.address());
        EXPECT_EQ(s.provenance.lots.at("LOT").segment, "TRA");
        return 0;
    });
    w.fed.ledger("B").with_state([&](const ContractState& s) {
        EXPECT_EQ(s.provenance.handovers.size(), 1u);
        if (!s.provenance.handovers.empty()) EXPECT_EQ(s.provenance.handovers[0].to_segment, "TRA");
        return 0;
    });

    // the lot now belongs to the truck: a second swap by the farm is refused up front
    p.id = "H2";
    p.set_default_timelocks(w.fed.now());
    SwapDriver again(w.fed, p, {&farm, &truck, &farm, &truck}, w.secret);
    expect_error(ErrorCode::NotCurrentHolder, [&] { again.start(); });
}

// -------------------------------------------------------------- anchoring

namespace {

struct AnchorWorld {
    Federation fed{0};
    WalletBook wallets;
    Wallet& op = wallets.add("op", 2);

    AnchorWorld() {
        fed.add_ledger(open_ledger("src", op.address()));
        LedgerConfig pub;
        pub.id = "pub";
        pub.kind = LedgerKind::anchor_only;
        fed.add_ledger(pub);
    }
    void grow(int blocks) {
        for (int i = 0; i < blocks; ++i) {
            fed.advance_by(1000);
            fed.submit(op.sign("src", mint(op.address(), i + 1), fed.now()));
            fed.seal("src");
        }
    }
};

}  // namespace

TEST(Anchoring, CheckpointsVerifyAgainstReplay) {
    AnchorWorld w;
    expect_error(ErrorCode::NothingNew, [&] { anchor_checkpoint(w.fed, w.op, "src", "pub"); });
    expect_error(ErrorCode::NoCheckpoints, [&] { verify_anchors(w.fed, "src", "pub"); });
    w.grow(3);
    auto cp = anchor_checkpoint(w.fed, w.op, "src", "pub");
    EXPECT_EQ(cp.height, 3u);
    EXPECT_EQ(cp.state_root, w.fed.ledger("src").tip().state_root);
    expect_error(ErrorCode::NothingNew, [&] { anchor_checkpoint(w.fed, w.op, "src", "pub"); });
    w.grow(2);
    anchor_checkpoint(w.fed, w.op, "src", "pub");
    auto cps = read_checkpoints(w.fed.ledger("pub"), "src");
    ASSERT_EQ(cps.size(), 2u);
    auto r = verify_anchors(w.fed, "src", "pub");
    EXPECT_TRUE(r.ok);
    EXPECT_EQ(r.checkpoints, 2u);
}

TEST(Anchoring, RewrittenHistoryDivergesAtFirstCoveringCheckpoint) {
    AnchorWorld w;
    w.grow(2);
    anchor_checkpoint(w.fed, w.op, "src", "pub");  // height 2
    w.grow(3);
    anchor_checkpoint(w.fed, w.op, "src", "pub");  // height 5
    auto cps = read_checkpoints(w.fed.ledger("pub"), "src");
    const auto& cfg = w.fed.ledger("src").config();

    for (std::uint64_t h = 1; h <= 5; ++h) {
        auto blocks = w.fed.ledger("src").blocks();
        blocks[h].transactions[0].payload.args["amount"] = std::int64_t{999};
        auto r = verify_anchors(cfg, blocks, cps);
        EXPECT_FALSE(r.ok) << h;
        EXPECT_EQ(r.first_divergent_checkpoint, h <= 2 ? 0u : 1u) << h;
        EXPECT_EQ(r.divergent_height, h <= 2 ? 2u : 5u) << h;
    }
    auto truncated = w.fed.ledger("src").blocks();
    truncated.resize(4);
    auto r = verify_anchors(cfg, truncated, cps);
    EXPECT_EQ(r.first_divergent_checkpoint, 1u);
}

TEST(Anchoring, PublicLedgerRejectsStaleAnchor) {
    AnchorWorld w;
    w.grow(2);
    anchor_checkpoint(w.fed, w.op, "src", "pub");
    ContractCall stale{ContractKind::anchor, "commit", {{"source", "src"}, {"height", 1}, {"state_root", sha256("x").hex()}}};
    w.fed.submit(w.op.sign("pub", stale, w.fed.now()));
    auto b = w.fed.seal("pub");
    EXPECT_FALSE(b.results.back().ok);
    EXPECT_EQ(b.results.back().error, ErrorCode::StaleAnchor);
}

TEST(Federation, ClockAndEvents) {
    Federation fed(100);
    fed.advance_to(50);
    EXPECT_EQ(fed.now(), 100);
    fed.advance_by(5);
    EXPECT_EQ(fed.now(), 105);
    EXPECT_EQ(fed.events().append("x", 1), 1u);
    EXPECT_EQ(fed.events().append("y", 2), 2u);
    auto tail = fed.events().since(1);
    ASSERT_EQ(tail.size(), 1u);
    EXPECT_EQ(tail[0].kind, "y");
    EXPECT_EQ(fed.events().wait_beyond(5, std::chrono::milliseconds(1)), 2u);
    fed.add_ledger(open_ledger("a"));
    expect_error(ErrorCode::DuplicateLedger, [&] { fed.add_ledger(open_ledger("a")); });
    expect_error(ErrorCode::UnknownLedger, [&] { fed.ledger("zz"); });
}

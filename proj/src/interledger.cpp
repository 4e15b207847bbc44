#include "fedledger/interledger.hpp"

#include "fedledger/enum_names.hpp"
#include "fedledger/error.hpp"

#include <algorithm>

namespace fedledger {

namespace {

constexpr detail::EnumTable<SwapPhase, 7> kPhases{{{SwapPhase::init, "init"},
                                                  {SwapPhase::a_locked, "a_locked"},
                                                  {SwapPhase::b_locked, "b_locked"},
                                                  {SwapPhase::b_claimed, "b_claimed"},
                                                  {SwapPhase::complete, "complete"},
                                                  {SwapPhase::refunding, "refunding"},
                                                  {SwapPhase::refunded, "refunded"}}};
constexpr detail::EnumTable<LegState, 4> kLegStates{{{LegState::none, "none"},
                                                    {LegState::locked, "locked"},
                                                    {LegState::claimed, "claimed"},
                                                    {LegState::refunded, "refunded"}}};

ContractCall lock_call(const SwapLeg& leg, const std::string& escrow, const Digest& hashlock, std::int64_t timelock) {
    ContractCall c{ContractKind::htlc, "lock", {}};
    c.args["id"] = escrow;
    c.args["payee"] = leg.payee.hex();
    c.args["hashlock"] = hashlock.hex();
    c.args["timelock"] = timelock;
    c.args["asset"] = std::string(to_string(leg.asset));
    switch (leg.asset) {
        case AssetKind::token:
            c.args["amount"] = leg.amount;
            break;
        case AssetKind::custody:
            c.args["lot"] = leg.lot;
            c.args["to_segment"] = leg.to_segment;
            break;
        case AssetKind::handover:
            c.args["lot"] = leg.lot;
            c.args["from_segment"] = leg.from_segment;
            c.args["to_segment"] = leg.to_segment;
            break;
    }
    return c;
}

ContractCall settle_call(const std::string& method, const std::string& escrow) {
    ContractCall c{ContractKind::htlc, method, {}};
    c.args["id"] = escrow;
    return c;
}

}  // namespace

std::string_view to_string(SwapPhase v) noexcept { return detail::enum_name(kPhases, v); }
std::string_view to_string(LegState v) noexcept { return detail::enum_name(kLegStates, v); }

void SwapPlan::validate(const std::optional<Preimage>& secret) const {
    if (id.empty()) throw Error(ErrorCode::BadSwapPlan, "swap id must not be empty");
    if (a.ledger == b.ledger) throw Error(ErrorCode::BadSwapPlan, "legs must use distinct ledgers");
    if (delta <= 0) throw Error(ErrorCode::BadSwapPlan, "delta must be positive");
    if (timelock_a < timelock_b + 2 * delta) throw Error(ErrorCode::BadSwapPlan, "timelock_a < timelock_b + 2*delta");
    if (secret && sha256(secret->view()) != hashlock) throw Error(ErrorCode::BadSwapPlan, "hashlock mismatch");
    for (const auto* leg : {&a, &b}) {
        if (leg->asset == AssetKind::token && leg->amount < 0) throw Error(ErrorCode::BadSwapPlan, "negative amount");
    }
}

void SwapPlan::set_default_timelocks(std::int64_t now) {
    timelock_b = now + 6 * delta;
    timelock_a = timelock_b + 2 * delta;
}

void to_json(nlohmann::json& j, const SwapStatus& s) {
    j = {{"swap", s.swap},
         {"phase", to_string(s.phase)},
         {"leg_a", to_string(s.leg_a)},
         {"leg_b", to_string(s.leg_b)},
         {"revealed", s.revealed ? nlohmann::json(s.revealed->hex()) : nlohmann::json(nullptr)},
         {"error", s.error ? nlohmann::json(to_string(*s.error)) : nlohmann::json(nullptr)},
         {"finished_at", s.finished_at}};
}

std::vector<FaultSchedule> FaultSchedule::enumerate(std::int64_t delta) {
    const std::array<StepFault, 5> options{{{StepFaultKind::none, 0},
                                            {StepFaultKind::delay, delta},
                                            {StepFaultKind::delay, 2 * delta},
                                            {StepFaultKind::delay, 3 * delta},
                                            {StepFaultKind::crash, 0}}};
    std::vector<FaultSchedule> out;
    for (Party slow : {Party::initiator, Party::responder}) {
        for (int code = 0; code < 625; ++code) {
            FaultSchedule f;
            f.slow_party = slow;
            int c = code;
            for (auto& step : f.steps) {
                step = options[static_cast<std::size_t>(c % 5)];
                c /= 5;
            }
            out.push_back(f);
        }
    }
    return out;
}

std::string FaultSchedule::describe() const {
    std::string s = "slow=";
    s += !slow_party ? "none" : (*slow_party == Party::initiator ? "initiator" : "responder");
    s += " steps=[";
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i) s += ",";
        switch (steps[i].kind) {
            case StepFaultKind::none: s += "none"; break;
            case StepFaultKind::delay: s += "delay:" + std::to_string(steps[i].delay_ms); break;
            case StepFaultKind::crash: s += "crash"; break;
        }
    }
    return s + "]";
}

// ------------------------------------------------------------ SwapDriver

SwapDriver::SwapDriver(Federation& fed, SwapPlan plan, SwapParties parties, Preimage secret, FaultSchedule faults,
                       RevealGate gate)
    : fed_(fed),
      plan_(std::move(plan)),
      parties_(parties),
      secret_(secret),
      faults_(faults),
      gate_(std::move(gate)) {
    status_.swap = plan_.id;
    if (!parties_.a_claimer) parties_.a_claimer = parties_.secret_holder;
    if (!parties_.a_payer || !parties_.b_payer || !parties_.secret_holder)
        throw Error(ErrorCode::BadSwapPlan, "swap parties incomplete");
}

std::int64_t SwapDriver::latency(Party p) const {
    return faults_.slow_party == p ? plan_.delta : kStepLatencyMs;
}

LegState SwapDriver::leg_state(const SwapLeg& leg, const std::string& escrow) const {
    return fed_.ledger(leg.ledger).with_state([&](const ContractState& s) {
        auto it = s.escrows.find(escrow);
        if (it == s.escrows.end()) return LegState::none;
        switch (it->second.status) {
            case EscrowStatus::locked: return LegState::locked;
            case EscrowStatus::claimed: return LegState::claimed;
            case EscrowStatus::refunded: return LegState::refunded;
        }
        return LegState::none;
    });
}

std::optional<Preimage> SwapDriver::revealed_on(const SwapLeg& leg, const std::string& escrow) const {
    return fed_.ledger(leg.ledger).with_state([&](const ContractState& s) -> std::optional<Preimage> {
        auto it = s.escrows.find(escrow);
        if (it == s.escrows.end()) return std::nullopt;
        return it->second.preimage;
    });
}

bool SwapDriver::submit_and_seal(Wallet& w, const std::string& ledger, ContractCall call) {
    auto tx = w.sign(ledger, std::move(call), fed_.now());
    try {
        fed_.submit(tx);
    } catch (const Error&) {
        return false;
    }
    auto block = fed_.seal(ledger);
    for (std::size_t i = 0; i < block.transactions.size(); ++i) {
        if (block.transactions[i].id == tx.id) return block.results[i].ok;
    }
    return false;
}

void SwapDriver::start() {
    if (started_) return;
    plan_.validate(secret_);
    for (const auto* leg : {&plan_.a, &plan_.b}) {
        const auto& escrow = leg == &plan_.a ? plan_.escrow_a() : plan_.escrow_b();
        fed_.ledger(leg->ledger).with_state([&](const ContractState& s) {
            if (s.escrows.count(escrow)) throw Error(ErrorCode::EscrowExists, escrow);
            if (leg->asset == AssetKind::token && s.token.balance_of(leg->payer) < leg->amount)
                throw Error(ErrorCode::InsufficientFunds, leg->ledger);
            if (leg->asset == AssetKind::custody) {
                auto it = s.provenance.lots.find(leg->lot);
                if (it == s.provenance.lots.end()) throw Error(ErrorCode::LotNotFound, leg->lot);
                if (it->second.holder != leg->payer || !it->second.locked_by.empty())
                    throw Error(ErrorCode::NotCurrentHolder, leg->lot);
            }
            return 0;
        });
    }
    started_ = true;
    schedule_next_step();
}

void SwapDriver::schedule_next_step() {
    step_due_.reset();
    if (next_step_ >= 4) {
        coordinator_done_ = true;
        return;
    }
    const auto& f = faults_.steps[static_cast<std::size_t>(next_step_)];
    if (f.kind == StepFaultKind::crash) {
        coordinator_done_ = true;
        return;
    }
    step_due_ = fed_.now() + kStepLatencyMs + (f.kind == StepFaultKind::delay ? f.delay_ms : 0);
}

void SwapDriver::coordinator_step() {
    const auto now = fed_.now();
    auto abort = [&] {
        coordinator_done_ = true;
        step_due_.reset();
    };
    switch (next_step_) {
        case 0:
            if (!submit_and_seal(*parties_.a_payer, plan_.a.ledger,
                                 lock_call(plan_.a, plan_.escrow_a(), plan_.hashlock, plan_.timelock_a)))
                return abort();
            break;
        case 1: {
            // The responder only locks against a leg A it can see on chain with
            // the agreed hashlock and a timelock leaving it 2Δ of margin.
            bool safe = fed_.ledger(plan_.a.ledger).with_state([&](const ContractState& s) {
                auto it = s.escrows.find(plan_.escrow_a());
                return it != s.escrows.end() && it->second.status == EscrowStatus::locked &&
                       it->second.hashlock == plan_.hashlock && it->second.timelock >= plan_.timelock_b + 2 * plan_.delta;
            });
            if (!safe || now >= plan_.timelock_b) return abort();
            if (!submit_and_seal(*parties_.b_payer, plan_.b.ledger,
                                 lock_call(plan_.b, plan_.escrow_b(), plan_.hashlock, plan_.timelock_b)))
                return abort();
            break;
        }
        case 2: {
            if (now >= plan_.timelock_b) return abort();
            if (gate_) {
                auto g = gate_();
                if (g == GateState::closed) return abort();
                if (g == GateState::pending) {
                    step_due_.reset();  // re-evaluated on every poll
                    return;
                }
            }
            if (leg_state(plan_.b, plan_.escrow_b()) != LegState::locked || now >= plan_.timelock_b) return abort();
            auto claim = settle_call("claim", plan_.escrow_b());
            claim.args["preimage"] = secret_.hex();
            if (!submit_and_seal(*parties_.secret_holder, plan_.b.ledger, std::move(claim))) return abort();
            break;
        }
        case 3: {
            auto preimage = revealed_on(plan_.b, plan_.escrow_b());
            if (!preimage || leg_state(plan_.a, plan_.escrow_a()) != LegState::locked) return abort();
            auto claim = settle_call("claim", plan_.escrow_a());
            claim.args["preimage"] = preimage->hex();
            submit_and_seal(*parties_.a_claimer, plan_.a.ledger, std::move(claim));
            break;
        }
        default:
            return abort();
    }
    ++next_step_;
    schedule_next_step();
}

void SwapDriver::watchers() {
    const auto now = fed_.now();
    if (!reveal_seen_at_) {
        if (auto p = revealed_on(plan_.b, plan_.escrow_b())) {
            reveal_seen_at_ = now;
            status_.revealed = p;
        }
    }
    auto a = leg_state(plan_.a, plan_.escrow_a());
    if (a == LegState::locked && reveal_seen_at_ && now >= *reveal_seen_at_ + latency(Party::responder) &&
        now < plan_.timelock_a) {
        auto claim = settle_call("claim", plan_.escrow_a());
        claim.args["preimage"] = status_.revealed->hex();
        submit_and_seal(*parties_.a_claimer, plan_.a.ledger, std::move(claim));
        a = leg_state(plan_.a, plan_.escrow_a());
    }
    if (a == LegState::locked && now >= plan_.timelock_a + latency(Party::initiator)) {
        submit_and_seal(*parties_.a_payer, plan_.a.ledger, settle_call("refund", plan_.escrow_a()));
    }
    if (leg_state(plan_.b, plan_.escrow_b()) == LegState::locked &&
        now >= plan_.timelock_b + latency(Party::responder)) {
        submit_and_seal(*parties_.b_payer, plan_.b.ledger, settle_call("refund", plan_.escrow_b()));
    }
}

void SwapDriver::refresh() {
    status_.leg_a = leg_state(plan_.a, plan_.escrow_a());
    status_.leg_b = leg_state(plan_.b, plan_.escrow_b());
    if (!status_.revealed) status_.revealed = revealed_on(plan_.b, plan_.escrow_b());
    const auto a = status_.leg_a;
    const auto b = status_.leg_b;
    const bool any_locked = a == LegState::locked || b == LegState::locked;
    const bool any_refunded = a == LegState::refunded || b == LegState::refunded;

    SwapPhase phase;
    if (a == LegState::claimed && b == LegState::claimed) {
        phase = SwapPhase::complete;
    } else if (!any_locked && coordinator_done_) {
        phase = a == LegState::claimed ? SwapPhase::complete : SwapPhase::refunded;
    } else if (any_refunded) {
        phase = SwapPhase::refunding;
    } else if (b == LegState::claimed) {
        phase = SwapPhase::b_claimed;
    } else if (b == LegState::locked) {
        phase = SwapPhase::b_locked;
    } else if (a == LegState::locked) {
        phase = SwapPhase::a_locked;
    } else {
        phase = SwapPhase::init;
    }
    status_.phase = std::max(status_.phase, phase);
    if (status_.terminal()) {
        coordinator_done_ = true;
        step_due_.reset();
        status_.finished_at = fed_.now();
        if (status_.phase == SwapPhase::refunded && a != LegState::none) status_.error = ErrorCode::Timeout;
    }
}

void SwapDriver::poll() {
    if (!started_) start();
    if (status_.terminal()) return;
    const auto now = fed_.now();
    last_poll_ = now;
    const bool gate_wait = !coordinator_done_ && !step_due_ && next_step_ == 2;
    if (!coordinator_done_ && ((step_due_ && *step_due_ <= now) || gate_wait)) coordinator_step();
    watchers();
    refresh();
}

std::optional<std::int64_t> SwapDriver::next_wakeup() const {
    if (status_.terminal()) return std::nullopt;
    std::optional<std::int64_t> t;
    // Anything at or before the last poll was already attempted then.
    auto consider = [&](std::int64_t v) {
        if (v > last_poll_) t = t ? std::min(*t, v) : v;
    };
    if (!coordinator_done_ && step_due_) consider(*step_due_);
    if (status_.leg_a == LegState::locked) {
        if (reveal_seen_at_) consider(*reveal_seen_at_ + latency(Party::responder));
        consider(plan_.timelock_a + latency(Party::initiator));
    }
    if (status_.leg_b == LegState::locked) consider(plan_.timelock_b + latency(Party::responder));
    return t;
}

SwapStatus run_swap(Federation& fed, const SwapPlan& plan, const SwapParties& parties, const Preimage& secret,
                    const FaultSchedule& faults) {
    SwapDriver driver(fed, plan, parties, secret, faults);
    driver.start();
    return drive_to_completion(fed, driver);
}

SwapStatus drive_to_completion(Federation& fed, SwapDriver& driver) {
    driver.poll();
    while (!driver.terminal()) {
        auto t = driver.next_wakeup();
        if (!t) break;
        fed.advance_to(*t);
        driver.poll();
    }
    return driver.status();
}

}  // namespace fedledger

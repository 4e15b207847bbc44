#include "fedledger/error.hpp"
#include "fedledger/interledger.hpp"

namespace fedledger {

void to_json(nlohmann::json& j, const AnchorCheckpoint& c) {
    j = {{"source_ledger", c.source_ledger},
         {"height", c.height},
         {"state_root", c.state_root.hex()},
         {"anchored_in", {{"ledger_id", c.public_ledger}, {"tx_id", c.tx_id.hex()}}},
         {"anchored_at", c.anchored_at}};
}

void to_json(nlohmann::json& j, const AnchorReport& r) {
    j = {{"ok", r.ok}, {"checkpoints", r.checkpoints}};
    j["first_divergent_checkpoint"] =
        r.first_divergent_checkpoint ? nlohmann::json(*r.first_divergent_checkpoint) : nlohmann::json(nullptr);
    j["divergent_height"] = r.divergent_height ? nlohmann::json(*r.divergent_height) : nlohmann::json(nullptr);
    if (!r.reason.empty()) j["reason"] = r.reason;
}

std::vector<AnchorCheckpoint> read_checkpoints(const Ledger& public_ledger, const std::string& source) {
    return public_ledger.with_state([&](const ContractState& s) {
        std::vector<AnchorCheckpoint> out;
        auto it = s.anchors.by_source.find(source);
        if (it == s.anchors.by_source.end()) return out;
        for (const auto& e : it->second) {
            out.push_back({source, e.height, e.state_root, public_ledger.id(), e.tx_id, e.anchored_at});
        }
        return out;
    });
}

AnchorCheckpoint anchor_checkpoint(Federation& fed, Wallet& signer, const std::string& source,
                                   const std::string& public_ledger) {
    auto& src = fed.ledger(source);
    auto& pub = fed.ledger(public_ledger);
    const auto tip = src.tip();
    auto existing = read_checkpoints(pub, source);
    if (tip.height == 0 || (!existing.empty() && tip.height <= existing.back().height))
        throw Error(ErrorCode::NothingNew, source + " at height " + std::to_string(tip.height));

    ContractCall call{ContractKind::anchor, "commit", {}};
    call.args["source"] = source;
    call.args["height"] = static_cast<std::int64_t>(tip.height);
    call.args["state_root"] = tip.state_root.hex();
    auto tx = signer.sign(public_ledger, std::move(call), fed.now());
    try {
        fed.submit(tx);
    } catch (const Error& e) {
        throw Error(ErrorCode::PublicLedgerRejected, std::string(to_string(e.code())));
    }
    auto block = fed.seal(public_ledger);
    for (std::size_t i = 0; i < block.transactions.size(); ++i) {
        if (block.transactions[i].id != tx.id) continue;
        if (!block.results[i].ok)
            throw Error(ErrorCode::PublicLedgerRejected, std::string(to_string(block.results[i].error)));
        AnchorCheckpoint cp{source, tip.height, tip.state_root, public_ledger, tx.id, block.sealed_at};
        fed.events().append("anchor", cp);
        return cp;
    }
    throw Error(ErrorCode::PublicLedgerRejected, "anchor transaction missing from sealed block");
}

AnchorReport verify_anchors(const LedgerConfig& source_config, std::span<const Block> source_blocks,
                            const std::vector<AnchorCheckpoint>& checkpoints) {
    if (checkpoints.empty()) throw Error(ErrorCode::NoCheckpoints, source_config.id);
    AnchorReport report;
    report.checkpoints = checkpoints.size();
    auto roots = replay_state_roots(source_config, source_blocks);
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        const auto& cp = checkpoints[i];
        std::string reason;
        if (cp.height >= roots.size()) {
            reason = "source history ends before anchored height";
        } else if (source_blocks[cp.height].height != cp.height) {
            reason = "block at anchored height is out of sequence";
        } else if (roots[cp.height] != cp.state_root) {
            reason = "replayed state root differs from anchored root";
        }
        if (!reason.empty()) {
            report.ok = false;
            report.first_divergent_checkpoint = i;
            report.divergent_height = cp.height;
            report.reason = reason;
            return report;
        }
    }
    return report;
}

AnchorReport verify_anchors(const Federation& fed, const std::string& source, const std::string& public_ledger) {
    const auto& src = fed.ledger(source);
    auto checkpoints = read_checkpoints(fed.ledger(public_ledger), source);
    auto blocks = src.blocks();
    return verify_anchors(src.config(), blocks, checkpoints);
}

}  // namespace fedledger

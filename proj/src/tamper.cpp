#include "fedledger/tamper.hpp"

#include "fedledger/error.hpp"

#include <fstream>
#include <iterator>

namespace fedledger {

void flip_byte_in_file(const std::filesystem::path& file, std::size_t offset, std::uint8_t mask) {
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + file.string());
    f.seekg(0, std::ios::end);
    auto size = static_cast<std::size_t>(f.tellg());
    if (offset >= size) throw Error(ErrorCode::BadTarget, "offset beyond end of " + file.string());
    f.seekg(static_cast<std::streamoff>(offset));
    char c = 0;
    f.read(&c, 1);
    c = static_cast<char>(static_cast<std::uint8_t>(c) ^ mask);
    f.seekp(static_cast<std::streamoff>(offset));
    f.write(&c, 1);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + file.string());
}

std::size_t block_file_offset(ByteView chain_bytes, std::uint64_t height) {
    Reader r(chain_bytes);
    try {
        for (std::uint64_t h = 0;; ++h) {
            auto len = r.u32();
            if (h == height) return r.offset();
            if (len > r.remaining()) break;
            for (std::uint32_t i = 0; i < len; ++i) r.u8();
        }
    } catch (const Error&) {
    }
    throw Error(ErrorCode::BadTarget, "no block at height " + std::to_string(height));
}

std::size_t payload_int_offset(const Block& block, std::size_t tx_index) {
    if (tx_index >= block.transactions.size()) throw Error(ErrorCode::BadTarget, "no such transaction");
    Block changed = block;
    for (auto& [key, value] : changed.transactions[tx_index].payload.args) {
        if (auto* v = std::get_if<std::int64_t>(&value)) {
            *v ^= 1;  // only the last byte differs
            auto a = block.encode();
            auto b = changed.encode();
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (a[i] != b[i]) return i;
            }
        }
    }
    throw Error(ErrorCode::BadTarget, "transaction has no integer argument");
}

std::vector<Block> reseal_with(const LedgerConfig& config, std::span<const Block> blocks, std::uint64_t height,
                               std::size_t tx_index, const Transaction& replacement) {
    if (height == 0 || height >= blocks.size() || tx_index >= blocks[height].transactions.size())
        throw Error(ErrorCode::BadTarget, "no transaction to rewrite");
    std::vector<Block> out;
    ContractState state = config.genesis_state();
    for (const auto& b : blocks) {
        auto txs = b.transactions;
        if (b.height == height) txs[tx_index] = replacement;
        out.push_back(seal_next(config, out.empty() ? nullptr : &out.back(), state, std::move(txs), b.sealed_at));
    }
    return out;
}

}  // namespace fedledger

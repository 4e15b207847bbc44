#pragma once

#include "fedledger/ledger.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fedledger {

// Offline tampering of persisted chains, used for fault injection and the
// tamper-evidence tests. Nothing here goes through a Ledger.

/// XORs `mask` into the byte at `offset`. Errors: IoError, BadTarget.
void flip_byte_in_file(const std::filesystem::path& file, std::size_t offset, std::uint8_t mask);

/// Offset of the encoded block at `height` inside chain-file bytes (past its
/// length prefix). Error: BadTarget.
std::size_t block_file_offset(ByteView chain_bytes, std::uint64_t height);

/// Offset, within `block.encode()`, of the least significant byte of the
/// first integer argument of transaction `tx_index`. Error: BadTarget.
std::size_t payload_int_offset(const Block& block, std::size_t tx_index);

/// Rewrites history: replaces one transaction and re-seals every block from
/// `height` on with the original timestamps, producing a chain that is
/// internally consistent but differs from the original.
std::vector<Block> reseal_with(const LedgerConfig& config, std::span<const Block> blocks, std::uint64_t height,
                               std::size_t tx_index, const Transaction& replacement);

}  // namespace fedledger

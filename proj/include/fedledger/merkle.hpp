#pragma once

#include "fedledger/crypto.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace fedledger {

// Binary SHA-256 tree over leaf digests. Odd levels duplicate their last
// node; the empty tree's root is sha256("") and a single leaf is its own root.

Digest merkle_empty_root();
Digest merkle_node(const Digest& left, const Digest& right);
Digest merkle_root(std::span<const Digest> leaves);

/// Sibling digests from the leaf up to (not including) the root.
std::vector<Digest> merkle_path(std::span<const Digest> leaves, std::size_t index);

/// Recomputes a root from a leaf, its index and its sibling path.
Digest merkle_fold(const Digest& leaf, std::size_t index, std::span<const Digest> siblings);

}  // namespace fedledger

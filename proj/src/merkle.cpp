#include "fedledger/merkle.hpp"

#include <stdexcept>

namespace fedledger {

Digest merkle_empty_root() { return sha256(std::string_view{}); }

Digest merkle_node(const Digest& left, const Digest& right) {
    std::array<std::uint8_t, 64> buf{};
    std::copy(left.bytes.begin(), left.bytes.end(), buf.begin());
    std::copy(right.bytes.begin(), right.bytes.end(), buf.begin() + 32);
    return sha256(ByteView(buf));
}

namespace {

std::vector<Digest> next_level(const std::vector<Digest>& level) {
    std::vector<Digest> up;
    up.reserve((level.size() + 1) / 2);
    for (std::size_t i = 0; i < level.size(); i += 2) {
        const auto& right = i + 1 < level.size() ? level[i + 1] : level[i];
        up.push_back(merkle_node(level[i], right));
    }
    return up;
}

}  // namespace

Digest merkle_root(std::span<const Digest> leaves) {
    if (leaves.empty()) return merkle_empty_root();
    std::vector<Digest> level(leaves.begin(), leaves.end());
    while (level.size() > 1) level = next_level(level);
    return level.front();
}

std::vector<Digest> merkle_path(std::span<const Digest> leaves, std::size_t index) {
    if (index >= leaves.size()) throw std::out_of_range("merkle_path: leaf index out of range");
    std::vector<Digest> path;
    std::vector<Digest> level(leaves.begin(), leaves.end());
    while (level.size() > 1) {
        std::size_t sibling = index ^ 1u;
        path.push_back(sibling < level.size() ? level[sibling] : level[index]);
        level = next_level(level);
        index /= 2;
    }
    return path;
}

Digest merkle_fold(const Digest& leaf, std::size_t index, std::span<const Digest> siblings) {
    Digest acc = leaf;
    for (const auto& s : siblings) {
        acc = (index & 1u) ? merkle_node(s, acc) : merkle_node(acc, s);
        index /= 2;
    }
    return acc;
}

}  // namespace fedledger

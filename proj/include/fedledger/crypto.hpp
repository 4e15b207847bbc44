#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedledger {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// 32 opaque bytes: SHA-256 digests, hashlock preimages, key seeds.
struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(const Digest&) const = default;

    bool is_zero() const noexcept;
    std::string hex() const;
    ByteView view() const noexcept { return bytes; }

    /// Throws Error(DecodeError) unless `hex` is exactly 64 hex digits.
    static Digest from_hex(std::string_view hex);
};

using Preimage = Digest;

Digest sha256(ByteView data);
Digest sha256(std::string_view data);

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

using PublicKey = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;

/// An account identity: SHA-256 of an Ed25519 public key.
struct Address {
    Digest digest;

    auto operator<=>(const Address&) const = default;

    std::string hex() const { return digest.hex(); }
    static Address from_hex(std::string_view hex) { return Address{Digest::from_hex(hex)}; }
    static Address of(const PublicKey& key);
};

class KeyPair {
public:
    /// Deterministic: the same seed always yields the same keys.
    static KeyPair from_seed(const Digest& seed);

    const PublicKey& public_key() const noexcept { return public_; }
    Address address() const { return Address::of(public_); }
    Signature sign(ByteView message) const;

private:
    PublicKey public_{};
    std::array<std::uint8_t, 64> secret_{};
};

bool verify_signature(const PublicKey& key, ByteView message, const Signature& signature);

}  // namespace fedledger

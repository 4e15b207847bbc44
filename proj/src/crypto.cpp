#include "fedledger/crypto.hpp"

#include "fedledger/error.hpp"

#include <sodium.h>

namespace fedledger {

namespace {

void ensure_sodium() {
    static const bool ready = [] {
        if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
        return true;
    }();
    (void)ready;
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

bool Digest::is_zero() const noexcept {
    for (auto b : bytes) {
        if (b != 0) return false;
    }
    return true;
}

std::string Digest::hex() const { return to_hex(bytes); }

Digest Digest::from_hex(std::string_view hex) {
    if (hex.size() != 64) throw Error(ErrorCode::DecodeError, "digest must be 64 hex digits");
    Digest d;
    auto raw = fedledger::from_hex(hex);
    std::copy(raw.begin(), raw.end(), d.bytes.begin());
    return d;
}

Digest sha256(ByteView data) {
    ensure_sodium();
    Digest d;
    crypto_hash_sha256(d.bytes.data(), data.data(), data.size());
    return d;
}

Digest sha256(std::string_view data) {
    return sha256(ByteView(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

std::string to_hex(ByteView data) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0x0f]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw Error(ErrorCode::DecodeError, "odd-length hex");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw Error(ErrorCode::DecodeError, "bad hex digit");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

Address Address::of(const PublicKey& key) { return Address{sha256(ByteView(key))}; }

KeyPair KeyPair::from_seed(const Digest& seed) {
    ensure_sodium();
    static_assert(crypto_sign_SEEDBYTES == 32);
    static_assert(crypto_sign_PUBLICKEYBYTES == 32);
    static_assert(crypto_sign_SECRETKEYBYTES == 64);
    KeyPair kp;
    crypto_sign_seed_keypair(kp.public_.data(), kp.secret_.data(), seed.bytes.data());
    return kp;
}

Signature KeyPair::sign(ByteView message) const {
    Signature sig{};
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret_.data());
    return sig;
}

bool verify_signature(const PublicKey& key, ByteView message, const Signature& signature) {
    ensure_sodium();
    return crypto_sign_verify_detached(signature.data(), message.data(), message.size(), key.data()) == 0;
}

}  // namespace fedledger

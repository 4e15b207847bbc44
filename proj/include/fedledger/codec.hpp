#pragma once

#include "fedledger/crypto.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace fedledger {

/// Canonical binary encoding used for every hash and signature.
///
/// Integers are fixed-width big-endian, variable-length fields carry a u32
/// length prefix, fixed-size arrays are written raw. Fields are always
/// written in declaration order, so two encoders agree byte for byte.
class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void boolean(bool v) { u8(v ? 1 : 0); }
    void bytes(ByteView v);
    void str(std::string_view v);
    void digest(const Digest& d) { raw(d.bytes); }

    template <std::size_t N>
    void raw(const std::array<std::uint8_t, N>& a) {
        out_.insert(out_.end(), a.begin(), a.end());
    }

    const Bytes& data() const& noexcept { return out_; }
    Bytes take() && noexcept { return std::move(out_); }

private:
    Bytes out_;
};

/// Bounds-checked reader; any malformed input throws Error(DecodeError).
class Reader {
public:
    explicit Reader(ByteView in) : in_(in) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    bool boolean();
    Bytes bytes();
    std::string str();
    Digest digest();

    template <std::size_t N>
    std::array<std::uint8_t, N> raw() {
        need(N);
        std::array<std::uint8_t, N> a{};
        std::copy(in_.begin() + pos_, in_.begin() + pos_ + N, a.begin());
        pos_ += N;
        return a;
    }

    /// Element count for a following sequence; rejects counts that could not
    /// possibly fit in the remaining input, given each element is at least
    /// `min_element_size` bytes.
    std::uint32_t count(std::size_t min_element_size);

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }
    bool done() const noexcept { return pos_ == in_.size(); }
    void expect_done() const;

private:
    void need(std::size_t n) const;

    ByteView in_;
    std::size_t pos_ = 0;
};

}  // namespace fedledger

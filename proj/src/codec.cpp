#include "fedledger/codec.hpp"

#include "fedledger/error.hpp"

namespace fedledger {

void Writer::u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Writer::u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Writer::bytes(ByteView v) {
    u32(static_cast<std::uint32_t>(v.size()));
    out_.insert(out_.end(), v.begin(), v.end());
}

void Writer::str(std::string_view v) {
    bytes(ByteView(reinterpret_cast<const std::uint8_t*>(v.data()), v.size()));
}

void Reader::need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error(ErrorCode::DecodeError, "truncated input");
}

std::uint8_t Reader::u8() {
    need(1);
    return in_[pos_++];
}

std::uint32_t Reader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
    return v;
}

std::uint64_t Reader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
    return v;
}

bool Reader::boolean() {
    auto v = u8();
    if (v > 1) throw Error(ErrorCode::DecodeError, "bad boolean");
    return v == 1;
}

Bytes Reader::bytes() {
    auto n = u32();
    need(n);
    Bytes out(in_.begin() + pos_, in_.begin() + pos_ + n);
    pos_ += n;
    return out;
}

std::string Reader::str() {
    auto n = u32();
    need(n);
    std::string out(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return out;
}

Digest Reader::digest() { return Digest{raw<32>()}; }

std::uint32_t Reader::count(std::size_t min_element_size) {
    auto n = u32();
    if (min_element_size > 0 && static_cast<std::uint64_t>(n) * min_element_size > remaining())
        throw Error(ErrorCode::DecodeError, "sequence count exceeds input");
    return n;
}

void Reader::expect_done() const {
    if (!done()) throw Error(ErrorCode::DecodeError, "trailing bytes");
}

}  // namespace fedledger

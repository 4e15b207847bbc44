#include "fedledger/codec.hpp"
#include "fedledger/crypto.hpp"

#include "support.hpp"

#include <limits>

using namespace fedtest;

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256("").hex(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256("abc").hex(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq").hex(),
              "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST(Ed25519, Rfc8032FirstVector) {
    auto seed = Digest::from_hex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60");
    auto kp = KeyPair::from_seed(seed);
    EXPECT_EQ(to_hex(kp.public_key()), "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a");
    auto sig = kp.sign({});
    EXPECT_EQ(to_hex(sig),
              "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46b"
              "d25bf5f0595bbe24655141438e7a100b");
    EXPECT_TRUE(verify_signature(kp.public_key(), {}, sig));
    sig[10] ^= 1;
    EXPECT_FALSE(verify_signature(kp.public_key(), {}, sig));
}

TEST(Ed25519, SameSeedSameKeys) {
    EXPECT_EQ(key("a").public_key(), key("a").public_key());
    EXPECT_NE(key("a").public_key(), key("b").public_key());
    EXPECT_EQ(key("a").address(), Address::of(key("a").public_key()));
}

TEST(Hex, RoundTripAndRejects) {
    Bytes b{0x00, 0x01, 0xab, 0xff};
    EXPECT_EQ(to_hex(b), "0001abff");
    EXPECT_EQ(from_hex("0001abff"), b);
    expect_error(ErrorCode::DecodeError, [] { Digest::from_hex("abc"); });
    expect_error(ErrorCode::DecodeError, [] { Digest::from_hex(std::string(64, 'g')); });
}

TEST(Codec, BigEndianLayout) {
    Writer w;
    w.u32(0x01020304);
    w.u64(0x0a0b0c0d0e0f1011ULL);
    w.str("hi");
    EXPECT_EQ(to_hex(w.data()), "01020304" "0a0b0c0d0e0f1011" "00000002" "6869");
}

TEST(Codec, RoundTripEveryField) {
    Writer w;
    w.u8(7);
    w.u32(std::numeric_limits<std::uint32_t>::max());
    w.i64(-42);
    w.boolean(true);
    w.bytes(Bytes{1, 2, 3});
    w.str("federation");
    w.digest(sha256("x"));
    Reader r(w.data());
    EXPECT_EQ(r.u8(), 7);
    EXPECT_EQ(r.u32(), std::numeric_limits<std::uint32_t>::max());
    EXPECT_EQ(r.i64(), -42);
    EXPECT_TRUE(r.boolean());
    EXPECT_EQ(r.bytes(), (Bytes{1, 2, 3}));
    EXPECT_EQ(r.str(), "federation");
    EXPECT_EQ(r.digest(), sha256("x"));
    EXPECT_NO_THROW(r.expect_done());
}

TEST(Codec, TruncationAlwaysRejected) {
    Writer w;
    w.str("payload");
    w.u64(99);
    const auto& full = w.data();
    for (std::size_t cut = 0; cut < full.size(); ++cut) {
        Bytes part(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(cut));
        Reader r(part);
        expect_error(ErrorCode::DecodeError, [&] {
            r.str();
            r.u64();
        });
    }
}

TEST(Codec, AbsurdCountsRejected) {
    Writer w;
    w.u32(1'000'000);
    w.u8(0);
    Reader r(w.data());
    expect_error(ErrorCode::DecodeError, [&] { r.count(8); });
}

TEST(Codec, BooleanMustBeZeroOrOne) {
    Bytes b{2};
    Reader r(b);
    expect_error(ErrorCode::DecodeError, [&] { r.boolean(); });
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "screenaim/protocol.hpp"

#include "oracles.hpp"

using namespace screenaim;
using namespace screenaim::protocol;

namespace {

using namespace oracle;

using Bytes = std::vector<std::uint8_t>;

DecodeError decode_error(const Bytes& b) {
  try {
    decode(b);
  } catch (const DecodeError& e) {
    return e;
  }
  throw std::runtime_error("decoded without error");
}

}  // namespace

TEST(Q16, HalfRoundsUp) {
  EXPECT_EQ(to_q16(0.5), 0x8000);
  EXPECT_EQ(to_q16(0.0), 0);
  EXPECT_EQ(to_q16(1.0), 65535);
  EXPECT_EQ(to_q16(-0.2), 0);
  EXPECT_EQ(to_q16(3.0), 65535);
  EXPECT_EQ(to_q16(std::nan("")), 0);
  EXPECT_EQ(to_q16(1.5 / 65535), 2);
  EXPECT_EQ(to_q16(1.4999 / 65535), 1);
}

TEST(Q16, QuantizationBound) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  for (int i = 0; i < 100000; ++i) {
    const double c = u(rng);
    const double clamped = std::clamp(c, 0.0, 1.0);
    ASSERT_LE(std::abs(from_q16(to_q16(c)) - clamped), 1.0 / 65535);
  }
  for (int q = 0; q <= 65535; ++q) ASSERT_EQ(to_q16(from_q16(static_cast<std::uint16_t>(q))), q);
}

TEST(Encode, AimUpdateExample) {
  const Bytes want{0x03, 0x80, 0x00, 0x80, 0x00, 0x01};
  EXPECT_EQ(encode(AimUpdate{to_q16(0.5), to_q16(0.5), kFlagOnScreen}), want);
}

TEST(Encode, ZeroPing) { EXPECT_EQ(encode(Ping{0}), (Bytes{0x06, 0, 0, 0, 0})); }

TEST(Encode, EmptyBatch) { EXPECT_EQ(encode(PointerBatch{}), (Bytes{0x05, 0x00})); }

TEST(Encode, ConfigPushDefaults) {
  EXPECT_EQ(encode(ConfigPush{}),
            (Bytes{0x02, 0x07, 0x80, 0x04, 0x38, 0x05, 255, 0, 255, 0, 255, 255}));
}

TEST(Encode, OversizedBatchThrows) {
  PointerBatch b;
  b.entries.resize(256);
  EXPECT_THROW(encode(b), std::length_error);
  b.entries.resize(255);
  EXPECT_EQ(encode(b).size(), kMaxMessageSize);
}

TEST(Encode, MatchesReferenceAndSizeTable) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20000; ++i) {
    const auto m = random_message(rng);
    const auto bytes = encode(m);
    ASSERT_EQ(bytes, reference_encode(m));
    ASSERT_EQ(bytes.size(), table_size(m));
    ASSERT_EQ(encoded_size(m), table_size(m));
  }
}

TEST(Decode, RoundTripFuzz) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100000; ++i) {
    const auto m = random_message(rng);
    ASSERT_EQ(decode(encode(m)), m);
  }
}

TEST(Decode, BoundaryValues) {
  for (std::uint16_t q : {std::uint16_t{0}, std::uint16_t{65535}}) {
    for (const WireMessage& m :
         {WireMessage{AimUpdate{q, q, 0}}, WireMessage{FireEvent{q, q, 255}},
          WireMessage{ConfigPush{q, q, 255, {255, 255, 255}, {0, 0, 0}}},
          WireMessage{PointerBatch{{{q, q, q, 0}}}}, WireMessage{Ping{q == 0 ? 0u : ~0u}},
          WireMessage{Pong{q == 0 ? 0u : ~0u}}, WireMessage{Hello{Role::Display, 255}}}) {
      EXPECT_EQ(decode(encode(m)), m);
    }
  }
}

TEST(Decode, TruncatedAimUpdate) {
  const auto e = decode_error({0x03, 0x80, 0x00, 0x80});
  EXPECT_EQ(e.kind(), DecodeErrorKind::TruncatedMessage);
  EXPECT_EQ(e.offset(), 4u);
}

TEST(Decode, UnknownTagFF) {
  const auto e = decode_error({0xFF});
  EXPECT_EQ(e.kind(), DecodeErrorKind::UnknownTag);
  EXPECT_EQ(e.tag(), 0xFF);
  EXPECT_EQ(e.offset(), 0u);
  EXPECT_NE(std::string(e.what()).find("0xFF"), std::string::npos) << e.what();
}

TEST(Decode, EmptyInputIsTruncated) {
  const auto e = decode_error({});
  EXPECT_EQ(e.kind(), DecodeErrorKind::TruncatedMessage);
  EXPECT_EQ(e.offset(), 0u);
}

TEST(Decode, EveryUnknownTag) {
  for (int t = 0; t < 256; ++t) {
    if (t >= 1 && t <= 7) continue;
    const auto e = decode_error({static_cast<std::uint8_t>(t), 0, 0, 0, 0, 0});
    ASSERT_EQ(e.kind(), DecodeErrorKind::UnknownTag);
    ASSERT_EQ(e.tag(), t);
  }
}

TEST(Decode, PrefixAndExtensionCorpora) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 3000; ++i) {
    const auto full = encode(random_message(rng));
    for (std::size_t len = 1; len < full.size(); ++len) {
      const auto e = decode_error(Bytes(full.begin(), full.begin() + len));
      ASSERT_EQ(e.kind(), DecodeErrorKind::TruncatedMessage);
      ASSERT_EQ(e.offset(), len);
    }
    Bytes longer = full;
    longer.push_back(static_cast<std::uint8_t>(rng()));
    const auto e = decode_error(longer);
    ASSERT_EQ(e.kind(), DecodeErrorKind::TrailingBytes);
    ASSERT_EQ(e.offset(), full.size());
  }
}

TEST(Decode, BatchCountGovernsLength) {
  // count says 2 entries but only one is present.
  Bytes b = encode(PointerBatch{{{1, 2, 3, 1}}});
  b[1] = 2;
  const auto e = decode_error(b);
  EXPECT_EQ(e.kind(), DecodeErrorKind::TruncatedMessage);
  EXPECT_EQ(e.offset(), b.size());
}

TEST(Decode, TotalOverShortStrings) {
  // Every string of length <= 2 exhaustively, then random ones up to 64 B.
  const auto check = [](const Bytes& b) {
    try {
      const auto m = decode(b);
      ASSERT_EQ(encode(m), b);
    } catch (const DecodeError&) {
    }
  };
  check({});
  for (int a = 0; a < 256; ++a) {
    check({static_cast<std::uint8_t>(a)});
    for (int c = 0; c < 256; ++c) check({static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(c)});
  }
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200000; ++i) {
    Bytes b(rng() % 65);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    if (!b.empty() && rng() % 2) b[0] = static_cast<std::uint8_t>(1 + rng() % 7);
    check(b);
  }
}

TEST(Budget, Arithmetic) {
  EXPECT_DOUBLE_EQ(budget_check(SendMode::Pointer, 30), 1440);
  EXPECT_LE(budget_check(SendMode::Pointer, 30), 2000);
  EXPECT_DOUBLE_EQ(budget_check(SendMode::Fire, 1), 48);
  EXPECT_LE(budget_check(SendMode::Fire, 1), 60);
  EXPECT_NEAR(budget_check(SendMode::Pointer, 41.6), 1996.8, 1e-9);
  EXPECT_NEAR(2000.0 / 48.0, 41.67, 0.01);
}

TEST(TcpFraming, SplitsArbitraryChunks) {
  std::mt19937_64 rng(6);
  std::vector<Bytes> sent;
  Bytes stream;
  for (int i = 0; i < 500; ++i) {
    sent.push_back(encode(random_message(rng)));
    const auto framed = frame_tcp(sent.back());
    ASSERT_EQ(framed.size(), sent.back().size() + 2);
    ASSERT_EQ((framed[0] << 8) | framed[1], static_cast<int>(sent.back().size()));
    stream.insert(stream.end(), framed.begin(), framed.end());
  }
  TcpDeframer d;
  std::vector<Bytes> got;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const std::size_t n = std::min<std::size_t>(1 + rng() % 40, stream.size() - pos);
    d.feed(std::span(stream).subspan(pos, n));
    pos += n;
    while (auto m = d.next()) got.push_back(*m);
  }
  EXPECT_EQ(got, sent);
  EXPECT_EQ(d.buffered(), 0u);
}

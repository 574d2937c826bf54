#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "screenaim/frame.hpp"

namespace screenaim::protocol {

inline constexpr std::uint8_t kVersion = 1;

enum class Tag : std::uint8_t {
  Hello = 0x01,
  ConfigPush = 0x02,
  AimUpdate = 0x03,
  FireEvent = 0x04,
  PointerBatch = 0x05,
  Ping = 0x06,
  Pong = 0x07,
};

// Stored as the raw wire byte; values other than Pointer/Display round-trip
// through the codec and are rejected by the server at handshake.
enum class Role : std::uint8_t { Pointer = 0, Display = 1 };

const char* to_string(Role r);

// SR coordinate in [0,1] <-> round-half-up(c * 65535), clamped.
std::uint16_t to_q16(double c);
double from_q16(std::uint16_t q);

struct Hello {
  Role role = Role::Pointer;
  std::uint8_t version = kVersion;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct ConfigPush {
  std::uint16_t screen_w_px = 1920;
  std::uint16_t screen_h_px = 1080;
  // border fraction * 255
  std::uint8_t border_frac_q8 = 5;
  Rgb color_a = kMagenta;
  Rgb color_b = kCyan;
  friend bool operator==(const ConfigPush&, const ConfigPush&) = default;
};

inline constexpr std::uint8_t kFlagOnScreen = 0x01;

struct AimUpdate {
  std::uint16_t x_q16 = 0;
  std::uint16_t y_q16 = 0;
  std::uint8_t flags = 0;
  friend bool operator==(const AimUpdate&, const AimUpdate&) = default;
};

struct FireEvent {
  std::uint16_t x_q16 = 0;
  std::uint16_t y_q16 = 0;
  std::uint8_t button = 0;
  friend bool operator==(const FireEvent&, const FireEvent&) = default;
};

struct PointerEntry {
  std::uint16_t client_id = 0;
  std::uint16_t x_q16 = 0;
  std::uint16_t y_q16 = 0;
  std::uint8_t flags = kFlagOnScreen;
  friend bool operator==(const PointerEntry&, const PointerEntry&) = default;
};

inline constexpr std::size_t kMaxBatchEntries = 255;

struct PointerBatch {
  std::vector<PointerEntry> entries;
  friend bool operator==(const PointerBatch&, const PointerBatch&) = default;
};

struct Ping {
  std::uint32_t t_ms = 0;
  friend bool operator==(const Ping&, const Ping&) = default;
};

struct Pong {
  std::uint32_t t_ms = 0;
  friend bool operator==(const Pong&, const Pong&) = default;
};

using WireMessage =
    std::variant<Hello, ConfigPush, AimUpdate, FireEvent, PointerBatch, Ping, Pong>;

Tag tag_of(const WireMessage& m);
const char* to_string(Tag t);

// Payload sizes, tag byte included.
inline constexpr std::size_t kHelloSize = 3;
inline constexpr std::size_t kConfigPushSize = 12;
inline constexpr std::size_t kAimUpdateSize = 6;
inline constexpr std::size_t kFireEventSize = 6;
inline constexpr std::size_t kPointerBatchHeader = 2;
inline constexpr std::size_t kPointerEntrySize = 7;
inline constexpr std::size_t kPingSize = 5;
inline constexpr std::size_t kMaxMessageSize =
    kPointerBatchHeader + kPointerEntrySize * kMaxBatchEntries;

std::size_t encoded_size(const WireMessage& m);

// Throws std::length_error for a PointerBatch over 255 entries.
std::vector<std::uint8_t> encode(const WireMessage& m);

enum class DecodeErrorKind { UnknownTag, TruncatedMessage, TrailingBytes };

const char* to_string(DecodeErrorKind k);

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeErrorKind kind, std::size_t offset, std::uint8_t tag = 0);

  DecodeErrorKind kind() const { return kind_; }
  // Offset of the first offending byte (for truncation: where input ran out).
  std::size_t offset() const { return offset_; }
  std::uint8_t tag() const { return tag_; }

 private:
  DecodeErrorKind kind_;
  std::size_t offset_;
  std::uint8_t tag_;
};

// Exact-length decode; throws DecodeError.
WireMessage decode(std::span<const std::uint8_t> bytes);

enum class SendMode { Pointer, Fire };

// Payload bits per second for a stream of AimUpdate (pointer) or FireEvent
// (fire) messages at `rate_hz`.
double budget_check(SendMode mode, double rate_hz);

// Transport framing for raw TCP: 2-byte big-endian length prefix.
std::vector<std::uint8_t> frame_tcp(std::span<const std::uint8_t> payload);

// Incremental splitter for length-prefixed TCP streams.
class TcpDeframer {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  // Next complete payload, if one is buffered.
  std::optional<std::vector<std::uint8_t>> next();
  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

}  // namespace screenaim::protocol

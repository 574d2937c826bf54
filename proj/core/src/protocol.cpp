#include "screenaim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <type_traits>

namespace screenaim::protocol {

const char* to_string(Role r) {
  switch (r) {
    case Role::Pointer:
      return "pointer";
    case Role::Display:
      return "display";
  }
  return "unknown";
}

std::uint16_t to_q16(double c) {
  if (!(c > 0)) return 0;  // also maps NaN to 0
  if (c >= 1) return 65535;
  return static_cast<std::uint16_t>(std::floor(c * 65535.0 + 0.5));
}

double from_q16(std::uint16_t q) { return q / 65535.0; }

Tag tag_of(const WireMessage& m) {
  return std::visit(
      [](const auto& v) -> Tag {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Hello>) return Tag::Hello;
        if constexpr (std::is_same_v<T, ConfigPush>) return Tag::ConfigPush;
        if constexpr (std::is_same_v<T, AimUpdate>) return Tag::AimUpdate;
        if constexpr (std::is_same_v<T, FireEvent>) return Tag::FireEvent;
        if constexpr (std::is_same_v<T, PointerBatch>) return Tag::PointerBatch;
        if constexpr (std::is_same_v<T, Ping>) return Tag::Ping;
        if constexpr (std::is_same_v<T, Pong>) return Tag::Pong;
      },
      m);
}

const char* to_string(Tag t) {
  switch (t) {
    case Tag::Hello:
      return "Hello";
    case Tag::ConfigPush:
      return "ConfigPush";
    case Tag::AimUpdate:
      return "AimUpdate";
    case Tag::FireEvent:
      return "FireEvent";
    case Tag::PointerBatch:
      return "PointerBatch";
    case Tag::Ping:
      return "Ping";
    case Tag::Pong:
      return "Pong";
  }
  return "?";
}

const char* to_string(DecodeErrorKind k) {
  switch (k) {
    case DecodeErrorKind::UnknownTag:
      return "UnknownTag";
    case DecodeErrorKind::TruncatedMessage:
      return "TruncatedMessage";
    case DecodeErrorKind::TrailingBytes:
      return "TrailingBytes";
  }
  return "?";
}

namespace {

std::string describe(DecodeErrorKind kind, std::size_t offset, std::uint8_t tag) {
  std::string s = to_string(kind);
  if (kind == DecodeErrorKind::UnknownTag) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%02X", tag);
    s += "(" + std::string(buf) + ")";
  }
  return s + " at offset " + std::to_string(offset);
}

class Writer {
 public:
  explicit Writer(std::size_t n) { out_.reserve(n); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v >> 16));
    u16(static_cast<std::uint16_t>(v));
  }
  void rgb(Rgb c) {
    u8(c.r);
    u8(c.g);
    u8(c.b);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>((b_[pos_] << 8) | b_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    const std::uint32_t hi = u16();
    return (hi << 16) | u16();
  }
  Rgb rgb() {
    need(3);
    Rgb c{b_[pos_], b_[pos_ + 1], b_[pos_ + 2]};
    pos_ += 3;
    return c;
  }
  // Fails before reading any field when the whole message cannot fit.
  void need_total(std::size_t total) {
    if (b_.size() < total) throw DecodeError(DecodeErrorKind::TruncatedMessage, b_.size());
  }
  void finish() const {
    if (pos_ != b_.size()) throw DecodeError(DecodeErrorKind::TrailingBytes, pos_);
  }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw DecodeError(DecodeErrorKind::TruncatedMessage, b_.size());
  }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

DecodeError::DecodeError(DecodeErrorKind kind, std::size_t offset, std::uint8_t tag)
    : std::runtime_error(describe(kind, offset, tag)), kind_(kind), offset_(offset), tag_(tag) {}

std::size_t encoded_size(const WireMessage& m) {
  switch (tag_of(m)) {
    case Tag::Hello:
      return kHelloSize;
    case Tag::ConfigPush:
      return kConfigPushSize;
    case Tag::AimUpdate:
      return kAimUpdateSize;
    case Tag::FireEvent:
      return kFireEventSize;
    case Tag::PointerBatch:
      return kPointerBatchHeader +
             kPointerEntrySize * std::get<PointerBatch>(m).entries.size();
    case Tag::Ping:
    case Tag::Pong:
      return kPingSize;
  }
  return 0;
}

std::vector<std::uint8_t> encode(const WireMessage& m) {
  Writer w(encoded_size(m));
  w.u8(static_cast<std::uint8_t>(tag_of(m)));
  std::visit(
      [&w](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Hello>) {
          w.u8(static_cast<std::uint8_t>(v.role));
          w.u8(v.version);
        } else if constexpr (std::is_same_v<T, ConfigPush>) {
          w.u16(v.screen_w_px);
          w.u16(v.screen_h_px);
          w.u8(v.border_frac_q8);
          w.rgb(v.color_a);
          w.rgb(v.color_b);
        } else if constexpr (std::is_same_v<T, AimUpdate>) {
          w.u16(v.x_q16);
          w.u16(v.y_q16);
          w.u8(v.flags);
        } else if constexpr (std::is_same_v<T, FireEvent>) {
          w.u16(v.x_q16);
          w.u16(v.y_q16);
          w.u8(v.button);
        } else if constexpr (std::is_same_v<T, PointerBatch>) {
          if (v.entries.size() > kMaxBatchEntries) {
            throw std::length_error("PointerBatch holds at most 255 entries");
          }
          w.u8(static_cast<std::uint8_t>(v.entries.size()));
          for (const auto& e : v.entries) {
            w.u16(e.client_id);
            w.u16(e.x_q16);
            w.u16(e.y_q16);
            w.u8(e.flags);
          }
        } else {
          w.u32(v.t_ms);
        }
      },
      m);
  return w.take();
}

WireMessage decode(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw DecodeError(DecodeErrorKind::TruncatedMessage, 0);
  Reader r(bytes);
  const std::uint8_t tag = r.u8();
  WireMessage out;
  switch (static_cast<Tag>(tag)) {
    case Tag::Hello: {
      Hello h;
      h.role = static_cast<Role>(r.u8());
      h.version = r.u8();
      out = h;
      break;
    }
    case Tag::ConfigPush: {
      ConfigPush c;
      c.screen_w_px = r.u16();
      c.screen_h_px = r.u16();
      c.border_frac_q8 = r.u8();
      c.color_a = r.rgb();
      c.color_b = r.rgb();
      out = c;
      break;
    }
    case Tag::AimUpdate: {
      AimUpdate a;
      a.x_q16 = r.u16();
      a.y_q16 = r.u16();
      a.flags = r.u8();
      out = a;
      break;
    }
    case Tag::FireEvent: {
      FireEvent f;
      f.x_q16 = r.u16();
      f.y_q16 = r.u16();
      f.button = r.u8();
      out = f;
      break;
    }
    case Tag::PointerBatch: {
      const std::uint8_t count = r.u8();
      r.need_total(kPointerBatchHeader + kPointerEntrySize * count);
      PointerBatch b;
      b.entries.resize(count);
      for (auto& e : b.entries) {
        e.client_id = r.u16();
        e.x_q16 = r.u16();
        e.y_q16 = r.u16();
        e.flags = r.u8();
      }
      out = std::move(b);
      break;
    }
    case Tag::Ping:
      out = Ping{r.u32()};
      break;
    case Tag::Pong:
      out = Pong{r.u32()};
      break;
    default:
      throw DecodeError(DecodeErrorKind::UnknownTag, 0, tag);
  }
  r.finish();
  return out;
}

double budget_check(SendMode mode, double rate_hz) {
  if (!(rate_hz > 0)) throw std::invalid_argument("rate_hz must be positive");
  const std::size_t size = mode == SendMode::Pointer ? kAimUpdateSize : kFireEventSize;
  return static_cast<double>(size) * 8.0 * rate_hz;
}

std::vector<std::uint8_t> frame_tcp(std::span<const std::uint8_t> payload) {
  if (payload.size() > 0xFFFF) throw std::length_error("payload exceeds 65535 bytes");
  std::vector<std::uint8_t> out;
  out.reserve(payload.size() + 2);
  out.push_back(static_cast<std::uint8_t>(payload.size() >> 8));
  out.push_back(static_cast<std::uint8_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

void TcpDeframer::feed(std::span<const std::uint8_t> bytes) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<std::vector<std::uint8_t>> TcpDeframer::next() {
  if (buffered() < 2) return std::nullopt;
  const std::size_t len = (std::size_t{buf_[pos_]} << 8) | buf_[pos_ + 1];
  if (buffered() < 2 + len) return std::nullopt;
  std::vector<std::uint8_t> out(buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + 2),
                                buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + 2 + len));
  pos_ += 2 + len;
  if (pos_ > 4096 && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  return out;
}

}  // namespace screenaim::protocol

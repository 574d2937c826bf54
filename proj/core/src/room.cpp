#include "screenaim/room.hpp"

#include <cstdio>
#include <sstream>

#include <spdlog/spdlog.h>

namespace screenaim::server {

using namespace screenaim::protocol;

void RoomConfig::validate() const {
  if (broadcast_hz < 1 || broadcast_hz > 240) {
    throw std::invalid_argument("broadcast_hz must be in [1, 240]");
  }
  if (max_clients < 1 || max_clients > 65535) {
    throw std::invalid_argument("max_clients must be in [1, 65535]");
  }
}

const char* to_string(HandshakeErrorKind k) {
  switch (k) {
    case HandshakeErrorKind::HandshakeTimeout:
      return "HandshakeTimeout";
    case HandshakeErrorKind::VersionMismatch:
      return "VersionMismatch";
    case HandshakeErrorKind::RoomFull:
      return "RoomFull";
    case HandshakeErrorKind::RoleViolation:
      return "RoleViolation";
  }
  return "?";
}

namespace {

Bytes make_bytes(const WireMessage& m) {
  return std::make_shared<const std::vector<std::uint8_t>>(encode(m));
}

}  // namespace

Room::Room(RoomConfig cfg, std::int64_t created_ms)
    : cfg_(std::move(cfg)), created_ms_(created_ms) {
  cfg_.validate();
  config_message_ = make_bytes(cfg_.config);
}

std::uint16_t Room::allocate_id_locked() {
  if (!released_.empty()) {
    const std::uint16_t id = *released_.begin();
    released_.erase(released_.begin());
    return id;
  }
  return static_cast<std::uint16_t>(next_id_++);
}

void Room::release_id_locked(std::uint16_t id) {
  released_.insert(id);
  // Shrink the high-water mark so the free set stays small after churn.
  while (next_id_ > 0 && released_.count(static_cast<std::uint16_t>(next_id_ - 1)) != 0) {
    released_.erase(static_cast<std::uint16_t>(next_id_ - 1));
    --next_id_;
  }
}

std::uint16_t Room::join(const Hello& hello, std::shared_ptr<ClientSink> sink,
                         std::int64_t now_ms) {
  if (hello.version != kVersion) {
    throw HandshakeError(HandshakeErrorKind::VersionMismatch,
                         "VersionMismatch: client speaks version " +
                             std::to_string(hello.version));
  }
  if (hello.role != Role::Pointer && hello.role != Role::Display) {
    throw HandshakeError(HandshakeErrorKind::RoleViolation,
                         "RoleViolation: unknown role " +
                             std::to_string(static_cast<int>(hello.role)));
  }
  std::lock_guard lock(mu_);
  if (clients_.size() >= cfg_.max_clients) {
    throw HandshakeError(HandshakeErrorKind::RoomFull, "RoomFull");
  }
  const std::uint16_t id = allocate_id_locked();
  auto [it, inserted] = clients_.emplace(
      id, ClientState{id, hello.role, std::nullopt, 0,
                      BandwidthCounter(now_ms, cfg_.bandwidth_window_ms), now_ms,
                      std::move(sink)});
  ++connections_total_;
  it->second.bandwidth.record_in(kHelloSize, now_ms);
  send_locked(it->second, config_message_, now_ms);
  return id;
}

void Room::leave(std::uint16_t id, const ClientSink* sink) {
  std::lock_guard lock(mu_);
  auto it = clients_.find(id);
  if (it == clients_.end() || it->second.sink.get() != sink) return;
  clients_.erase(it);
  release_id_locked(id);
}

void Room::send_locked(ClientState& c, const Bytes& msg, std::int64_t now_ms) {
  c.bandwidth.record_out(msg->size(), now_ms);
  if (!c.sink->send(msg)) {
    ++slow_consumer_drops_;
    close_locked(c.id, "slow consumer: send queue full");
  }
}

void Room::close_locked(std::uint16_t id, std::string_view reason) {
  auto it = clients_.find(id);
  if (it == clients_.end()) return;
  auto sink = std::move(it->second.sink);
  clients_.erase(it);
  release_id_locked(id);
  spdlog::warn("closing client {}: {}", id, reason);
  sink->close(reason);
}

bool Room::ingest(std::uint16_t id, std::span<const std::uint8_t> payload, std::int64_t now_ms) {
  std::lock_guard lock(mu_);
  auto it = clients_.find(id);
  if (it == clients_.end()) return false;
  ClientState& c = it->second;
  c.bandwidth.record_in(payload.size(), now_ms);

  WireMessage msg;
  try {
    msg = decode(payload);
  } catch (const DecodeError& e) {
    ++protocol_errors_;
    close_locked(id, e.what());
    return false;
  }

  const auto violation = [&](const char* what) {
    ++protocol_errors_;
    close_locked(id, std::string("RoleViolation: ") + to_string(c.role) + " sent " + what);
    return false;
  };

  if (auto* aim = std::get_if<AimUpdate>(&msg)) {
    if (c.role != Role::Pointer) return violation("AimUpdate");
    c.last_aim = *aim;
    return true;
  }
  if (std::holds_alternative<FireEvent>(msg)) {
    if (c.role != Role::Pointer) return violation("FireEvent");
    ++c.fire_count;
    // Fires are relayed immediately and never coalesced.
    const Bytes relay = std::make_shared<const std::vector<std::uint8_t>>(
        payload.begin(), payload.end());
    std::vector<std::uint16_t> displays;
    for (const auto& [cid, other] : clients_) {
      if (other.role == Role::Display) displays.push_back(cid);
    }
    for (const auto cid : displays) {
      auto d = clients_.find(cid);
      if (d != clients_.end()) send_locked(d->second, relay, now_ms);
    }
    return clients_.count(id) != 0;
  }
  if (auto* ping = std::get_if<Ping>(&msg)) {
    send_locked(c, make_bytes(Pong{ping->t_ms}), now_ms);
    return clients_.count(id) != 0;
  }
  return violation(to_string(tag_of(msg)));
}

std::size_t Room::broadcast_tick(std::int64_t now_ms) {
  std::lock_guard lock(mu_);
  std::vector<PointerEntry> entries;
  std::vector<std::uint16_t> displays;
  for (const auto& [id, c] : clients_) {
    if (c.role == Role::Display) {
      displays.push_back(id);
    } else if (c.last_aim && (c.last_aim->flags & kFlagOnScreen) != 0) {
      entries.push_back({id, c.last_aim->x_q16, c.last_aim->y_q16, kFlagOnScreen});
    }
  }
  if (entries.empty() || displays.empty()) return 0;

  std::vector<Bytes> batches;
  for (std::size_t i = 0; i < entries.size(); i += kMaxBatchEntries) {
    const std::size_t end = std::min(entries.size(), i + kMaxBatchEntries);
    PointerBatch batch;
    batch.entries.assign(entries.begin() + static_cast<std::ptrdiff_t>(i),
                         entries.begin() + static_cast<std::ptrdiff_t>(end));
    batches.push_back(make_bytes(batch));
  }
  for (const auto id : displays) {
    for (const auto& b : batches) {
      auto d = clients_.find(id);
      if (d == clients_.end()) break;
      send_locked(d->second, b, now_ms);
    }
  }
  return batches.size();
}

ClientSnapshot Room::snapshot_locked(const ClientState& c, std::int64_t now_ms) const {
  ClientSnapshot s;
  s.id = c.id;
  s.role = c.role;
  s.last_aim = c.last_aim;
  s.fire_count = c.fire_count;
  s.bytes_in = c.bandwidth.bytes_in();
  s.bytes_out = c.bandwidth.bytes_out();
  s.bps_in = c.bandwidth.bps_in(now_ms);
  s.bps_out = c.bandwidth.bps_out(now_ms);
  s.connected_at_ms = c.connected_at_ms;
  return s;
}

MetricsReport Room::metrics_snapshot(std::int64_t now_ms) const {
  std::lock_guard lock(mu_);
  MetricsReport r;
  r.uptime_s = static_cast<double>(now_ms - created_ms_) / 1000.0;
  r.connections_total = connections_total_;
  r.protocol_errors = protocol_errors_;
  r.slow_consumer_drops = slow_consumer_drops_;
  for (const auto& [id, c] : clients_) {
    ClientSnapshot s = snapshot_locked(c, now_ms);
    ++r.client_count;
    if (c.role == Role::Display) {
      ++r.display_count;
    } else {
      ++r.pointer_count;
    }
    r.bytes_in += s.bytes_in;
    r.bytes_out += s.bytes_out;
    r.bps_in += s.bps_in;
    r.bps_out += s.bps_out;
    r.fire_count += s.fire_count;
    r.clients.push_back(std::move(s));
  }
  return r;
}

std::optional<ClientSnapshot> Room::client(std::uint16_t id) const {
  std::lock_guard lock(mu_);
  auto it = clients_.find(id);
  if (it == clients_.end()) return std::nullopt;
  // Rates are not meaningful without a clock here; use connect time.
  return snapshot_locked(it->second, it->second.connected_at_ms);
}

std::size_t Room::client_count() const {
  std::lock_guard lock(mu_);
  return clients_.size();
}

std::string MetricsReport::to_text() const {
  std::ostringstream out;
  char buf[64];
  const auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };
  out << "clients " << client_count << '\n';
  out << "pointers " << pointer_count << '\n';
  out << "displays " << display_count << '\n';
  out << "uptime_s " << num(uptime_s) << '\n';
  out << "bytes_in " << bytes_in << '\n';
  out << "bytes_out " << bytes_out << '\n';
  out << "bps_in " << num(bps_in) << '\n';
  out << "bps_out " << num(bps_out) << '\n';
  out << "fires " << fire_count << '\n';
  out << "connections_total " << connections_total << '\n';
  out << "protocol_errors " << protocol_errors << '\n';
  out << "slow_consumer_drops " << slow_consumer_drops << '\n';
  for (const auto& c : clients) {
    const std::string p = "client." + std::to_string(c.id) + ".";
    out << p << "role " << to_string(c.role) << '\n';
    out << p << "bytes_in " << c.bytes_in << '\n';
    out << p << "bytes_out " << c.bytes_out << '\n';
    out << p << "bps_in " << num(c.bps_in) << '\n';
    out << p << "bps_out " << num(c.bps_out) << '\n';
    out << p << "fires " << c.fire_count << '\n';
    out << p << "last_aim ";
    if (c.last_aim) {
      std::snprintf(buf, sizeof buf, "%.6f %.6f %d", from_q16(c.last_aim->x_q16),
                    from_q16(c.last_aim->y_q16), (c.last_aim->flags & kFlagOnScreen) ? 1 : 0);
      out << buf << '\n';
    } else {
      out << "none\n";
    }
  }
  return out.str();
}

}  // namespace screenaim::server

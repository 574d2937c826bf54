#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "screenaim/bandwidth.hpp"
#include "screenaim/protocol.hpp"

namespace screenaim::server {

using Bytes = std::shared_ptr<const std::vector<std::uint8_t>>;

// Outbound half of a client connection, implemented by each transport.
// Both calls are made with the room locked: they must return without
// waiting on network I/O and must not call back into the Room.
class ClientSink {
 public:
  virtual ~ClientSink() = default;
  // Queue one message payload. Returns false when the send queue is full.
  virtual bool send(Bytes message) = 0;
  virtual void close(std::string_view reason) = 0;
};

struct RoomConfig {
  protocol::ConfigPush config;
  int broadcast_hz = 60;
  std::size_t max_clients = 65535;
  std::int64_t bandwidth_window_ms = 10'000;

  void validate() const;
};

enum class HandshakeErrorKind { HandshakeTimeout, VersionMismatch, RoomFull, RoleViolation };

const char* to_string(HandshakeErrorKind k);

class HandshakeError : public std::runtime_error {
 public:
  HandshakeError(HandshakeErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  HandshakeErrorKind kind() const { return kind_; }

 private:
  HandshakeErrorKind kind_;
};

struct ClientSnapshot {
  std::uint16_t id = 0;
  protocol::Role role = protocol::Role::Pointer;
  // Newest AimUpdate exactly as received.
  std::optional<protocol::AimUpdate> last_aim;
  std::uint64_t fire_count = 0;
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;
  double bps_in = 0;
  double bps_out = 0;
  std::int64_t connected_at_ms = 0;
};

struct MetricsReport {
  std::size_t client_count = 0;
  std::size_t pointer_count = 0;
  std::size_t display_count = 0;
  double uptime_s = 0;
  // Aggregates over live clients.
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;
  double bps_in = 0;
  double bps_out = 0;
  std::uint64_t fire_count = 0;
  // Lifetime counters.
  std::uint64_t connections_total = 0;
  std::uint64_t protocol_errors = 0;
  std::uint64_t slow_consumer_drops = 0;
  std::vector<ClientSnapshot> clients;

  // Line-oriented `key value` text.
  std::string to_text() const;
};

// Single-room pointer service state. All public members are thread-safe;
// mutations are serialized by one mutex and never block on network I/O.
class Room {
 public:
  explicit Room(RoomConfig cfg, std::int64_t created_ms = 0);

  // Registers the client, replies with ConfigPush and returns the lowest
  // free id. Throws HandshakeError.
  std::uint16_t join(const protocol::Hello& hello, std::shared_ptr<ClientSink> sink,
                     std::int64_t now_ms);
  // Transport-initiated removal. Ignored unless `id` is still registered to
  // `sink`, since the room may already have closed it and reused the id.
  void leave(std::uint16_t id, const ClientSink* sink);

  // Handles one inbound payload. Returns false when the client was closed
  // (decode error or role violation); the sink has been told why.
  bool ingest(std::uint16_t id, std::span<const std::uint8_t> payload, std::int64_t now_ms);

  // Sends the current on-screen pointer positions to every display, in
  // chunks of at most 255. Returns the number of batches built.
  std::size_t broadcast_tick(std::int64_t now_ms);

  MetricsReport metrics_snapshot(std::int64_t now_ms) const;
  std::optional<ClientSnapshot> client(std::uint16_t id) const;
  std::size_t client_count() const;
  const RoomConfig& config() const { return cfg_; }

 private:
  struct ClientState {
    std::uint16_t id;
    protocol::Role role;
    std::optional<protocol::AimUpdate> last_aim;
    std::uint64_t fire_count = 0;
    BandwidthCounter bandwidth;
    std::int64_t connected_at_ms;
    std::shared_ptr<ClientSink> sink;
  };

  std::uint16_t allocate_id_locked();
  void release_id_locked(std::uint16_t id);
  void close_locked(std::uint16_t id, std::string_view reason);
  void send_locked(ClientState& c, const Bytes& msg, std::int64_t now_ms);
  ClientSnapshot snapshot_locked(const ClientState& c, std::int64_t now_ms) const;

  const RoomConfig cfg_;
  const std::int64_t created_ms_;
  mutable std::mutex mu_;
  std::map<std::uint16_t, ClientState> clients_;
  // Ids below next_id_ that are free again.
  std::set<std::uint16_t> released_;
  std::uint32_t next_id_ = 0;
  std::uint64_t connections_total_ = 0;
  std::uint64_t protocol_errors_ = 0;
  std::uint64_t slow_consumer_drops_ = 0;
  Bytes config_message_;
};

}  // namespace screenaim::server

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "screenaim/room.hpp"

namespace screenaim::server {

struct ServerOptions {
  RoomConfig room;
  std::string bind_address = "0.0.0.0";
  // 0 picks an ephemeral port; see Server::tcp_port()/http_port().
  std::uint16_t tcp_port = 7070;
  std::uint16_t http_port = 8080;
  // Static files for /controller and /display.
  std::filesystem::path web_root = "web";
  std::chrono::milliseconds handshake_timeout{5000};
  std::size_t send_queue_depth = 64;
  int io_threads = 1;
  // Client pointer-mode send rate advertised to tooling.
  double pointer_hz = 30.0;

  // Keys: screen_w, screen_h, border_frac, color_a, color_b, broadcast_hz,
  // pointer_hz, send_queue_depth, handshake_timeout_ms, max_clients,
  // web_root, io_threads. Unknown keys throw ConfigError naming the key.
  static ServerOptions load(const std::filesystem::path& path);
  // Applies config keys onto an existing set of options.
  void apply_file(const std::filesystem::path& path);
};

// TCP (2-byte length prefix) and HTTP/WebSocket front end for a Room.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds both listeners. Throws std::system_error on bind failure.
  void start();
  // Runs the I/O loop on io_threads threads; returns after stop().
  void run();
  // Starts run() on background threads.
  void run_in_background();
  // Safe to call from any thread, including signal handlers via asio.
  void stop();

  std::uint16_t tcp_port() const;
  std::uint16_t http_port() const;

  Room& room();
  // Milliseconds since the server was constructed.
  std::int64_t now_ms() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace screenaim::server

#include "screenaim/server.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "screenaim/kv_config.hpp"

namespace screenaim::server {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using asio::awaitable;
using asio::use_awaitable;

// ---------------------------------------------------------------------------
// Options

void ServerOptions::apply_file(const std::filesystem::path& path) {
  const KvFile file = KvFile::load(path);
  for (const auto& e : file.entries()) {
    const std::string& k = e.key;
    if (k == "screen_w" || k == "screen_h") {
      const auto v = parse_int(e, file);
      if (v < 1 || v > 65535) file.fail(e, "must be in [1, 65535]");
      (k == "screen_w" ? room.config.screen_w_px : room.config.screen_h_px) =
          static_cast<std::uint16_t>(v);
    } else if (k == "border_frac") {
      const double v = parse_double(e, file);
      if (!(v > 0 && v < 0.5)) file.fail(e, "must be in (0, 0.5)");
      room.config.border_frac_q8 = static_cast<std::uint8_t>(std::lround(v * 255.0));
    } else if (k == "color_a") {
      room.config.color_a = parse_rgb(e, file);
    } else if (k == "color_b") {
      room.config.color_b = parse_rgb(e, file);
    } else if (k == "broadcast_hz") {
      const auto v = parse_int(e, file);
      if (v < 1 || v > 240) file.fail(e, "must be in [1, 240]");
      room.broadcast_hz = static_cast<int>(v);
    } else if (k == "pointer_hz") {
      const double v = parse_double(e, file);
      if (!(v > 0)) file.fail(e, "must be positive");
      pointer_hz = v;
    } else if (k == "send_queue_depth") {
      const auto v = parse_int(e, file);
      if (v < 1) file.fail(e, "must be >= 1");
      send_queue_depth = static_cast<std::size_t>(v);
    } else if (k == "handshake_timeout_ms") {
      const auto v = parse_int(e, file);
      if (v < 1) file.fail(e, "must be >= 1");
      handshake_timeout = std::chrono::milliseconds(v);
    } else if (k == "max_clients") {
      const auto v = parse_int(e, file);
      if (v < 1 || v > 65535) file.fail(e, "must be in [1, 65535]");
      room.max_clients = static_cast<std::size_t>(v);
    } else if (k == "web_root") {
      web_root = e.value;
      if (web_root.is_relative()) web_root = path.parent_path() / web_root;
    } else if (k == "io_threads") {
      const auto v = parse_int(e, file);
      if (v < 1 || v > 64) file.fail(e, "must be in [1, 64]");
      io_threads = static_cast<int>(v);
    } else {
      file.fail(e, "unknown key");
    }
  }
}

ServerOptions ServerOptions::load(const std::filesystem::path& path) {
  ServerOptions o;
  o.apply_file(path);
  return o;
}

// ---------------------------------------------------------------------------
// Sessions

struct Server::Impl {
  explicit Impl(ServerOptions o)
      : opts(std::move(o)),
        epoch(std::chrono::steady_clock::now()),
        tcp_acceptor(ioc),
        http_acceptor(ioc),
        room(opts.room, 0) {}

  std::int64_t now_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - epoch)
        .count();
  }

  awaitable<void> tcp_accept_loop();
  awaitable<void> http_accept_loop();
  awaitable<void> http_session(beast::tcp_stream stream);
  awaitable<void> ticker();
  http::response<http::string_body> handle_http(const http::request<http::string_body>& req);

  ServerOptions opts;
  std::chrono::steady_clock::time_point epoch;
  // The io_context must outlive the room: the room holds sessions, and
  // sessions own sockets bound to the io_context.
  asio::io_context ioc;
  tcp::acceptor tcp_acceptor;
  tcp::acceptor http_acceptor;
  Room room;
  std::vector<std::thread> threads;
  std::atomic<bool> stopping{false};
};

namespace {

template <typename T>
void log_exception(std::exception_ptr ep, const char* what) {
  if (!ep) return;
  try {
    std::rethrow_exception(ep);
  } catch (const boost::system::system_error& e) {
    if (e.code() != asio::error::operation_aborted && e.code() != asio::error::eof &&
        e.code() != websocket::error::closed) {
      spdlog::debug("{}: {}", what, e.what());
    }
  } catch (const std::exception& e) {
    spdlog::warn("{}: {}", what, e.what());
  }
}

// Shared connection logic: handshake, ingest and the bounded send queue.
// Derived classes supply the transport-specific read/write coroutines.
class Session : public ClientSink, public std::enable_shared_from_this<Session> {
 public:
  Session(Server::Impl& srv, asio::any_io_executor ex)
      : srv_(srv), ex_(ex), wake_(ex), handshake_timer_(ex) {}

  bool send(Bytes message) override {
    if (closed_.load()) return false;
    if (pending_.fetch_add(1) >= srv_.opts.send_queue_depth) {
      pending_.fetch_sub(1);
      return false;
    }
    asio::post(ex_, [self = shared_from_this(), message = std::move(message)]() mutable {
      self->queue_.push_back(std::move(message));
      self->wake_.cancel_one();
    });
    return true;
  }

  void close(std::string_view reason) override {
    closed_ = true;
    spdlog::debug("session closed: {}", reason);
    asio::post(ex_, [self = shared_from_this()] { self->shutdown(); });
  }

 protected:
  // Runs on the session executor.
  void start_common() {
    auto self = shared_from_this();
    handshake_timer_.expires_after(srv_.opts.handshake_timeout);
    handshake_timer_.async_wait([self](boost::system::error_code ec) {
      if (ec || self->id_ || self->closed_) return;
      spdlog::warn("{}: no Hello within {} ms", to_string(HandshakeErrorKind::HandshakeTimeout),
                   self->srv_.opts.handshake_timeout.count());
      self->closed_ = true;
      self->shutdown();
    });
  }

  // Returns false when the connection must be dropped.
  bool on_message(std::span<const std::uint8_t> bytes) {
    if (closed_) return false;
    const auto now = srv_.now_ms();
    if (id_) return srv_.room.ingest(*id_, bytes, now);

    protocol::WireMessage msg;
    try {
      msg = protocol::decode(bytes);
    } catch (const protocol::DecodeError& e) {
      spdlog::warn("handshake decode error: {}", e.what());
      return false;
    }
    const auto* hello = std::get_if<protocol::Hello>(&msg);
    if (!hello) {
      spdlog::warn("handshake: expected Hello, got {}", to_string(protocol::tag_of(msg)));
      return false;
    }
    try {
      id_ = srv_.room.join(*hello, shared_from_this(), now);
    } catch (const HandshakeError& e) {
      spdlog::warn("handshake rejected: {}", e.what());
      return false;
    }
    handshake_timer_.cancel();
    return true;
  }

  void finish() {
    closed_ = true;
    if (id_) srv_.room.leave(*id_, this);
    shutdown();
  }

  // Waits until a message is queued or the session closes. Returns the
  // queued messages (possibly empty when closing).
  awaitable<std::deque<Bytes>> next_batch() {
    while (queue_.empty() && !closed_) {
      wake_.expires_at(asio::steady_timer::time_point::max());
      boost::system::error_code ec;
      co_await wake_.async_wait(asio::redirect_error(use_awaitable, ec));
    }
    std::deque<Bytes> out;
    out.swap(queue_);
    co_return out;
  }

  void written(std::size_t n) { pending_.fetch_sub(n); }

  virtual void shutdown_transport() = 0;

  void shutdown() {
    wake_.cancel();
    handshake_timer_.cancel();
    shutdown_transport();
  }

  Server::Impl& srv_;
  asio::any_io_executor ex_;
  asio::steady_timer wake_;
  asio::steady_timer handshake_timer_;
  std::deque<Bytes> queue_;
  std::atomic<std::size_t> pending_{0};
  std::atomic<bool> closed_{false};
  std::optional<std::uint16_t> id_;
};

class TcpSession final : public Session {
 public:
  TcpSession(Server::Impl& srv, tcp::socket socket)
      : Session(srv, socket.get_executor()), socket_(std::move(socket)) {}

  void start() {
    auto self = std::static_pointer_cast<TcpSession>(shared_from_this());
    asio::dispatch(ex_, [self] {
      self->start_common();
      asio::co_spawn(self->ex_, self->reader(), [self](std::exception_ptr ep) {
        log_exception<void>(ep, "tcp read");
        self->finish();
      });
      asio::co_spawn(self->ex_, self->writer(), [self](std::exception_ptr ep) {
        log_exception<void>(ep, "tcp write");
        self->finish();
      });
    });
  }

 private:
  awaitable<void> reader() {
    std::array<std::uint8_t, 2> header{};
    std::vector<std::uint8_t> body;
    while (!closed_) {
      co_await asio::async_read(socket_, asio::buffer(header), use_awaitable);
      const std::size_t len = (std::size_t{header[0]} << 8) | header[1];
      if (len == 0 || len > protocol::kMaxMessageSize) {
        spdlog::warn("tcp framing error: length {}", len);
        co_return;
      }
      body.resize(len);
      co_await asio::async_read(socket_, asio::buffer(body), use_awaitable);
      if (!on_message(body)) co_return;
    }
  }

  awaitable<void> writer() {
    std::vector<std::uint8_t> out;
    while (!closed_) {
      auto batch = co_await next_batch();
      if (batch.empty()) continue;
      out.clear();
      for (const auto& m : batch) {
        out.push_back(static_cast<std::uint8_t>(m->size() >> 8));
        out.push_back(static_cast<std::uint8_t>(m->size()));
        out.insert(out.end(), m->begin(), m->end());
      }
      co_await asio::async_write(socket_, asio::buffer(out), use_awaitable);
      written(batch.size());
    }
  }

  void shutdown_transport() override {
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
  }

  tcp::socket socket_;
};

class WsSession final : public Session {
 public:
  WsSession(Server::Impl& srv, tcp::socket socket)
      : Session(srv, socket.get_executor()), ws_(std::move(socket)) {}

  void start(http::request<http::string_body> req) {
    auto self = std::static_pointer_cast<WsSession>(shared_from_this());
    asio::dispatch(ex_, [self, req = std::move(req)]() mutable {
      asio::co_spawn(self->ex_, self->run(std::move(req)), [self](std::exception_ptr ep) {
        log_exception<void>(ep, "websocket");
        self->finish();
      });
    });
  }

 private:
  awaitable<void> run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(4096);
    co_await ws_.async_accept(req, use_awaitable);
    ws_.binary(true);
    start_common();
    auto self = std::static_pointer_cast<WsSession>(shared_from_this());
    asio::co_spawn(ex_, writer(), [self](std::exception_ptr ep) {
      log_exception<void>(ep, "websocket write");
      self->finish();
    });
    beast::flat_buffer buffer;
    while (!closed_) {
      co_await ws_.async_read(buffer, use_awaitable);
      const auto data = buffer.cdata();
      std::span<const std::uint8_t> bytes(static_cast<const std::uint8_t*>(data.data()),
                                          data.size());
      const bool keep = ws_.got_binary() ? on_message(bytes) : false;
      buffer.consume(buffer.size());
      if (!keep) co_return;
    }
  }

  awaitable<void> writer() {
    while (!closed_) {
      auto batch = co_await next_batch();
      for (const auto& m : batch) {
        co_await ws_.async_write(asio::buffer(*m), use_awaitable);
        written(1);
      }
    }
  }

  void shutdown_transport() override {
    boost::system::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).close();
  }

  websocket::stream<beast::tcp_stream> ws_;
};

std::string mime_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

}  // namespace

// ---------------------------------------------------------------------------
// Accept loops and HTTP

awaitable<void> Server::Impl::tcp_accept_loop() {
  while (!stopping) {
    tcp::socket socket = co_await tcp_acceptor.async_accept(asio::make_strand(ioc), use_awaitable);
    boost::system::error_code ec;
    socket.set_option(tcp::no_delay(true), ec);
    std::make_shared<TcpSession>(*this, std::move(socket))->start();
  }
}

awaitable<void> Server::Impl::http_accept_loop() {
  while (!stopping) {
    tcp::socket socket =
        co_await http_acceptor.async_accept(asio::make_strand(ioc), use_awaitable);
    auto ex = socket.get_executor();
    asio::co_spawn(ex, http_session(beast::tcp_stream(std::move(socket))),
                   [](std::exception_ptr ep) { log_exception<void>(ep, "http"); });
  }
}

http::response<http::string_body> Server::Impl::handle_http(
    const http::request<http::string_body>& req) {
  http::response<http::string_body> res;
  res.version(req.version());
  res.keep_alive(req.keep_alive());
  res.set(http::field::server, "screenaim");

  const auto not_found = [&] {
    res.result(http::status::not_found);
    res.set(http::field::content_type, "text/plain");
    res.body() = "not found\n";
    res.prepare_payload();
    return res;
  };

  if (req.method() != http::verb::get && req.method() != http::verb::head) {
    res.result(http::status::method_not_allowed);
    res.set(http::field::content_type, "text/plain");
    res.body() = "method not allowed\n";
    res.prepare_payload();
    return res;
  }
  std::string target(req.target());
  if (const auto q = target.find('?'); q != std::string::npos) target.resize(q);

  if (target == "/metrics") {
    res.result(http::status::ok);
    res.set(http::field::content_type, "text/plain; charset=utf-8");
    res.body() = room.metrics_snapshot(now_ms()).to_text();
    res.prepare_payload();
    return res;
  }

  std::string rel;
  if (target == "/controller") {
    rel = "controller.html";
  } else if (target == "/display") {
    rel = "display.html";
  } else if (target == "/") {
    rel = "index.html";
  } else {
    rel = target.substr(1);
  }
  if (rel.empty() || rel.find("..") != std::string::npos || rel.front() == '/') {
    return not_found();
  }
  const auto path = opts.web_root / rel;
  std::ifstream in(path, std::ios::binary);
  if (!in || std::filesystem::is_directory(path)) return not_found();
  std::ostringstream body;
  body << in.rdbuf();
  res.result(http::status::ok);
  res.set(http::field::content_type, mime_type(path));
  res.body() = body.str();
  res.prepare_payload();
  if (req.method() == http::verb::head) res.body().clear();
  return res;
}

awaitable<void> Server::Impl::http_session(beast::tcp_stream stream) {
  beast::flat_buffer buffer;
  while (true) {
    http::request<http::string_body> req;
    stream.expires_after(std::chrono::seconds(30));
    co_await http::async_read(stream, buffer, req, use_awaitable);
    if (websocket::is_upgrade(req)) {
      if (req.target() != "/ws") {
        auto res = handle_http(req);
        res.result(http::status::not_found);
        co_await http::async_write(stream, res, use_awaitable);
        break;
      }
      stream.expires_never();
      std::make_shared<WsSession>(*this, stream.release_socket())->start(std::move(req));
      co_return;
    }
    auto res = handle_http(req);
    const bool keep = res.keep_alive();
    co_await http::async_write(stream, res, use_awaitable);
    if (!keep) break;
  }
  boost::system::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_send, ec);
}

awaitable<void> Server::Impl::ticker() {
  asio::steady_timer timer(co_await asio::this_coro::executor);
  const auto period = std::chrono::microseconds(1'000'000 / opts.room.broadcast_hz);
  auto next = std::chrono::steady_clock::now();
  while (!stopping) {
    next += period;
    timer.expires_at(next);
    co_await timer.async_wait(use_awaitable);
    room.broadcast_tick(now_ms());
  }
}

// ---------------------------------------------------------------------------
// Server

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  impl_->opts.room.validate();
  if (impl_->opts.io_threads < 1) throw std::invalid_argument("io_threads must be >= 1");
}

Server::~Server() {
  stop();
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
}

namespace {

void bind_acceptor(tcp::acceptor& acc, const std::string& address, std::uint16_t port) {
  const tcp::endpoint ep(asio::ip::make_address(address), port);
  acc.open(ep.protocol());
  acc.set_option(asio::socket_base::reuse_address(true));
  acc.bind(ep);
  acc.listen(asio::socket_base::max_listen_connections);
}

}  // namespace

void Server::start() {
  auto& i = *impl_;
  bind_acceptor(i.tcp_acceptor, i.opts.bind_address, i.opts.tcp_port);
  bind_acceptor(i.http_acceptor, i.opts.bind_address, i.opts.http_port);
  const auto log_end = [](const char* what) {
    return [what](std::exception_ptr ep) { log_exception<void>(ep, what); };
  };
  asio::co_spawn(asio::make_strand(i.ioc), i.tcp_accept_loop(), log_end("tcp accept"));
  asio::co_spawn(asio::make_strand(i.ioc), i.http_accept_loop(), log_end("http accept"));
  asio::co_spawn(asio::make_strand(i.ioc), i.ticker(), log_end("ticker"));
  spdlog::info("listening: tcp {} http {}", tcp_port(), http_port());
}

void Server::run() {
  auto& i = *impl_;
  std::vector<std::thread> extra;
  for (int t = 1; t < i.opts.io_threads; ++t) extra.emplace_back([&i] { i.ioc.run(); });
  i.ioc.run();
  for (auto& t : extra) t.join();
}

void Server::run_in_background() {
  auto& i = *impl_;
  for (int t = 0; t < i.opts.io_threads; ++t) i.threads.emplace_back([&i] { i.ioc.run(); });
}

void Server::stop() {
  auto& i = *impl_;
  if (i.stopping.exchange(true)) return;
  asio::post(i.ioc, [&i] {
    boost::system::error_code ec;
    i.tcp_acceptor.close(ec);
    i.http_acceptor.close(ec);
    i.ioc.stop();
  });
}

std::uint16_t Server::tcp_port() const { return impl_->tcp_acceptor.local_endpoint().port(); }
std::uint16_t Server::http_port() const { return impl_->http_acceptor.local_endpoint().port(); }
Room& Server::room() { return impl_->room; }
std::int64_t Server::now_ms() const { return impl_->now_ms(); }

}  // namespace screenaim::server

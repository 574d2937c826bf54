#include "screenaim/loadtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include <boost/asio.hpp>

namespace screenaim::loadtest {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using asio::awaitable;
using asio::use_awaitable;
using namespace screenaim::protocol;
using Clock = std::chrono::steady_clock;

void LoadTestOptions::validate() const {
  if (clients < 1 || clients > 65535) throw std::invalid_argument("clients must be in [1, 65535]");
  if (!(seconds > 0)) throw std::invalid_argument("seconds must be positive");
  if (mode == SendMode::Pointer && !(hz > 0)) throw std::invalid_argument("hz must be positive");
  if (!(fire_hz >= 0)) throw std::invalid_argument("fire_hz must be >= 0");
  if (mode == SendMode::Fire && !(fire_hz > 0)) {
    throw std::invalid_argument("fire mode needs fire_hz > 0");
  }
}

bool LoadTestReport::ok() const {
  return config_consistent && relay_losses == 0 && fire_duplicates == 0 && decode_errors == 0 &&
         unexpected_messages == 0 && final_aims_matched == final_aims_expected;
}

std::string LoadTestReport::to_text() const {
  std::ostringstream out;
  char buf[64];
  const auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };
  out << "clients " << clients << '\n';
  out << "elapsed_s " << num(elapsed_s) << '\n';
  out << "config_consistent " << (config_consistent ? 1 : 0) << '\n';
  out << "aims_sent " << aims_sent << '\n';
  out << "fires_sent " << fires_sent << '\n';
  out << "fires_received " << fires_received << '\n';
  out << "fire_duplicates " << fire_duplicates << '\n';
  out << "relay_losses " << relay_losses << '\n';
  out << "decode_errors " << decode_errors << '\n';
  out << "unexpected_messages " << unexpected_messages << '\n';
  out << "final_aims_matched " << final_aims_matched << '/' << final_aims_expected << '\n';
  out << "batches_received " << batches_received << '\n';
  out << "max_batch_entries " << max_batch_entries << '\n';
  out << "batch_sizes";
  for (const auto& [size, n] : batch_sizes) out << ' ' << size << ':' << n;
  out << '\n';
  out << "mean_client_bps " << num(mean_client_bps) << '\n';
  out << "max_client_bps " << num(max_client_bps) << '\n';
  out << "result " << (ok() ? "ok" : "fail") << '\n';
  return out.str();
}

namespace {

awaitable<void> write_msg(tcp::socket& s, const WireMessage& m) {
  const auto framed = frame_tcp(encode(m));
  co_await asio::async_write(s, asio::buffer(framed), use_awaitable);
}

awaitable<std::vector<std::uint8_t>> read_frame(tcp::socket& s) {
  std::array<std::uint8_t, 2> header{};
  co_await asio::async_read(s, asio::buffer(header), use_awaitable);
  std::vector<std::uint8_t> body((std::size_t{header[0]} << 8) | header[1]);
  co_await asio::async_read(s, asio::buffer(body), use_awaitable);
  co_return body;
}

// One-shot wakeup usable from coroutines on a single-threaded context.
class Event {
 public:
  explicit Event(asio::any_io_executor ex) : timer_(ex, Clock::time_point::max()) {}
  void set() {
    set_ = true;
    timer_.cancel();
  }
  bool is_set() const { return set_; }
  awaitable<void> wait() {
    while (!set_) {
      boost::system::error_code ec;
      co_await timer_.async_wait(asio::redirect_error(use_awaitable, ec));
    }
  }

 private:
  asio::steady_timer timer_;
  bool set_ = false;
};

std::uint32_t ms_since(Clock::time_point t0) {
  return static_cast<std::uint32_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count());
}

class Harness {
 public:
  Harness(asio::io_context& ioc, const LoadTestOptions& o)
      : ioc_(ioc), opts_(o), display_(ioc), display_pong_(ioc.get_executor()),
        pointers_done_(ioc.get_executor()) {}

  awaitable<void> run() {
    const auto endpoints = co_await tcp::resolver(ioc_).async_resolve(
        opts_.host, std::to_string(opts_.port), use_awaitable);
    endpoints_ = std::vector<tcp::endpoint>(endpoints.begin(), endpoints.end());
    t0_ = Clock::now();

    co_await connect(display_, Role::Display);
    asio::co_spawn(ioc_, display_reader(), asio::detached);

    results_.resize(static_cast<std::size_t>(opts_.clients));
    sockets_.reserve(results_.size());
    for (int i = 0; i < opts_.clients; ++i) sockets_.emplace_back(ioc_);
    for (int i = 0; i < opts_.clients; ++i) {
      asio::co_spawn(ioc_, pointer(i), [this](std::exception_ptr ep) {
        if (ep && !failure_) failure_ = ep;
        if (++finished_ == opts_.clients || failure_) pointers_done_.set();
      });
    }
    co_await pointers_done_.wait();
    if (failure_) std::rethrow_exception(failure_);

    // FIFO per connection: once the display's own Pong arrives, every relay
    // queued before it has been delivered.
    co_await write_msg(display_, Ping{ms_since(t0_)});
    co_await with_deadline(display_pong_.wait(), "display ping");

    if (opts_.mode == SendMode::Pointer) {
      const auto deadline = Clock::now() + opts_.settle_timeout;
      asio::steady_timer poll(ioc_);
      while (count_final_matches() < results_.size() && Clock::now() < deadline) {
        poll.expires_after(std::chrono::milliseconds(20));
        co_await poll.async_wait(use_awaitable);
      }
    }
    elapsed_s_ = std::chrono::duration<double>(Clock::now() - t0_).count();
    close_all();
  }

  LoadTestReport report() const {
    LoadTestReport r;
    r.clients = opts_.clients;
    r.elapsed_s = elapsed_s_;
    r.config_consistent = config_consistent_;
    r.fires_received = fires_seen_.size();
    r.fire_duplicates = fire_duplicates_;
    r.decode_errors = decode_errors_;
    r.unexpected_messages = unexpected_;
    r.batches_received = batches_;
    r.batch_sizes = batch_sizes_;
    r.max_batch_entries = batch_sizes_.empty() ? 0 : batch_sizes_.rbegin()->first;
    r.per_client = results_;
    double sum_bps = 0;
    for (const auto& c : results_) {
      r.aims_sent += c.aims_sent;
      r.fires_sent += c.fires_sent;
      sum_bps += c.payload_bps;
      r.max_client_bps = std::max(r.max_client_bps, c.payload_bps);
    }
    r.mean_client_bps = results_.empty() ? 0 : sum_bps / static_cast<double>(results_.size());
    r.relay_losses = r.fires_sent - std::min<std::uint64_t>(r.fires_sent, r.fires_received);
    if (opts_.mode == SendMode::Pointer) {
      r.final_aims_expected = results_.size();
      r.final_aims_matched = count_final_matches();
    }
    return r;
  }

 private:
  awaitable<void> connect(tcp::socket& s, Role role) {
    try {
      co_await asio::async_connect(s, endpoints_, use_awaitable);
    } catch (const boost::system::system_error& e) {
      throw LoadTestError("cannot connect to " + opts_.host + ":" + std::to_string(opts_.port) +
                          ": " + e.code().message());
    }
    s.set_option(tcp::no_delay(true));
    co_await write_msg(s, Hello{role, kVersion});
    const auto reply = co_await read_frame(s);
    WireMessage m;
    try {
      m = decode(reply);
    } catch (const DecodeError&) {
      ++decode_errors_;
      throw LoadTestError("handshake reply did not decode");
    }
    const auto* cfg = std::get_if<ConfigPush>(&m);
    if (!cfg) throw LoadTestError("handshake reply was not ConfigPush");
    if (!config_) {
      config_ = *cfg;
    } else if (!(*config_ == *cfg)) {
      config_consistent_ = false;
    }
  }

  template <typename T>
  awaitable<T> with_deadline(awaitable<T> op, const char* what) {
    asio::steady_timer timer(ioc_);
    timer.expires_after(opts_.settle_timeout);
    bool fired = false;
    timer.async_wait([&](boost::system::error_code ec) {
      if (!ec) {
        fired = true;
        close_all();
      }
    });
    try {
      if constexpr (std::is_void_v<T>) {
        co_await std::move(op);
        timer.cancel();
      } else {
        T v = co_await std::move(op);
        timer.cancel();
        co_return v;
      }
    } catch (...) {
      if (fired) throw LoadTestError(std::string("timed out waiting for ") + what);
      throw;
    }
    if (fired) throw LoadTestError(std::string("timed out waiting for ") + what);
  }

  static AimUpdate scripted_aim(int i, int n, std::uint64_t step, double hz) {
    const double t = static_cast<double>(step) / hz;
    const double phase = 2.0 * std::numbers::pi * (0.25 * t + static_cast<double>(i) / n);
    return AimUpdate{to_q16(0.5 + 0.4 * std::sin(phase)), to_q16(0.5 + 0.4 * std::cos(phase)),
                     kFlagOnScreen};
  }

  AimUpdate final_aim(int i) const {
    return AimUpdate{to_q16(static_cast<double>(i + 1) / (opts_.clients + 1)), to_q16(0.5),
                     kFlagOnScreen};
  }

  awaitable<void> pointer(int i) {
    auto& s = sockets_[static_cast<std::size_t>(i)];
    auto& res = results_[static_cast<std::size_t>(i)];
    res.index = i;
    co_await connect(s, Role::Pointer);

    const bool aims = opts_.mode == SendMode::Pointer;
    const auto to_dur = [](double sec) {
      return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(sec));
    };
    const auto aim_period = aims ? to_dur(1.0 / opts_.hz) : Clock::duration::max();
    const auto fire_period =
        opts_.fire_hz > 0 ? to_dur(1.0 / opts_.fire_hz) : Clock::duration::max();
    const double stagger = static_cast<double>(i) / opts_.clients;

    const auto start = Clock::now();
    const auto end = start + to_dur(opts_.seconds);
    auto next_aim = aims ? start + to_dur(stagger / opts_.hz) : Clock::time_point::max();
    auto next_fire = opts_.fire_hz > 0 ? start + to_dur(stagger / opts_.fire_hz)
                                       : Clock::time_point::max();
    std::uint64_t step = 0;
    std::uint16_t seq = 0;
    asio::steady_timer timer(ioc_);

    const auto send = [&](const WireMessage& m) -> awaitable<void> {
      res.payload_bytes += encoded_size(m);
      co_await write_msg(s, m);
    };

    while (true) {
      const auto due = std::min(next_aim, next_fire);
      if (due >= end) break;
      timer.expires_at(due);
      co_await timer.async_wait(use_awaitable);
      if (next_aim <= next_fire) {
        const auto aim = scripted_aim(i, opts_.clients, step++, opts_.hz);
        co_await send(aim);
        res.final_aim = aim;
        ++res.aims_sent;
        next_aim += aim_period;
      } else {
        // x carries the client index and y a sequence number so the display
        // can attribute every relay.
        co_await send(FireEvent{static_cast<std::uint16_t>(i), seq++, 1});
        ++res.fires_sent;
        next_fire += fire_period;
      }
    }
    if (aims) {
      res.final_aim = final_aim(i);
      co_await send(res.final_aim);
      ++res.aims_sent;
    }
    const auto ping_at = Clock::now();
    co_await send(Ping{ms_since(t0_)});
    const double active_s = std::chrono::duration<double>(ping_at - start).count();
    res.payload_bps = active_s > 0 ? static_cast<double>(res.payload_bytes) * 8.0 / active_s : 0;

    // Pointers only ever receive ConfigPush and Pong.
    while (true) {
      const auto frame = co_await with_deadline(read_frame(s), "pointer ping");
      WireMessage m;
      try {
        m = decode(frame);
      } catch (const DecodeError&) {
        ++decode_errors_;
        continue;
      }
      if (std::holds_alternative<Pong>(m)) break;
      ++unexpected_;
    }
    res.rtt_ms = std::chrono::duration<double, std::milli>(Clock::now() - ping_at).count();
  }

  awaitable<void> display_reader() {
    try {
      while (true) {
        const auto frame = co_await read_frame(display_);
        WireMessage m;
        try {
          m = decode(frame);
        } catch (const DecodeError&) {
          ++decode_errors_;
          continue;
        }
        if (const auto* f = std::get_if<FireEvent>(&m)) {
          if (!fires_seen_.insert({f->x_q16, f->y_q16}).second) ++fire_duplicates_;
        } else if (const auto* b = std::get_if<PointerBatch>(&m)) {
          ++batches_;
          ++batch_sizes_[b->entries.size()];
          for (const auto& e : b->entries) latest_[e.client_id] = e;
        } else if (std::holds_alternative<Pong>(m)) {
          display_pong_.set();
        } else {
          ++unexpected_;
        }
      }
    } catch (const boost::system::system_error&) {
      // Closed by close_all or the server.
    }
  }

  std::size_t count_final_matches() const {
    std::multiset<std::pair<std::uint16_t, std::uint16_t>> seen;
    for (const auto& [id, e] : latest_) seen.insert({e.x_q16, e.y_q16});
    std::size_t matched = 0;
    for (int i = 0; i < opts_.clients; ++i) {
      const auto a = final_aim(i);
      if (auto it = seen.find({a.x_q16, a.y_q16}); it != seen.end()) {
        seen.erase(it);
        ++matched;
      }
    }
    return matched;
  }

  void close_all() {
    boost::system::error_code ec;
    display_.close(ec);
    for (auto& s : sockets_) s.close(ec);
  }

  asio::io_context& ioc_;
  const LoadTestOptions& opts_;
  std::vector<tcp::endpoint> endpoints_;
  Clock::time_point t0_;
  tcp::socket display_;
  Event display_pong_;
  Event pointers_done_;
  std::vector<tcp::socket> sockets_;
  std::vector<ClientResult> results_;
  int finished_ = 0;
  std::exception_ptr failure_;
  std::optional<ConfigPush> config_;
  bool config_consistent_ = true;
  std::set<std::pair<std::uint16_t, std::uint16_t>> fires_seen_;
  std::uint64_t fire_duplicates_ = 0;
  std::uint64_t decode_errors_ = 0;
  std::uint64_t unexpected_ = 0;
  std::uint64_t batches_ = 0;
  std::map<std::size_t, std::uint64_t> batch_sizes_;
  std::map<std::uint16_t, PointerEntry> latest_;
  double elapsed_s_ = 0;
};

}  // namespace

LoadTestReport run_loadtest(const LoadTestOptions& options) {
  options.validate();
  asio::io_context ioc(1);
  Harness harness(ioc, options);
  std::exception_ptr failure;
  bool done = false;
  asio::co_spawn(ioc, harness.run(), [&](std::exception_ptr ep) {
    failure = ep;
    done = true;
    ioc.stop();
  });
  const auto budget = std::chrono::duration<double>(options.seconds) + options.settle_timeout * 3 +
                      std::chrono::seconds(10);
  ioc.run_for(std::chrono::duration_cast<std::chrono::milliseconds>(budget));
  if (!done) throw LoadTestError("load test did not finish in time");
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const LoadTestError&) {
      throw;
    } catch (const std::exception& e) {
      throw LoadTestError(e.what());
    }
  }
  return harness.report();
}

}  // namespace screenaim::loadtest

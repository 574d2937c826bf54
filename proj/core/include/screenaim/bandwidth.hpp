#pragma once

#include <cstdint>
#include <vector>

namespace screenaim {

// Sliding-window byte counter. Time is caller-supplied monotonic milliseconds
// so the counter can be driven by a fake clock in tests.
class BandwidthCounter {
 public:
  static constexpr std::int64_t kBucketMs = 100;
  static constexpr std::size_t kMaxBuckets = 600;

  explicit BandwidthCounter(std::int64_t start_ms = 0, std::int64_t window_ms = 10'000);

  void record_in(std::uint64_t bytes, std::int64_t now_ms);
  void record_out(std::uint64_t bytes, std::int64_t now_ms);

  std::uint64_t bytes_in() const { return total_in_; }
  std::uint64_t bytes_out() const { return total_out_; }

  // Bits per second over the last window, or over the counter's lifetime
  // while it is younger than the window.
  double bps_in(std::int64_t now_ms) const;
  double bps_out(std::int64_t now_ms) const;

  std::int64_t window_ms() const { return window_ms_; }

 private:
  struct Bucket {
    std::int64_t epoch = -1;
    std::uint64_t in = 0;
    std::uint64_t out = 0;
  };

  Bucket& bucket(std::int64_t now_ms);
  double rate(std::int64_t now_ms, bool inbound) const;

  std::int64_t start_ms_;
  std::int64_t window_ms_;
  std::size_t nbuckets_;
  std::uint64_t total_in_ = 0;
  std::uint64_t total_out_ = 0;
  std::vector<Bucket> buckets_;
};

}  // namespace screenaim

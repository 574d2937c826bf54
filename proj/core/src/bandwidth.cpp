#include "screenaim/bandwidth.hpp"

#include <algorithm>
#include <stdexcept>

namespace screenaim {

BandwidthCounter::BandwidthCounter(std::int64_t start_ms, std::int64_t window_ms)
    : start_ms_(start_ms), window_ms_(window_ms) {
  if (window_ms < kBucketMs || window_ms % kBucketMs != 0 ||
      static_cast<std::size_t>(window_ms / kBucketMs) > kMaxBuckets) {
    throw std::invalid_argument("window must be a multiple of 100 ms, at most 60 s");
  }
  nbuckets_ = static_cast<std::size_t>(window_ms / kBucketMs);
  buckets_.resize(nbuckets_);
}

BandwidthCounter::Bucket& BandwidthCounter::bucket(std::int64_t now_ms) {
  const std::int64_t epoch = std::max<std::int64_t>(0, now_ms - start_ms_) / kBucketMs;
  Bucket& b = buckets_[static_cast<std::size_t>(epoch) % nbuckets_];
  if (b.epoch != epoch) b = Bucket{epoch, 0, 0};
  return b;
}

void BandwidthCounter::record_in(std::uint64_t bytes, std::int64_t now_ms) {
  total_in_ += bytes;
  bucket(now_ms).in += bytes;
}

void BandwidthCounter::record_out(std::uint64_t bytes, std::int64_t now_ms) {
  total_out_ += bytes;
  bucket(now_ms).out += bytes;
}

double BandwidthCounter::rate(std::int64_t now_ms, bool inbound) const {
  const std::int64_t age = now_ms - start_ms_;
  if (age <= 0) return 0.0;
  const std::int64_t current = age / kBucketMs;
  const std::int64_t oldest = current - static_cast<std::int64_t>(nbuckets_) + 1;
  std::uint64_t bytes = 0;
  for (const auto& b : buckets_) {
    if (b.epoch >= oldest && b.epoch <= current) bytes += inbound ? b.in : b.out;
  }
  const double span_ms = static_cast<double>(std::min(age, window_ms_));
  return static_cast<double>(bytes) * 8.0 * 1000.0 / span_ms;
}

double BandwidthCounter::bps_in(std::int64_t now_ms) const { return rate(now_ms, true); }
double BandwidthCounter::bps_out(std::int64_t now_ms) const { return rate(now_ms, false); }

}  // namespace screenaim

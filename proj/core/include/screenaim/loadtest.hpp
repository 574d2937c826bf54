#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "screenaim/protocol.hpp"

namespace screenaim::loadtest {

class LoadTestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LoadTestOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7070;
  int clients = 10;
  // AimUpdate rate per pointer (pointer mode only).
  double hz = 30.0;
  double seconds = 10.0;
  // FireEvent rate per pointer; 0 disables fires.
  double fire_hz = 1.0;
  protocol::SendMode mode = protocol::SendMode::Pointer;
  // Upper bound on the wind-down phase after the scripted run.
  std::chrono::milliseconds settle_timeout{5000};

  void validate() const;
};

struct ClientResult {
  int index = 0;
  std::uint64_t aims_sent = 0;
  std::uint64_t fires_sent = 0;
  // Payload bytes sent after the handshake, framing excluded.
  std::uint64_t payload_bytes = 0;
  double payload_bps = 0;
  double rtt_ms = 0;
  protocol::AimUpdate final_aim;
};

struct LoadTestReport {
  int clients = 0;
  double elapsed_s = 0;
  bool config_consistent = true;
  std::uint64_t aims_sent = 0;
  std::uint64_t fires_sent = 0;
  std::uint64_t fires_received = 0;
  std::uint64_t fire_duplicates = 0;
  std::uint64_t relay_losses = 0;
  std::uint64_t decode_errors = 0;
  // Messages a pointer or display should never receive.
  std::uint64_t unexpected_messages = 0;
  std::uint64_t final_aims_expected = 0;
  std::uint64_t final_aims_matched = 0;
  std::uint64_t batches_received = 0;
  std::size_t max_batch_entries = 0;
  // entries per PointerBatch -> occurrences
  std::map<std::size_t, std::uint64_t> batch_sizes;
  double mean_client_bps = 0;
  double max_client_bps = 0;
  std::vector<ClientResult> per_client;

  bool ok() const;
  std::string to_text() const;
};

// Connects one harness display and `clients` synthetic pointers to a running
// server over native TCP framing and drives the scripted workload. Throws
// LoadTestError when the server cannot be reached or the run stalls.
LoadTestReport run_loadtest(const LoadTestOptions& options);

}  // namespace screenaim::loadtest

// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rlsr/reward.hpp"

namespace rlsr::reward {

/// Newline-delimited JSON scoring service over TCP.
///
/// Request: {"id": string, "prompt": string, "response": string,
///           "reference": string}
/// Reply:   {"id": string, "reward": number, "cosine": number,
///           "penalty": bool, "lrs": integer}
///       or {"id": string|null, "error": string}
///
/// Byte strings that are not valid UTF-8 travel base64-encoded under the same
/// key with a "_b64" suffix. Each connection gets its own thread; requests
/// share only the immutable scorer.
class RewardServer {
 public:
  explicit RewardServer(RewardConfig cfg);
  ~RewardServer();
  RewardServer(const RewardServer&) = delete;
  RewardServer& operator=(const RewardServer&) = delete;

  // Binds and starts accepting. Port 0 picks an ephemeral port; the bound
  // port is returned. Throws IoError if the address cannot be bound.
  std::uint16_t start(const std::string& host, std::uint16_t port);
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

  std::uint16_t port() const { return port_; }

  // One request line in, one reply line (without newline) out.
  std::string handle_line(std::string_view line) const;

 private:
  void accept_loop();
  void serve_connection(int fd);

  RewardScorer scorer_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<int> client_fds_;
  std::vector<std::thread> workers_;
};

/// Blocking client for RewardServer, one request in flight per instance.
class RewardClient {
 public:
  RewardClient(const std::string& host, std::uint16_t port);
  ~RewardClient();
  RewardClient(const RewardClient&) = delete;
  RewardClient& operator=(const RewardClient&) = delete;

  // Sends one line, returns the reply line.
  std::string request(std::string_view line);
  // Throws std::runtime_error if the server replies with an error.
  RewardBreakdown score(std::string_view prompt, std::string_view response,
                        std::string_view reference);

 private:
  int fd_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 0;
};

}  // namespace rlsr::reward

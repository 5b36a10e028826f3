// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include "rlsr/reward_server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "json_bytes.hpp"
#include "rlsr/errors.hpp"
#include "rlsr/log.hpp"

namespace rlsr::reward {
namespace {

using nlohmann::json;

constexpr std::size_t kMaxLine = 16u << 20;

std::string error_reply(const json& id, std::string_view message) {
  return json{{"id", id}, {"error", message}}.dump();
}

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

// Reads until a full line is buffered. Returns false on EOF or error.
bool read_line(int fd, std::string& buffer, std::string& line) {
  for (;;) {
    const auto pos = buffer.find('\n');
    if (pos != std::string::npos) {
      line.assign(buffer, 0, pos);
      buffer.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return true;
    }
    if (buffer.size() > kMaxLine) return false;
    char chunk[8192];
    const auto n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (::getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
      throw IoError("cannot resolve host " + host);
    }
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
  }
  return addr;
}

}  // namespace

RewardServer::RewardServer(RewardConfig cfg) : scorer_(std::move(cfg)) {}

RewardServer::~RewardServer() { stop(); }

std::uint16_t RewardServer::start(const std::string& host, std::uint16_t port) {
  if (running_) throw ContractError("reward server already running");
  const auto addr = resolve(host, port);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 64) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw IoError("cannot bind " + host + ":" + std::to_string(port) + ": " + why);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  log::info("reward server listening on " + host + ":" + std::to_string(port_));
  return port_;
}

void RewardServer::wait() {
  if (acceptor_.joinable()) acceptor_.join();
}

void RewardServer::stop() {
  if (running_.exchange(false)) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  if (acceptor_.joinable() && acceptor_.get_id() != std::this_thread::get_id()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void RewardServer::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(mu_);
    if (!running_) {
      ::close(fd);
      break;
    }
    client_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void RewardServer::serve_connection(int fd) {
  std::string buffer, line;
  while (read_line(fd, buffer, line)) {
    if (!send_all(fd, handle_line(line) + "\n")) break;
  }
  std::lock_guard lock(mu_);
  client_fds_.erase(std::remove(client_fds_.begin(), client_fds_.end(), fd), client_fds_.end());
  ::close(fd);
}

std::string RewardServer::handle_line(std::string_view line) const {
  json req;
  try {
    req = json::parse(line);
  } catch (const json::parse_error&) {
    return error_reply(nullptr, "parse");
  }
  if (!req.is_object()) return error_reply(nullptr, "parse");
  json id = nullptr;
  if (auto it = req.find("id"); it != req.end() && it->is_string()) id = *it;
  if (id.is_null()) return error_reply(nullptr, "missing field: id");
  try {
    auto prompt = detail::get_bytes(req, "prompt");
    auto response = detail::get_bytes(req, "response");
    auto reference = detail::get_bytes(req, "reference");
    if (!prompt) return error_reply(id, "missing field: prompt");
    if (!response) return error_reply(id, "missing field: response");
    if (!reference) return error_reply(id, "missing field: reference");
    if (reference->empty()) return error_reply(id, "empty reference");
    const auto r = scorer_.score(*prompt, *response, *reference);
    return json{{"id", id},
                {"reward", r.final_reward},
                {"cosine", r.cosine},
                {"penalty", r.penalty_triggered},
                {"lrs", r.lrs_length}}
        .dump();
  } catch (const std::exception& e) {
    return error_reply(id, e.what());
  }
}

RewardClient::RewardClient(const std::string& host, std::uint16_t port) {
  const auto addr = resolve(host, port);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
  if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw IoError("cannot connect to " + host + ":" + std::to_string(port) + ": " + why);
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

RewardClient::~RewardClient() {
  if (fd_ >= 0) ::close(fd_);
}

std::string RewardClient::request(std::string_view line) {
  std::string msg(line);
  msg.push_back('\n');
  if (!send_all(fd_, msg)) throw IoError("reward client: send failed");
  std::string reply;
  if (!read_line(fd_, buffer_, reply)) throw IoError("reward client: connection closed");
  return reply;
}

RewardBreakdown RewardClient::score(std::string_view prompt, std::string_view response,
                                    std::string_view reference) {
  json req = {{"id", std::to_string(next_id_++)}};
  detail::put_bytes(req, "prompt", prompt);
  detail::put_bytes(req, "response", response);
  detail::put_bytes(req, "reference", reference);
  const auto reply = json::parse(request(req.dump()));
  if (reply.contains("error")) {
    throw std::runtime_error("reward server error: " + reply["error"].get<std::string>());
  }
  RewardBreakdown r;
  r.final_reward = reply.at("reward").get<double>();
  r.cosine = reply.at("cosine").get<double>();
  r.penalty_triggered = reply.at("penalty").get<bool>();
  r.lrs_length = reply.at("lrs").get<std::size_t>();
  return r;
}

}  // namespace rlsr::reward

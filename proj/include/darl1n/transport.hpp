#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace darl1n {

enum class RecvStatus { Ok, Timeout, Closed };

// Bidirectional, message-oriented channel. One frame in, one frame out; the
// TCP flavour prepends a u32 little-endian byte length to each frame. Safe
// for one sender thread plus one receiver thread per endpoint.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(std::span<const uint8_t> payload) = 0;
  virtual RecvStatus recv(std::vector<uint8_t>& payload, std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
};

// Two connected endpoints backed by in-memory queues.
std::pair<std::shared_ptr<Channel>, std::shared_ptr<Channel>> make_inproc_pair();

class TcpListener {
 public:
  // port 0 binds an ephemeral port; port() reports the actual one.
  explicit TcpListener(const std::string& host, uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t port() const { return port_; }
  // nullptr on timeout.
  std::shared_ptr<Channel> accept(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

std::shared_ptr<Channel> tcp_connect(const std::string& host, uint16_t port,
                                     std::chrono::milliseconds timeout);

}  // namespace darl1n

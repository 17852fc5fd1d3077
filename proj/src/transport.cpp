#include "darl1n/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <string>

namespace darl1n {
namespace {

constexpr uint32_t kMaxFrameBytes = 256u << 20;

using Clock = std::chrono::steady_clock;

std::chrono::milliseconds remaining(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  return left.count() < 0 ? std::chrono::milliseconds(0) : left;
}

// Shared state of an in-process pair: queue[k] holds frames travelling
// towards endpoint k.
struct InprocCore {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::vector<uint8_t>> queue[2];
  bool closed = false;
};

class InprocChannel : public Channel {
 public:
  InprocChannel(std::shared_ptr<InprocCore> core, int side) : core_(std::move(core)), side_(side) {}

  ~InprocChannel() override { close(); }

  void send(std::span<const uint8_t> payload) override {
    std::lock_guard<std::mutex> lock(core_->mu);
    if (core_->closed) throw std::runtime_error("send on closed channel");
    core_->queue[1 - side_].emplace_back(payload.begin(), payload.end());
    core_->cv.notify_all();
  }

  RecvStatus recv(std::vector<uint8_t>& payload, std::chrono::milliseconds timeout) override {
    std::unique_lock<std::mutex> lock(core_->mu);
    auto& inbox = core_->queue[side_];
    core_->cv.wait_for(lock, timeout, [&] { return !inbox.empty() || core_->closed; });
    if (!inbox.empty()) {
      payload = std::move(inbox.front());
      inbox.pop_front();
      return RecvStatus::Ok;
    }
    return core_->closed ? RecvStatus::Closed : RecvStatus::Timeout;
  }

  void close() override {
    std::lock_guard<std::mutex> lock(core_->mu);
    core_->closed = true;
    core_->cv.notify_all();
  }

 private:
  std::shared_ptr<InprocCore> core_;
  int side_;
};

class TcpChannel : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }

  ~TcpChannel() override { close(); }

  void send(std::span<const uint8_t> payload) override {
    if (payload.size() > kMaxFrameBytes) throw std::runtime_error("frame too large");
    std::lock_guard<std::mutex> lock(send_mu_);
    uint8_t len[4];
    const uint32_t n = static_cast<uint32_t>(payload.size());
    for (int i = 0; i < 4; ++i) len[i] = static_cast<uint8_t>((n >> (8 * i)) & 0xff);
    write_all(len, 4);
    write_all(payload.data(), payload.size());
  }

  RecvStatus recv(std::vector<uint8_t>& payload, std::chrono::milliseconds timeout) override {
    const auto deadline = Clock::now() + timeout;
    uint8_t len[4];
    RecvStatus st = read_all(len, 4, deadline);
    if (st != RecvStatus::Ok) return st;
    uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n |= static_cast<uint32_t>(len[i]) << (8 * i);
    if (n > kMaxFrameBytes) throw std::runtime_error("incoming frame too large");
    payload.resize(n);
    if (n == 0) return RecvStatus::Ok;
    // Once the length arrives the rest is in flight, so give the body its own
    // generous deadline even if the caller polled with a tiny timeout; a torn
    // frame after that is a peer failure, not an ordinary timeout.
    const auto body_deadline = std::max(deadline, Clock::now() + std::chrono::seconds(60));
    st = read_all(payload.data(), n, body_deadline);
    if (st == RecvStatus::Timeout) throw std::runtime_error("timed out mid-frame");
    return st;
  }

  void close() override {
    std::lock_guard<std::mutex> lock(close_mu_);
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  void write_all(const uint8_t* data, size_t n) {
    size_t sent = 0;
    while (sent < n) {
      const ssize_t rc = ::send(fd_, data + sent, n - sent, MSG_NOSIGNAL);
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw std::runtime_error(std::string("send failed: ") + std::strerror(errno));
      }
      sent += static_cast<size_t>(rc);
    }
  }

  RecvStatus read_all(uint8_t* data, size_t n, Clock::time_point deadline) {
    size_t got = 0;
    while (got < n) {
      pollfd pfd{fd_, POLLIN, 0};
      const int pr = ::poll(&pfd, 1, static_cast<int>(remaining(deadline).count()));
      if (pr < 0) {
        if (errno == EINTR) continue;
        throw std::runtime_error(std::string("poll failed: ") + std::strerror(errno));
      }
      if (pr == 0) return RecvStatus::Timeout;
      const ssize_t rc = ::read(fd_, data + got, n - got);
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw std::runtime_error(std::string("read failed: ") + std::strerror(errno));
      }
      if (rc == 0) return RecvStatus::Closed;
      got += static_cast<size_t>(rc);
    }
    return RecvStatus::Ok;
  }

  int fd_;
  std::mutex send_mu_;
  std::mutex close_mu_;
};

sockaddr_in make_addr(const std::string& host, uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw std::invalid_argument("bad IPv4 address: " + host);
  }
  return addr;
}

}  // namespace

std::pair<std::shared_ptr<Channel>, std::shared_ptr<Channel>> make_inproc_pair() {
  auto core = std::make_shared<InprocCore>();
  return {std::make_shared<InprocChannel>(core, 0), std::make_shared<InprocChannel>(core, 1)};
}

TcpListener::TcpListener(const std::string& host, uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error(std::string("socket failed: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(host, port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    const std::string msg = std::string("bind failed: ") + std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw std::runtime_error(msg);
  }
  if (::listen(fd_, 64) < 0) {
    const std::string msg = std::string("listen failed: ") + std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw std::runtime_error(msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len) < 0) {
    const std::string msg = std::string("getsockname failed: ") + std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw std::runtime_error(msg);
  }
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::shared_ptr<Channel> TcpListener::accept(std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  while (true) {
    const int pr = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (pr < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("poll failed: ") + std::strerror(errno));
    }
    if (pr == 0) return nullptr;
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("accept failed: ") + std::strerror(errno));
    }
    return std::make_shared<TcpChannel>(fd);
  }
}

std::shared_ptr<Channel> tcp_connect(const std::string& host, uint16_t port,
                                     std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  sockaddr_in addr = make_addr(host, port);
  while (true) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error(std::string("socket failed: ") + std::strerror(errno));
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) {
      return std::make_shared<TcpChannel>(fd);
    }
    const int err = errno;
    ::close(fd);
    // The controller may still be setting up its listener; retry until the
    // deadline for connection-refused style failures.
    if (Clock::now() >= deadline) {
      throw std::runtime_error("connect to " + host + ":" + std::to_string(port) +
                               " failed: " + std::strerror(err));
    }
    ::usleep(20 * 1000);
  }
}

}  // namespace darl1n

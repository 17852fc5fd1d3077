#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <chrono>
#include <cstdint>
#include <thread>
#include <vector>

#include "darl1n/rng.hpp"
#include "darl1n/transport.hpp"
#include "darl1n/wire.hpp"

using namespace darl1n;
using namespace std::chrono_literals;

namespace {

bool same_bits(const Mlp& a, const Mlp& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (size_t k = 0; k < a.layers.size(); ++k) {
    const auto& la = a.layers[k];
    const auto& lb = b.layers[k];
    if (la.in != lb.in || la.out != lb.out) return false;
    if (la.w.size() != lb.w.size() || la.b.size() != lb.b.size()) return false;
    for (size_t i = 0; i < la.w.size(); ++i) {
      if (std::bit_cast<uint64_t>(la.w[i]) != std::bit_cast<uint64_t>(lb.w[i])) return false;
    }
    for (size_t i = 0; i < la.b.size(); ++i) {
      if (std::bit_cast<uint64_t>(la.b[i]) != std::bit_cast<uint64_t>(lb.b[i])) return false;
    }
  }
  return true;
}

Mlp tiny_net() {
  Mlp net;
  net.head = Head::Linear;
  net.layers.resize(1);
  net.layers[0].out = 1;
  net.layers[0].in = 2;
  net.layers[0].w = {0.5, -0.25};
  net.layers[0].b = {0.125};
  return net;
}

}  // namespace

TEST_CASE("hello frame has the pinned byte layout") {
  const std::vector<uint8_t> frame = encode_hello(7);
  const std::vector<uint8_t> expected = {
      0x01, 0x00,              // version 1
      0x03,                    // kind hello
      0x00, 0x00, 0x00, 0x00,  // iteration 0
      0x07, 0x00, 0x00, 0x00,  // agent 7
  };
  CHECK(frame == expected);
  CHECK(decode_hello(frame) == 7);
  CHECK(peek_kind(frame) == MsgKind::Hello);
}

TEST_CASE("update frame pins little-endian f64 positions") {
  UpdateMsg msg;
  msg.iteration = 5;
  msg.agent = 2;
  msg.policy = tiny_net();
  msg.target = tiny_net();
  msg.target.layers[0].w = {1.0, 2.0};
  msg.target.layers[0].b = {-1.0};
  const std::vector<uint8_t> frame = encode_update(msg);
  REQUIRE(frame.size() == 83);
  CHECK(frame[2] == 0x02);                         // kind
  CHECK(frame[3] == 0x05);                         // iteration low byte
  CHECK(frame[7] == 0x02);                         // agent low byte
  CHECK(frame[11] == 0x01);                        // layer count
  CHECK(frame[15] == 0x01);                        // rows
  CHECK(frame[19] == 0x02);                        // cols
  const std::vector<uint8_t> half = {0, 0, 0, 0, 0, 0, 0xE0, 0x3F};  // 0.5
  CHECK(std::vector<uint8_t>(frame.begin() + 23, frame.begin() + 31) == half);
  const std::vector<uint8_t> neg_q = {0, 0, 0, 0, 0, 0, 0xD0, 0xBF};  // -0.25
  CHECK(std::vector<uint8_t>(frame.begin() + 31, frame.begin() + 39) == neg_q);

  const UpdateMsg back = decode_update(frame, Head::Linear);
  CHECK(back.iteration == 5);
  CHECK(back.agent == 2);
  CHECK(same_bits(back.policy, msg.policy));
  CHECK(same_bits(back.target, msg.target));
}

TEST_CASE("params round-trip is bitwise over random nets") {
  Rng rng(99);
  ParamsMsg msg;
  msg.iteration = 17;
  msg.entries.emplace_back(make_mlp({4, 8, 3}, Head::Softmax, rng),
                           make_mlp({4, 8, 3}, Head::Softmax, rng));
  msg.entries.emplace_back(make_mlp({6, 5, 2}, Head::Softmax, rng),
                           make_mlp({6, 5, 2}, Head::Softmax, rng));
  const auto frame = encode_params(msg);
  CHECK(peek_kind(frame) == MsgKind::Params);
  CHECK(peek_iteration(frame) == 17);
  const ParamsMsg back = decode_params(frame, Head::Softmax);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.iteration == 17);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(same_bits(back.entries[i].first, msg.entries[i].first));
    CHECK(same_bits(back.entries[i].second, msg.entries[i].second));
    CHECK(back.entries[i].first.head == Head::Softmax);
  }
}

TEST_CASE("special float values survive the wire") {
  UpdateMsg msg;
  msg.iteration = 1;
  msg.agent = 0;
  msg.policy = tiny_net();
  msg.policy.layers[0].w = {-0.0, std::numeric_limits<double>::quiet_NaN()};
  msg.policy.layers[0].b = {5e-324};  // smallest denormal
  msg.target = tiny_net();
  const UpdateMsg back = decode_update(encode_update(msg), Head::Linear);
  CHECK(std::bit_cast<uint64_t>(back.policy.layers[0].w[0]) == std::bit_cast<uint64_t>(-0.0));
  CHECK(std::bit_cast<uint64_t>(back.policy.layers[0].w[1]) ==
        std::bit_cast<uint64_t>(msg.policy.layers[0].w[1]));
  CHECK(std::bit_cast<uint64_t>(back.policy.layers[0].b[0]) == std::bit_cast<uint64_t>(5e-324));
}

TEST_CASE("heartbeat and shutdown carry kind plus iteration only") {
  const auto hb = encode_heartbeat(42);
  CHECK(hb.size() == 7);
  CHECK(peek_kind(hb) == MsgKind::Heartbeat);
  CHECK(peek_iteration(hb) == 42);
  const auto down = encode_shutdown();
  CHECK(down.size() == 7);
  CHECK(peek_kind(down) == MsgKind::Shutdown);
}

TEST_CASE("malformed frames are rejected") {
  UpdateMsg msg;
  msg.iteration = 3;
  msg.agent = 1;
  msg.policy = tiny_net();
  msg.target = tiny_net();
  const auto frame = encode_update(msg);

  SUBCASE("truncation at every prefix length") {
    for (size_t cut : {size_t(0), size_t(1), size_t(5), size_t(12), frame.size() - 1}) {
      std::vector<uint8_t> bad(frame.begin(), frame.begin() + static_cast<long>(cut));
      CHECK_THROWS_AS(decode_update(bad, Head::Linear), ProtocolError);
    }
  }
  SUBCASE("version mismatch") {
    auto bad = frame;
    bad[0] = 0x02;
    CHECK_THROWS_AS(decode_update(bad, Head::Linear), ProtocolError);
    CHECK_THROWS_AS(peek_kind(bad), ProtocolError);
  }
  SUBCASE("kind mismatch") {
    CHECK_THROWS_AS(decode_params(frame, Head::Linear), ProtocolError);
    CHECK_THROWS_AS(decode_hello(frame), ProtocolError);
  }
  SUBCASE("unknown kind byte") {
    auto bad = frame;
    bad[2] = 0x09;
    CHECK_THROWS_AS(peek_kind(bad), ProtocolError);
  }
  SUBCASE("trailing bytes") {
    auto bad = frame;
    bad.push_back(0xAA);
    CHECK_THROWS_AS(decode_update(bad, Head::Linear), ProtocolError);
  }
  SUBCASE("absurd layer count") {
    auto bad = frame;
    bad[11] = 0xFF;
    bad[12] = 0xFF;
    bad[13] = 0xFF;
    bad[14] = 0xFF;
    CHECK_THROWS_AS(decode_update(bad, Head::Linear), ProtocolError);
  }
}

TEST_CASE("inproc pair delivers frames in order and reports closure") {
  auto [a, b] = make_inproc_pair();
  a->send(std::vector<uint8_t>{1, 2, 3});
  a->send(std::vector<uint8_t>{4});
  std::vector<uint8_t> got;
  REQUIRE(b->recv(got, 100ms) == RecvStatus::Ok);
  CHECK(got == std::vector<uint8_t>{1, 2, 3});
  REQUIRE(b->recv(got, 100ms) == RecvStatus::Ok);
  CHECK(got == std::vector<uint8_t>{4});

  b->send(std::vector<uint8_t>{9, 9});
  REQUIRE(a->recv(got, 100ms) == RecvStatus::Ok);
  CHECK(got == std::vector<uint8_t>{9, 9});

  CHECK(b->recv(got, 10ms) == RecvStatus::Timeout);
  a->close();
  CHECK(b->recv(got, 10ms) == RecvStatus::Closed);
  CHECK_THROWS(b->send(std::vector<uint8_t>{1}));
}

TEST_CASE("inproc close wakes a blocked receiver") {
  auto [a, b] = make_inproc_pair();
  std::thread closer([c = a] {
    std::this_thread::sleep_for(30ms);
    c->close();
  });
  std::vector<uint8_t> got;
  const auto t0 = std::chrono::steady_clock::now();
  CHECK(b->recv(got, 5000ms) == RecvStatus::Closed);
  CHECK(std::chrono::steady_clock::now() - t0 < 2000ms);
  closer.join();
}

TEST_CASE("tcp channel round-trips frames of many sizes") {
  TcpListener listener("127.0.0.1", 0);
  REQUIRE(listener.port() != 0);
  std::shared_ptr<Channel> client;
  std::thread dialer([&] { client = tcp_connect("127.0.0.1", listener.port(), 2000ms); });
  std::shared_ptr<Channel> server = listener.accept(2000ms);
  dialer.join();
  REQUIRE(server != nullptr);
  REQUIRE(client != nullptr);

  Rng rng(7);
  std::vector<uint8_t> big(1 << 20);
  for (auto& v : big) v = static_cast<uint8_t>(rng.next_u64() & 0xff);

  client->send(big);
  client->send(std::vector<uint8_t>{});
  client->send(std::vector<uint8_t>{0xAB});

  std::vector<uint8_t> got;
  REQUIRE(server->recv(got, 5000ms) == RecvStatus::Ok);
  CHECK(got == big);
  REQUIRE(server->recv(got, 5000ms) == RecvStatus::Ok);
  CHECK(got.empty());
  REQUIRE(server->recv(got, 5000ms) == RecvStatus::Ok);
  CHECK(got == std::vector<uint8_t>{0xAB});

  server->send(std::vector<uint8_t>{1, 2});
  REQUIRE(client->recv(got, 5000ms) == RecvStatus::Ok);
  CHECK(got == std::vector<uint8_t>{1, 2});

  CHECK(client->recv(got, 10ms) == RecvStatus::Timeout);
  server->close();
  CHECK(client->recv(got, 2000ms) == RecvStatus::Closed);
}

TEST_CASE("tcp accept times out when nobody dials") {
  TcpListener listener("127.0.0.1", 0);
  CHECK(listener.accept(20ms) == nullptr);
}

TEST_CASE("wire messages survive a tcp hop bit-for-bit") {
  TcpListener listener("127.0.0.1", 0);
  std::shared_ptr<Channel> client;
  std::thread dialer([&] { client = tcp_connect("127.0.0.1", listener.port(), 2000ms); });
  std::shared_ptr<Channel> server = listener.accept(2000ms);
  dialer.join();
  REQUIRE(server != nullptr);

  Rng rng(123);
  ParamsMsg msg;
  msg.iteration = 8;
  msg.entries.emplace_back(make_mlp({10, 64, 64, 64, 2}, Head::Tanh, rng),
                           make_mlp({10, 64, 64, 64, 2}, Head::Tanh, rng));
  client->send(encode_params(msg));
  std::vector<uint8_t> got;
  REQUIRE(server->recv(got, 5000ms) == RecvStatus::Ok);
  const ParamsMsg back = decode_params(got, Head::Tanh);
  CHECK(same_bits(back.entries[0].first, msg.entries[0].first));
  CHECK(same_bits(back.entries[0].second, msg.entries[0].second));
}

#include "darl1n/wire.hpp"

#include <bit>
#include <cstring>
#include <string>

namespace darl1n {
namespace {

constexpr uint32_t kMaxLayers = 64;
constexpr uint32_t kMaxDim = 1u << 20;
constexpr uint32_t kMaxAgents = 1u << 16;

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<uint8_t>& out, double v) {
  const uint64_t bits = std::bit_cast<uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((bits >> (8 * i)) & 0xff));
}

struct Cursor {
  std::span<const uint8_t> data;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > data.size()) throw ProtocolError("truncated frame");
  }
  uint8_t u8() {
    need(1);
    return data[pos++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(data[pos] | (data[pos + 1] << 8));
    pos += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(data[pos + i]) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(bits);
  }
  void done() const {
    if (pos != data.size()) throw ProtocolError("trailing bytes in frame");
  }
};

void put_net(std::vector<uint8_t>& out, const Mlp& net) {
  put_u32(out, static_cast<uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    put_u32(out, static_cast<uint32_t>(layer.out));
    put_u32(out, static_cast<uint32_t>(layer.in));
  }
  for (const auto& layer : net.layers) {
    for (double w : layer.w) put_f64(out, w);
    for (double b : layer.b) put_f64(out, b);
  }
}

Mlp get_net(Cursor& cur, Head head) {
  const uint32_t layer_count = cur.u32();
  if (layer_count == 0 || layer_count > kMaxLayers) throw ProtocolError("bad layer count");
  Mlp net;
  net.head = head;
  net.layers.resize(layer_count);
  for (auto& layer : net.layers) {
    layer.out = static_cast<int>(cur.u32());
    layer.in = static_cast<int>(cur.u32());
    if (layer.out <= 0 || layer.in <= 0 || static_cast<uint32_t>(layer.out) > kMaxDim ||
        static_cast<uint32_t>(layer.in) > kMaxDim) {
      throw ProtocolError("bad layer shape");
    }
  }
  for (size_t k = 1; k < net.layers.size(); ++k) {
    if (net.layers[k].in != net.layers[k - 1].out) throw ProtocolError("layer shape mismatch");
  }
  for (auto& layer : net.layers) {
    layer.w.resize(static_cast<size_t>(layer.out) * static_cast<size_t>(layer.in));
    layer.b.resize(static_cast<size_t>(layer.out));
    for (double& w : layer.w) w = cur.f64();
    for (double& b : layer.b) b = cur.f64();
  }
  return net;
}

std::vector<uint8_t> header(MsgKind kind, uint32_t iteration) {
  std::vector<uint8_t> out;
  put_u16(out, kProtocolVersion);
  out.push_back(static_cast<uint8_t>(kind));
  put_u32(out, iteration);
  return out;
}

Cursor open_frame(std::span<const uint8_t> payload, MsgKind expected, uint32_t* iteration) {
  Cursor cur{payload};
  const uint16_t version = cur.u16();
  if (version != kProtocolVersion) {
    throw ProtocolError("unsupported protocol version " + std::to_string(version));
  }
  const uint8_t kind = cur.u8();
  if (kind != static_cast<uint8_t>(expected)) {
    throw ProtocolError("unexpected message kind " + std::to_string(kind));
  }
  const uint32_t iter = cur.u32();
  if (iteration != nullptr) *iteration = iter;
  return cur;
}

}  // namespace

std::vector<uint8_t> encode_params(const ParamsMsg& msg) {
  if (msg.entries.size() > kMaxAgents) throw ProtocolError("too many agents");
  std::vector<uint8_t> out = header(MsgKind::Params, msg.iteration);
  put_u32(out, static_cast<uint32_t>(msg.entries.size()));
  for (const auto& [policy, target] : msg.entries) {
    put_net(out, policy);
    put_net(out, target);
  }
  return out;
}

std::vector<uint8_t> encode_update(const UpdateMsg& msg) {
  std::vector<uint8_t> out = header(MsgKind::Update, msg.iteration);
  put_u32(out, msg.agent);
  put_net(out, msg.policy);
  put_net(out, msg.target);
  return out;
}

std::vector<uint8_t> encode_hello(uint32_t agent) {
  std::vector<uint8_t> out = header(MsgKind::Hello, 0);
  put_u32(out, agent);
  return out;
}

std::vector<uint8_t> encode_heartbeat(uint32_t iteration) {
  return header(MsgKind::Heartbeat, iteration);
}

std::vector<uint8_t> encode_shutdown() { return header(MsgKind::Shutdown, 0); }

MsgKind peek_kind(std::span<const uint8_t> payload) {
  Cursor cur{payload};
  const uint16_t version = cur.u16();
  if (version != kProtocolVersion) {
    throw ProtocolError("unsupported protocol version " + std::to_string(version));
  }
  const uint8_t kind = cur.u8();
  if (kind > static_cast<uint8_t>(MsgKind::Shutdown)) {
    throw ProtocolError("unknown message kind " + std::to_string(kind));
  }
  return static_cast<MsgKind>(kind);
}

uint32_t peek_iteration(std::span<const uint8_t> payload) {
  Cursor cur{payload};
  cur.u16();
  cur.u8();
  return cur.u32();
}

ParamsMsg decode_params(std::span<const uint8_t> payload, Head head) {
  ParamsMsg msg;
  Cursor cur = open_frame(payload, MsgKind::Params, &msg.iteration);
  const uint32_t count = cur.u32();
  if (count == 0 || count > kMaxAgents) throw ProtocolError("bad agent count");
  msg.entries.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    Mlp policy = get_net(cur, head);
    Mlp target = get_net(cur, head);
    msg.entries.emplace_back(std::move(policy), std::move(target));
  }
  cur.done();
  return msg;
}

UpdateMsg decode_update(std::span<const uint8_t> payload, Head head) {
  UpdateMsg msg;
  Cursor cur = open_frame(payload, MsgKind::Update, &msg.iteration);
  msg.agent = cur.u32();
  msg.policy = get_net(cur, head);
  msg.target = get_net(cur, head);
  cur.done();
  return msg;
}

uint32_t decode_hello(std::span<const uint8_t> payload) {
  Cursor cur = open_frame(payload, MsgKind::Hello, nullptr);
  const uint32_t agent = cur.u32();
  cur.done();
  return agent;
}

}  // namespace darl1n

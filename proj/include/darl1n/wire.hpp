#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "darl1n/mlp.hpp"

namespace darl1n {

// Message payloads exchanged between the controller and the learners. The
// transport frames each payload with a u32 little-endian byte length; inside,
// every payload starts with
//   u16 version | u8 kind | u32 iteration
// followed by a kind-specific body. Multi-byte integers and doubles are
// little-endian on the wire regardless of host order.
//
// Bodies:
//   Params:    u32 agent_count, then per agent (current net, frozen net)
//   Update:    u32 agent, current net, frozen net
//   Hello:     u32 agent
//   Heartbeat / Shutdown: empty
// Net layout: u32 layer_count, then per layer u32 out / u32 in, then per
// layer f64 weights (row-major) followed by f64 biases. Head kinds never
// cross the wire; both ends derive them from the environment.

constexpr uint16_t kProtocolVersion = 1;

enum class MsgKind : uint8_t {
  Heartbeat = 0,
  Params = 1,
  Update = 2,
  Hello = 3,
  Shutdown = 4,
};

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParamsMsg {
  uint32_t iteration = 0;
  // per agent: (current policy, frozen policy)
  std::vector<std::pair<Mlp, Mlp>> entries;
};

struct UpdateMsg {
  uint32_t iteration = 0;
  uint32_t agent = 0;
  Mlp policy;
  Mlp target;
};

std::vector<uint8_t> encode_params(const ParamsMsg& msg);
std::vector<uint8_t> encode_update(const UpdateMsg& msg);
std::vector<uint8_t> encode_hello(uint32_t agent);
std::vector<uint8_t> encode_heartbeat(uint32_t iteration);
std::vector<uint8_t> encode_shutdown();

MsgKind peek_kind(std::span<const uint8_t> payload);
uint32_t peek_iteration(std::span<const uint8_t> payload);

// `head` is applied to every decoded net (policies and their frozen copies).
ParamsMsg decode_params(std::span<const uint8_t> payload, Head head);
UpdateMsg decode_update(std::span<const uint8_t> payload, Head head);
uint32_t decode_hello(std::span<const uint8_t> payload);

}  // namespace darl1n

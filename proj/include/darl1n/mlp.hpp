#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "darl1n/rng.hpp"

namespace darl1n {

enum class Head {
  Linear,
  Tanh,     // componentwise, for box-valued actions
  Softmax,  // temperature 1, for discrete action distributions
};

// Fully-connected network with ReLU hidden layers. Plain vectors, row-major
// weights (out x in). The same struct doubles as a gradient / moment
// container via zeros_like, which keeps Adam and the wire codec trivial.
struct Mlp {
  struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // out*in, row-major
    std::vector<double> b;  // out
  };
  std::vector<Layer> layers;
  Head head = Head::Linear;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
  size_t param_count() const;
};

// dims = {in, hidden..., out}. Weights and biases are drawn uniformly from
// [-1/sqrt(fan_in), +1/sqrt(fan_in)], in layer order, weights before biases.
Mlp make_mlp(const std::vector<int>& dims, Head head, Rng& rng);

Mlp zeros_like(const Mlp& net);

// Intermediate activations captured by forward for use by backward.
struct ForwardCache {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;   // pre-activation per layer
  std::vector<std::vector<double>> post;  // post-activation per layer
};

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input,
                                ForwardCache* cache = nullptr);

struct BackwardResult {
  Mlp grads;                       // dLoss/dParams, same shape as the net
  std::vector<double> input_grad;  // dLoss/dInput
};

// upstream = dLoss/dOutput at the head output. The cache must come from a
// forward pass through this exact net shape.
BackwardResult mlp_backward(const Mlp& net, const ForwardCache& cache,
                            std::span<const double> upstream);

struct AdamState {
  Mlp m, v;
  long step = 0;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(const Mlp& net, double lr);

void adam_step(Mlp& params, const Mlp& grads, AdamState& state);

// target <- (1 - rate) * target + rate * online
void polyak_update(Mlp& target, const Mlp& online, double rate);

// into += scale * grads (batch-mean accumulation)
void accumulate(Mlp& into, const Mlp& grads, double scale);

// Fixed-width neighborhood encoding shared by critics and policies.
struct PadSpec {
  int max_neighbors = 0;
  int state_dim = 0;
  int action_dim = 0;  // 0 = encode states only (policy input)
};

// Layout: slot 0 is the subject agent, remaining slots are the other
// neighborhood members in ascending id order, then zero padding. Each slot is
// [state ; action]. Sorting happens here, so the encoding never depends on
// the order in which callers assembled the neighborhood.
std::vector<double> encode_neighborhood(std::span<const int> ids,
                                        std::span<const double> states_flat,
                                        std::span<const double> actions_flat,
                                        int subject, const PadSpec& pad);

inline int encoded_width(const PadSpec& pad) {
  return pad.max_neighbors * (pad.state_dim + pad.action_dim);
}

}  // namespace darl1n

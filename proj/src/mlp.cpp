#include "darl1n/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace darl1n {

namespace {

void check_finite(std::span<const double> xs, const char* what) {
  for (double x : xs)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite ") + what);
}

void apply_head(Head head, std::vector<double>& v) {
  switch (head) {
    case Head::Linear:
      return;
    case Head::Tanh:
      for (double& x : v) x = std::tanh(x);
      return;
    case Head::Softmax: {
      double mx = *std::max_element(v.begin(), v.end());
      double sum = 0.0;
      for (double& x : v) {
        x = std::exp(x - mx);
        sum += x;
      }
      for (double& x : v) x /= sum;
      return;
    }
  }
}

}  // namespace

size_t Mlp::param_count() const {
  size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

Mlp make_mlp(const std::vector<int>& dims, Head head, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("mlp needs at least in/out dims");
  for (int d : dims)
    if (d <= 0) throw std::invalid_argument("mlp dims must be positive");
  Mlp net;
  net.head = head;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    Mlp::Layer l;
    l.in = dims[i];
    l.out = dims[i + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    l.w.resize(static_cast<size_t>(l.in) * l.out);
    l.b.resize(l.out);
    for (double& w : l.w) w = rng.uniform(-bound, bound);
    for (double& b : l.b) b = rng.uniform(-bound, bound);
    net.layers.push_back(std::move(l));
  }
  return net;
}

Mlp zeros_like(const Mlp& net) {
  Mlp z;
  z.head = net.head;
  for (const auto& l : net.layers) {
    Mlp::Layer zl;
    zl.in = l.in;
    zl.out = l.out;
    zl.w.assign(l.w.size(), 0.0);
    zl.b.assign(l.b.size(), 0.0);
    z.layers.push_back(std::move(zl));
  }
  return z;
}

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input,
                                ForwardCache* cache) {
  if (net.layers.empty()) throw std::invalid_argument("empty mlp");
  if (static_cast<int>(input.size()) != net.input_dim())
    throw std::invalid_argument("mlp input size mismatch");
  check_finite(input, "mlp input");

  std::vector<double> cur(input.begin(), input.end());
  if (cache) {
    cache->input = cur;
    cache->pre.clear();
    cache->post.clear();
  }
  for (size_t li = 0; li < net.layers.size(); ++li) {
    const auto& l = net.layers[li];
    std::vector<double> next(l.out);
    for (int o = 0; o < l.out; ++o) {
      double acc = l.b[o];
      const double* row = &l.w[static_cast<size_t>(o) * l.in];
      for (int i = 0; i < l.in; ++i) acc += row[i] * cur[i];
      next[o] = acc;
    }
    if (cache) cache->pre.push_back(next);
    if (li + 1 < net.layers.size()) {
      for (double& x : next) x = std::max(0.0, x);  // ReLU on hidden layers
    } else {
      apply_head(net.head, next);
    }
    if (cache) cache->post.push_back(next);
    cur = std::move(next);
  }
  return cur;
}

BackwardResult mlp_backward(const Mlp& net, const ForwardCache& cache,
                            std::span<const double> upstream) {
  if (cache.pre.size() != net.layers.size() ||
      cache.post.size() != net.layers.size() ||
      static_cast<int>(cache.input.size()) != net.input_dim())
    throw std::invalid_argument("forward cache does not match this mlp");
  if (static_cast<int>(upstream.size()) != net.output_dim())
    throw std::invalid_argument("upstream gradient size mismatch");

  BackwardResult res;
  res.grads = zeros_like(net);

  // Gradient w.r.t. the final pre-activation.
  size_t last = net.layers.size() - 1;
  std::vector<double> delta(upstream.begin(), upstream.end());
  switch (net.head) {
    case Head::Linear:
      break;
    case Head::Tanh: {
      const auto& y = cache.post[last];
      for (size_t i = 0; i < delta.size(); ++i) delta[i] *= 1.0 - y[i] * y[i];
      break;
    }
    case Head::Softmax: {
      const auto& y = cache.post[last];
      double dot = 0.0;
      for (size_t i = 0; i < y.size(); ++i) dot += upstream[i] * y[i];
      for (size_t i = 0; i < delta.size(); ++i) delta[i] = y[i] * (upstream[i] - dot);
      break;
    }
  }

  for (size_t li = net.layers.size(); li-- > 0;) {
    const auto& l = net.layers[li];
    if (li != last) {
      // ReLU mask for hidden layers.
      const auto& pre = cache.pre[li];
      for (int o = 0; o < l.out; ++o)
        if (pre[o] <= 0.0) delta[o] = 0.0;
    }
    const std::vector<double>& below =
        (li == 0) ? cache.input : cache.post[li - 1];
    auto& gl = res.grads.layers[li];
    for (int o = 0; o < l.out; ++o) {
      gl.b[o] += delta[o];
      double* grow = &gl.w[static_cast<size_t>(o) * l.in];
      for (int i = 0; i < l.in; ++i) grow[i] += delta[o] * below[i];
    }
    std::vector<double> next_delta(l.in, 0.0);
    for (int o = 0; o < l.out; ++o) {
      const double* row = &l.w[static_cast<size_t>(o) * l.in];
      for (int i = 0; i < l.in; ++i) next_delta[i] += delta[o] * row[i];
    }
    delta = std::move(next_delta);
  }
  res.input_grad = std::move(delta);
  return res;
}

AdamState make_adam(const Mlp& net, double lr) {
  AdamState s;
  s.m = zeros_like(net);
  s.v = zeros_like(net);
  s.lr = lr;
  return s;
}

namespace {

void adam_apply(std::vector<double>& p, const std::vector<double>& g,
                std::vector<double>& m, std::vector<double>& v,
                const AdamState& s, double bc1, double bc2) {
  for (size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(g[i])) throw std::runtime_error("non-finite gradient");
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    p[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

void check_same_shape(const Mlp& a, const Mlp& b, const char* what) {
  bool ok = a.layers.size() == b.layers.size();
  for (size_t i = 0; ok && i < a.layers.size(); ++i)
    ok = a.layers[i].in == b.layers[i].in && a.layers[i].out == b.layers[i].out;
  if (!ok) throw std::invalid_argument(std::string("shape mismatch: ") + what);
}

}  // namespace

void adam_step(Mlp& params, const Mlp& grads, AdamState& state) {
  check_same_shape(params, grads, "adam gradients");
  check_same_shape(params, state.m, "adam moments");
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t li = 0; li < params.layers.size(); ++li) {
    adam_apply(params.layers[li].w, grads.layers[li].w, state.m.layers[li].w,
               state.v.layers[li].w, state, bc1, bc2);
    adam_apply(params.layers[li].b, grads.layers[li].b, state.m.layers[li].b,
               state.v.layers[li].b, state, bc1, bc2);
  }
}

void polyak_update(Mlp& target, const Mlp& online, double rate) {
  check_same_shape(target, online, "polyak");
  if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("polyak rate outside [0,1]");
  for (size_t li = 0; li < target.layers.size(); ++li) {
    auto& t = target.layers[li];
    const auto& o = online.layers[li];
    for (size_t i = 0; i < t.w.size(); ++i)
      t.w[i] = (1.0 - rate) * t.w[i] + rate * o.w[i];
    for (size_t i = 0; i < t.b.size(); ++i)
      t.b[i] = (1.0 - rate) * t.b[i] + rate * o.b[i];
  }
}

void accumulate(Mlp& into, const Mlp& grads, double scale) {
  check_same_shape(into, grads, "accumulate");
  for (size_t li = 0; li < into.layers.size(); ++li) {
    auto& t = into.layers[li];
    const auto& g = grads.layers[li];
    for (size_t i = 0; i < t.w.size(); ++i) t.w[i] += scale * g.w[i];
    for (size_t i = 0; i < t.b.size(); ++i) t.b[i] += scale * g.b[i];
  }
}

std::vector<double> encode_neighborhood(std::span<const int> ids,
                                        std::span<const double> states_flat,
                                        std::span<const double> actions_flat,
                                        int subject, const PadSpec& pad) {
  int n = static_cast<int>(ids.size());
  if (n == 0) throw std::invalid_argument("empty neighborhood");
  if (n > pad.max_neighbors)
    throw std::invalid_argument("neighborhood exceeds max_neighbors");
  if (static_cast<int>(states_flat.size()) != n * pad.state_dim)
    throw std::invalid_argument("states_flat size mismatch");
  bool with_actions = pad.action_dim > 0;
  if (with_actions && static_cast<int>(actions_flat.size()) != n * pad.action_dim)
    throw std::invalid_argument("actions_flat size mismatch");
  if (!with_actions && !actions_flat.empty())
    throw std::invalid_argument("actions passed but action_dim is 0");

  // Order: subject first, everyone else by ascending id.
  std::vector<int> order(n);
  for (int k = 0; k < n; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    bool sa = ids[a] == subject, sb = ids[b] == subject;
    if (sa != sb) return sa;
    return ids[a] < ids[b];
  });
  if (ids[order[0]] != subject)
    throw std::invalid_argument("subject not in neighborhood");
  for (int k = 0; k + 1 < n; ++k)
    if (ids[order[k]] == ids[order[k + 1]])
      throw std::invalid_argument("duplicate neighborhood id");

  int slot_width = pad.state_dim + pad.action_dim;
  std::vector<double> out(static_cast<size_t>(pad.max_neighbors) * slot_width, 0.0);
  for (int slot = 0; slot < n; ++slot) {
    int k = order[slot];
    double* dst = &out[static_cast<size_t>(slot) * slot_width];
    const double* src_s = &states_flat[static_cast<size_t>(k) * pad.state_dim];
    std::copy(src_s, src_s + pad.state_dim, dst);
    if (with_actions) {
      const double* src_a = &actions_flat[static_cast<size_t>(k) * pad.action_dim];
      std::copy(src_a, src_a + pad.action_dim, dst + pad.state_dim);
    }
  }
  return out;
}

}  // namespace darl1n

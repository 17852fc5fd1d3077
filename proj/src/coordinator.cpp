#include "darl1n/coordinator.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <string>
#include <thread>

#include "darl1n/rng.hpp"
#include "darl1n/wire.hpp"

namespace darl1n {
namespace {

using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_policy_shape(const Mlp& net, const NetSpec& spec, const char* what) {
  const std::vector<int>& dims = spec.policy_dims;
  if (net.layers.size() + 1 != dims.size()) {
    throw ProtocolError(std::string(what) + ": wrong layer count");
  }
  for (size_t k = 0; k < net.layers.size(); ++k) {
    if (net.layers[k].in != dims[k] || net.layers[k].out != dims[k + 1]) {
      throw ProtocolError(std::string(what) + ": layer shape mismatch");
    }
  }
}

}  // namespace

ParamTable initial_param_table(const Environment& env, uint64_t run_seed) {
  const NetSpec spec = make_net_spec(env);
  ParamTable table;
  const int agents = env.config().agents;
  table.policies.reserve(agents);
  table.targets.reserve(agents);
  for (int m = 0; m < agents; ++m) {
    Mlp policy = init_policy(spec, run_seed, m);
    table.targets.push_back(policy);
    table.policies.push_back(std::move(policy));
  }
  return table;
}

std::vector<double> neighborhood_features(const Environment& env, const Neighborhood& hood) {
  const int fdim = env.feature_dim();
  std::vector<double> out(hood.ids.size() * static_cast<size_t>(fdim));
  for (size_t k = 0; k < hood.ids.size(); ++k) {
    env.write_features(*hood.states[k], out.data() + k * static_cast<size_t>(fdim));
  }
  return out;
}

double evaluate_policies(const Environment& env, const NetSpec& spec, const ParamTable& table,
                         const RunConfig& cfg) {
  const int agents = env.config().agents;
  if (static_cast<int>(table.policies.size()) != agents) {
    throw std::invalid_argument("param table does not cover every agent");
  }
  const ActionProvider provider = [&](const WorldState& world) {
    std::vector<std::vector<double>> actions(agents);
    for (int j = 0; j < agents; ++j) {
      const Neighborhood hood = env.local_view(world, j);
      const std::vector<double> feats = neighborhood_features(env, hood);
      actions[j] = policy_action(table.policies[j], spec,
                                 std::span<const int32_t>(hood.ids.data(), hood.ids.size()),
                                 feats, j);
    }
    return actions;
  };
  const uint64_t eval_seed = derive_stream(cfg.seed, stream::kEval, 0);
  const std::vector<double> totals = rollout_totals(env, provider, eval_seed, cfg.eval_episodes);
  double sum = 0.0;
  for (double v : totals) sum += v;
  return sum / static_cast<double>(totals.size());
}

void run_learner_endpoint(std::shared_ptr<const Environment> env, const RunConfig& cfg, int agent,
                          Channel& channel) {
  Learner learner(env, make_learner_config(cfg, agent));
  const int agents = env->config().agents;
  channel.send(encode_hello(static_cast<uint32_t>(agent)));
  uint32_t last_iteration = 0;
  std::vector<uint8_t> payload;
  while (true) {
    const RecvStatus st = channel.recv(payload, milliseconds(5000));
    if (st == RecvStatus::Closed) return;
    if (st == RecvStatus::Timeout) {
      // liveness ping; a failed send means the controller is gone
      try {
        channel.send(encode_heartbeat(last_iteration));
      } catch (...) {
        return;
      }
      continue;
    }
    switch (peek_kind(payload)) {
      case MsgKind::Shutdown:
        return;
      case MsgKind::Heartbeat:
        continue;
      case MsgKind::Params: {
        ParamsMsg msg = decode_params(payload, learner.spec().policy_head);
        if (static_cast<int>(msg.entries.size()) != agents) {
          throw ProtocolError("parameter table covers " + std::to_string(msg.entries.size()) +
                              " agents, expected " + std::to_string(agents));
        }
        last_iteration = msg.iteration;
        ParamTable table;
        table.policies.reserve(msg.entries.size());
        table.targets.reserve(msg.entries.size());
        for (auto& [policy, target] : msg.entries) {
          table.policies.push_back(std::move(policy));
          table.targets.push_back(std::move(target));
        }
        learner.install(std::move(table));
        const Learner::IterationResult result = learner.run_iteration(msg.iteration);
        UpdateMsg update;
        update.iteration = msg.iteration;
        update.agent = static_cast<uint32_t>(agent);
        update.policy = result.policy;
        update.target = result.target_policy;
        channel.send(encode_update(update));
        break;
      }
      default:
        throw ProtocolError("learner received unexpected message kind");
    }
  }
}

Controller::Controller(std::shared_ptr<const Environment> env, RunConfig cfg,
                       std::vector<std::shared_ptr<Channel>> channels)
    : env_(std::move(env)), cfg_(std::move(cfg)), spec_(make_net_spec(*env_)) {
  const int agents = env_->config().agents;
  if (static_cast<int>(channels.size()) != agents) {
    throw std::invalid_argument("need one channel per agent");
  }
  by_agent_.assign(agents, nullptr);
  // Learners may dial in any order; their first frame states who they are.
  std::vector<uint8_t> payload;
  for (const auto& channel : channels) {
    if (channel == nullptr) throw std::invalid_argument("null channel");
    const RecvStatus st = channel->recv(payload, milliseconds(cfg_.collect_timeout_ms));
    if (st != RecvStatus::Ok) throw ProtocolError("learner never announced itself");
    const uint32_t agent = decode_hello(payload);
    if (agent >= static_cast<uint32_t>(agents)) {
      throw ProtocolError("announcement from out-of-range agent " + std::to_string(agent));
    }
    if (by_agent_[agent] != nullptr) {
      throw ProtocolError("two announcements for agent " + std::to_string(agent));
    }
    by_agent_[agent] = channel;
  }
  table_ = initial_param_table(*env_, cfg_.seed);
}

void Controller::broadcast(uint32_t iteration) {
  ParamsMsg msg;
  msg.iteration = iteration;
  msg.entries.reserve(table_.policies.size());
  for (size_t m = 0; m < table_.policies.size(); ++m) {
    msg.entries.emplace_back(table_.policies[m], table_.targets[m]);
  }
  const std::vector<uint8_t> frame = encode_params(msg);
  for (const auto& channel : by_agent_) channel->send(frame);
}

void Controller::collect(uint32_t iteration) {
  const int agents = static_cast<int>(by_agent_.size());
  std::vector<bool> have(agents, false);
  int missing = agents;
  const auto deadline = Clock::now() + milliseconds(cfg_.collect_timeout_ms);
  std::vector<uint8_t> payload;

  const auto handle = [&](int agent, const std::vector<uint8_t>& frame) {
    switch (peek_kind(frame)) {
      case MsgKind::Heartbeat:
        return;
      case MsgKind::Update: {
        if (peek_iteration(frame) != iteration) {
          // a retried frame from an already-finished iteration; ignore
          if (peek_iteration(frame) < iteration) return;
          throw ProtocolError("update for future iteration " +
                              std::to_string(peek_iteration(frame)));
        }
        if (have[agent]) return;  // duplicate for this iteration
        UpdateMsg msg = decode_update(frame, spec_.policy_head);
        if (msg.agent != static_cast<uint32_t>(agent)) {
          throw ProtocolError("update from agent " + std::to_string(msg.agent) +
                              " on agent " + std::to_string(agent) + "'s channel");
        }
        check_policy_shape(msg.policy, spec_, "policy update");
        check_policy_shape(msg.target, spec_, "frozen policy update");
        table_.policies[agent] = std::move(msg.policy);
        table_.targets[agent] = std::move(msg.target);
        have[agent] = true;
        --missing;
        return;
      }
      default:
        throw ProtocolError("controller received unexpected message kind");
    }
  };

  while (missing > 0) {
    bool progress = false;
    int first_pending = -1;
    for (int agent = 0; agent < agents; ++agent) {
      if (have[agent]) continue;
      if (first_pending < 0) first_pending = agent;
      const RecvStatus st = by_agent_[agent]->recv(payload, milliseconds(0));
      if (st == RecvStatus::Closed) {
        throw std::runtime_error("agent " + std::to_string(agent) + " disconnected");
      }
      if (st == RecvStatus::Ok) {
        handle(agent, payload);
        progress = true;
      }
    }
    if (missing == 0) break;
    if (!progress) {
      if (Clock::now() >= deadline) {
        std::string who;
        for (int agent = 0; agent < agents; ++agent) {
          if (!have[agent]) who += (who.empty() ? "" : ", ") + std::to_string(agent);
        }
        throw std::runtime_error("timed out waiting for updates from agents: " + who);
      }
      const RecvStatus st = by_agent_[first_pending]->recv(payload, milliseconds(25));
      if (st == RecvStatus::Closed) {
        throw std::runtime_error("agent " + std::to_string(first_pending) + " disconnected");
      }
      if (st == RecvStatus::Ok) handle(first_pending, payload);
    }
  }
}

TrainResult Controller::train() {
  TrainResult result;
  std::vector<double> rewards;
  const auto t0 = Clock::now();
  for (int iter = 0; iter < cfg_.max_iterations; ++iter) {
    const auto collect_start = Clock::now();
    broadcast(static_cast<uint32_t>(iter));
    collect(static_cast<uint32_t>(iter));
    const double collect_s = seconds_since(collect_start);

    if ((iter + 1) % cfg_.eval_every != 0) continue;
    const auto update_start = Clock::now();
    const double reward = evaluate_policies(*env_, spec_, table_, cfg_);
    const double update_s = seconds_since(update_start);

    MetricsRow row;
    row.iteration = static_cast<uint32_t>(iter + 1);
    row.seconds = seconds_since(t0);
    row.avg_total_reward = reward;
    row.collect_s = collect_s;
    row.update_s = update_s;
    result.metrics.push_back(row);
    rewards.push_back(reward);

    if (!result.converged_at.has_value()) {
      result.converged_at = detect_convergence(
          rewards, static_cast<size_t>(cfg_.convergence_window), cfg_.convergence_ratio);
      if (result.converged_at.has_value() && cfg_.stop_on_convergence) break;
    }
  }
  const std::vector<uint8_t> bye = encode_shutdown();
  for (const auto& channel : by_agent_) channel->send(bye);
  result.params = table_;
  return result;
}

TrainResult run_training(const RunConfig& cfg) {
  if (cfg.algorithm != "darl1n") {
    throw std::invalid_argument("run_training drives the distributed trainer only");
  }
  const std::shared_ptr<Environment> env = make_environment(finalize_env_config(make_env_config(cfg)));
  const int agents = cfg.agents;

  std::vector<std::shared_ptr<Channel>> controller_side(agents);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> learner_errors(agents);

  const auto learner_main = [&, env](int agent, std::shared_ptr<Channel> channel) {
    try {
      run_learner_endpoint(env, cfg, agent, *channel);
    } catch (...) {
      learner_errors[agent] = std::current_exception();
    }
    channel->close();
  };

  if (cfg.transport == "inproc") {
    for (int agent = 0; agent < agents; ++agent) {
      auto [controller_end, learner_end] = make_inproc_pair();
      controller_side[agent] = controller_end;
      threads.emplace_back(learner_main, agent, learner_end);
    }
  } else {
    const size_t colon = cfg.listen.find(':');
    const std::string host = cfg.listen.substr(0, colon);
    const uint16_t requested = static_cast<uint16_t>(std::stoi(cfg.listen.substr(colon + 1)));
    TcpListener listener(host, requested);
    const uint16_t port = listener.port();
    for (int agent = 0; agent < agents; ++agent) {
      threads.emplace_back([&, agent, host, port] {
        std::shared_ptr<Channel> channel;
        try {
          channel = tcp_connect(host, port, milliseconds(10000));
        } catch (...) {
          learner_errors[agent] = std::current_exception();
          return;
        }
        learner_main(agent, channel);
      });
    }
    for (int agent = 0; agent < agents; ++agent) {
      controller_side[agent] = listener.accept(milliseconds(10000));
      if (controller_side[agent] == nullptr) {
        for (auto& ch : controller_side) {
          if (ch) ch->close();
        }
        for (auto& t : threads) t.join();
        throw std::runtime_error("learners failed to dial in");
      }
    }
  }

  TrainResult result;
  std::exception_ptr controller_error;
  try {
    Controller controller(env, cfg, controller_side);
    result = controller.train();
  } catch (...) {
    controller_error = std::current_exception();
  }
  for (auto& channel : controller_side) {
    if (channel) channel->close();
  }
  for (auto& t : threads) t.join();
  if (controller_error) std::rethrow_exception(controller_error);
  for (const auto& err : learner_errors) {
    if (err) std::rethrow_exception(err);
  }
  return result;
}

}  // namespace darl1n

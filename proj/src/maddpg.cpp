#include "darl1n/maddpg.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

namespace darl1n {

CentralBuffer::CentralBuffer(size_t capacity) : cap_(capacity) {
  if (capacity == 0) throw std::invalid_argument("buffer capacity must be positive");
}

void CentralBuffer::push(CentralRecord rec) {
  if (ring_.size() < cap_) {
    ring_.push_back(std::move(rec));
    return;
  }
  ring_[head_] = std::move(rec);
  head_ = (head_ + 1) % cap_;
}

const CentralRecord& CentralBuffer::at(size_t idx) const {
  if (idx >= ring_.size()) throw std::out_of_range("buffer index out of range");
  return ring_[idx];
}

InteractionRecord central_to_record(const CentralRecord& rec, int agent, int agents, int fdim,
                                    int adim) {
  if (agent < 0 || agent >= agents) throw std::invalid_argument("agent out of range");
  if (rec.states.size() != size_t(agents) * size_t(fdim) ||
      rec.actions.size() != size_t(agents) * size_t(adim) ||
      rec.rewards.size() != size_t(agents) ||
      rec.next_states.size() != size_t(agents) * size_t(fdim)) {
    throw std::invalid_argument("joint record dimensions do not match the environment");
  }
  InteractionRecord out;
  out.agent = agent;
  out.nbr_ids.resize(size_t(agents));
  for (int j = 0; j < agents; ++j) out.nbr_ids[size_t(j)] = j;
  out.nbr_feats = rec.states;
  out.nbr_actions = rec.actions;
  out.reward = rec.rewards[size_t(agent)];
  out.next_ids = out.nbr_ids;
  // every member's own "neighborhood" is again the full roster
  out.next_hood_offsets.push_back(0);
  for (int j = 0; j < agents; ++j) {
    out.next_hood_ids.insert(out.next_hood_ids.end(), out.nbr_ids.begin(), out.nbr_ids.end());
    out.next_hood_feats.insert(out.next_hood_feats.end(), rec.next_states.begin(),
                               rec.next_states.end());
    out.next_hood_offsets.push_back(int32_t(out.next_hood_ids.size()));
  }
  return out;
}

CentralTrainer::CentralTrainer(std::shared_ptr<const Environment> env, RunConfig cfg)
    : env_(std::move(env)),
      cfg_(std::move(cfg)),
      lc_(make_learner_config(cfg_, 0)),
      spec_(make_net_spec(*env_, env_->config().agents)),
      buffer_(cfg_.buffer) {
  const int agents = env_->config().agents;
  table_.policies.reserve(agents);
  table_.targets.reserve(agents);
  critics_.reserve(agents);
  target_critics_.reserve(agents);
  for (int m = 0; m < agents; ++m) {
    Mlp policy = init_policy(spec_, cfg_.seed, m);
    table_.targets.push_back(policy);
    table_.policies.push_back(std::move(policy));
    critics_.push_back(init_critic(spec_, cfg_.seed, m));
    target_critics_.push_back(critics_.back());
    critic_opts_.push_back(make_adam(critics_.back(), cfg_.lr));
    policy_opts_.push_back(make_adam(init_policy(spec_, cfg_.seed, m), cfg_.lr));
  }
}

const Mlp& CentralTrainer::critic(int agent) const {
  if (agent < 0 || agent >= int(critics_.size())) throw std::out_of_range("agent out of range");
  return critics_[size_t(agent)];
}

CentralRecord CentralTrainer::collect_joint(Rng& rng) const {
  const int agents = env_->config().agents;
  const int fdim = env_->feature_dim();
  const int adim = env_->action_dim();
  const WorldState world = env_->sample_world(rng);

  CentralRecord rec;
  rec.states.resize(size_t(agents) * size_t(fdim));
  for (int j = 0; j < agents; ++j) {
    env_->write_features(world.agents[size_t(j)], &rec.states[size_t(j) * size_t(fdim)]);
  }

  // policies read the whole roster with themselves in the subject slot
  std::vector<int32_t> everyone(static_cast<size_t>(agents));
  for (int j = 0; j < agents; ++j) everyone[size_t(j)] = j;
  std::vector<std::vector<double>> actions(static_cast<size_t>(agents));
  rec.actions.resize(size_t(agents) * size_t(adim));
  for (int j = 0; j < agents; ++j) {
    actions[size_t(j)] = policy_action(table_.policies[size_t(j)], spec_, everyone, rec.states, j);
    add_exploration_noise(actions[size_t(j)], env_->action_space(), cfg_.explore_sigma, rng);
    std::copy(actions[size_t(j)].begin(), actions[size_t(j)].end(),
              rec.actions.begin() + size_t(j) * size_t(adim));
  }

  // rewards stay local even here; each agent is paid on its one-hop view
  rec.rewards.resize(size_t(agents));
  for (int i = 0; i < agents; ++i) {
    const Neighborhood view = env_->local_view(world, i);
    std::vector<std::vector<double>> view_actions;
    view_actions.reserve(view.ids.size());
    for (int j : view.ids) view_actions.push_back(actions[size_t(j)]);
    rec.rewards[size_t(i)] = env_->reward(i, view, view_actions, world.furniture);
  }

  // simultaneous transition of everyone from time-t views; no furniture
  // refresh, matching the per-record collection of the distributed learner
  WorldState stepped = world;
  for (int j = 0; j < agents; ++j) {
    const Neighborhood view = env_->local_view(world, j);
    stepped.agents[size_t(j)] =
        env_->transition_agent(j, view, actions[size_t(j)], world.furniture, rng);
  }
  rec.next_states.resize(size_t(agents) * size_t(fdim));
  for (int j = 0; j < agents; ++j) {
    env_->write_features(stepped.agents[size_t(j)], &rec.next_states[size_t(j) * size_t(fdim)]);
  }
  return rec;
}

double CentralTrainer::run_iteration(uint32_t iteration) {
  const int agents = env_->config().agents;
  const int fdim = env_->feature_dim();
  const int adim = env_->action_dim();
  Rng rng(derive_stream(cfg_.seed, 0, iteration));
  const int stride = std::max(1, lc_.records_per_iteration / lc_.updates_per_iteration);
  double last_loss = 0.0;
  for (int n = 1; n <= lc_.records_per_iteration; ++n) {
    buffer_.push(collect_joint(rng));
    if (n % stride != 0 || buffer_.size() < size_t(lc_.batch)) continue;
    std::vector<size_t> indices(size_t(lc_.batch));
    for (auto& idx : indices) idx = rng.pick(buffer_.size());
    for (int i = 0; i < agents; ++i) {
      std::vector<InteractionRecord> batch;
      batch.reserve(indices.size());
      for (size_t idx : indices) {
        batch.push_back(central_to_record(buffer_.at(idx), i, agents, fdim, adim));
      }
      std::vector<const InteractionRecord*> ptrs;
      ptrs.reserve(batch.size());
      for (const auto& rec : batch) ptrs.push_back(&rec);
      last_loss = critic_update_batch(critics_[size_t(i)], critic_opts_[size_t(i)], spec_,
                                      cfg_.gamma, ptrs, table_.targets, target_critics_[size_t(i)]);
      actor_update_batch(table_.policies[size_t(i)], policy_opts_[size_t(i)], critics_[size_t(i)],
                         spec_, ptrs, i);
      polyak_update(target_critics_[size_t(i)], critics_[size_t(i)], cfg_.polyak);
      polyak_update(table_.targets[size_t(i)], table_.policies[size_t(i)], cfg_.polyak);
    }
  }
  return last_loss;
}

double evaluate_joint_policies(const Environment& env, const NetSpec& spec,
                               const ParamTable& table, const RunConfig& cfg) {
  const int agents = env.config().agents;
  const int fdim = env.feature_dim();
  std::vector<int32_t> everyone(static_cast<size_t>(agents));
  for (int j = 0; j < agents; ++j) everyone[size_t(j)] = j;
  const ActionProvider provider = [&](const WorldState& world) {
    std::vector<double> feats(size_t(agents) * size_t(fdim));
    for (int j = 0; j < agents; ++j) {
      env.write_features(world.agents[size_t(j)], &feats[size_t(j) * size_t(fdim)]);
    }
    std::vector<std::vector<double>> actions(static_cast<size_t>(agents));
    for (int j = 0; j < agents; ++j) {
      actions[size_t(j)] = policy_action(table.policies[size_t(j)], spec, everyone, feats, j);
    }
    return actions;
  };
  const uint64_t eval_seed = derive_stream(cfg.seed, stream::kEval, 0);
  const std::vector<double> totals = rollout_totals(env, provider, eval_seed, cfg.eval_episodes);
  double sum = 0.0;
  for (double v : totals) sum += v;
  return sum / double(totals.size());
}

double CentralTrainer::evaluate() const {
  return evaluate_joint_policies(*env_, spec_, table_, cfg_);
}

TrainResult run_central_training(const RunConfig& cfg) {
  if (cfg.algorithm != "maddpg") {
    throw std::invalid_argument("run_central_training drives the centralized baseline only");
  }
  const std::shared_ptr<Environment> env =
      make_environment(finalize_env_config(make_env_config(cfg)));
  CentralTrainer trainer(env, cfg);

  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  TrainResult result;
  std::vector<double> rewards;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const auto train_start = Clock::now();
    trainer.run_iteration(uint32_t(iter));
    const double collect_s = std::chrono::duration<double>(Clock::now() - train_start).count();

    if ((iter + 1) % cfg.eval_every != 0) continue;
    const auto eval_start = Clock::now();
    const double reward = trainer.evaluate();
    const double update_s = std::chrono::duration<double>(Clock::now() - eval_start).count();

    MetricsRow row;
    row.iteration = uint32_t(iter + 1);
    row.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    row.avg_total_reward = reward;
    row.collect_s = collect_s;
    row.update_s = update_s;
    result.metrics.push_back(row);
    rewards.push_back(reward);

    if (!result.converged_at.has_value()) {
      result.converged_at = detect_convergence(rewards, size_t(cfg.convergence_window),
                                               cfg.convergence_ratio);
      if (result.converged_at.has_value() && cfg.stop_on_convergence) break;
    }
  }
  result.params = trainer.table();
  return result;
}

}  // namespace darl1n

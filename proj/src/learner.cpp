#include "darl1n/learner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace darl1n {

ReplayBuffer::ReplayBuffer(size_t capacity) : cap_(capacity) {
  if (capacity == 0) throw std::invalid_argument("buffer capacity must be positive");
}

void ReplayBuffer::push(InteractionRecord rec) {
  if (ring_.size() < cap_) {
    ring_.push_back(std::move(rec));
  } else {
    ring_[head_] = std::move(rec);
    head_ = (head_ + 1) % cap_;
  }
}

const InteractionRecord& ReplayBuffer::at(size_t idx) const {
  if (idx >= ring_.size()) throw std::out_of_range("replay index out of range");
  return ring_[idx];
}

NetSpec make_net_spec(const Environment& env) {
  return make_net_spec(env, env.max_neighbors());
}

NetSpec make_net_spec(const Environment& env, int max_neighbors) {
  NetSpec spec;
  spec.critic_pad = PadSpec{max_neighbors, env.feature_dim(), env.action_dim()};
  spec.policy_pad = PadSpec{max_neighbors, env.feature_dim(), 0};
  spec.critic_dims = {encoded_width(spec.critic_pad), 64, 64, 64, 1};
  spec.policy_dims = {encoded_width(spec.policy_pad), 64, 64, 64,
                      env.action_dim()};
  spec.policy_head = env.action_space() == ActionSpace::DiscreteSpin
                         ? Head::Softmax
                         : Head::Tanh;
  return spec;
}

Mlp init_policy(const NetSpec& spec, uint64_t run_seed, int agent) {
  Rng rng(derive_stream(run_seed, uint64_t(agent), stream::kPolicyInit));
  return make_mlp(spec.policy_dims, spec.policy_head, rng);
}

Mlp init_critic(const NetSpec& spec, uint64_t run_seed, int agent) {
  Rng rng(derive_stream(run_seed, uint64_t(agent), stream::kCriticInit));
  return make_mlp(spec.critic_dims, Head::Linear, rng);
}

std::vector<double> policy_action(const Mlp& policy, const NetSpec& spec,
                                  std::span<const int32_t> ids,
                                  std::span<const double> feats_flat,
                                  int subject) {
  auto enc = encode_neighborhood(ids, feats_flat, {}, subject, spec.policy_pad);
  return mlp_forward(policy, enc);
}

void add_exploration_noise(std::vector<double>& action, ActionSpace space,
                           double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("noise scale must be nonnegative");
  for (double& a : action) a += sigma * rng.gaussian();
  if (space == ActionSpace::VelocityBox) {
    for (double& a : action) a = std::min(1.0, std::max(-1.0, a));
    return;
  }
  double sum = 0.0;
  for (double& a : action) {
    a = std::max(0.0, a);
    sum += a;
  }
  if (sum <= 0.0) {
    for (double& a : action) a = 1.0 / double(action.size());
  } else {
    for (double& a : action) a /= sum;
  }
}

namespace {

// Per-member one-hop block of the next-state side of a record.
struct NextBlock {
  std::span<const int32_t> ids;
  std::span<const double> feats;
};

NextBlock next_block(const InteractionRecord& rec, size_t k, int fdim) {
  size_t lo = size_t(rec.next_hood_offsets.at(k));
  size_t hi = size_t(rec.next_hood_offsets.at(k + 1));
  if (hi < lo || hi > rec.next_hood_ids.size())
    throw std::invalid_argument("corrupt next-neighborhood offsets");
  return {std::span(rec.next_hood_ids).subspan(lo, hi - lo),
          std::span(rec.next_hood_feats).subspan(lo * fdim, (hi - lo) * fdim)};
}

// Next-state critic input: frozen-policy actions for every member of the
// new neighborhood, each computed on that member's own one-hop block.
std::vector<double> next_critic_input(const InteractionRecord& rec,
                                      const NetSpec& spec,
                                      const std::vector<Mlp>& target_policies) {
  int fdim = spec.critic_pad.state_dim;
  int adim = spec.critic_pad.action_dim;
  size_t n = rec.next_ids.size();
  if (rec.next_hood_offsets.size() != n + 1)
    throw std::invalid_argument("corrupt next-neighborhood offsets");
  std::vector<double> feats(n * fdim), actions(n * adim);
  for (size_t k = 0; k < n; ++k) {
    int32_t j = rec.next_ids[k];
    NextBlock block = next_block(rec, k, fdim);
    auto a = policy_action(target_policies.at(size_t(j)), spec, block.ids,
                           block.feats, j);
    std::copy(a.begin(), a.end(), actions.begin() + k * adim);
    bool found = false;
    for (size_t b = 0; b < block.ids.size(); ++b) {
      if (block.ids[b] == j) {
        std::copy(block.feats.begin() + b * fdim,
                  block.feats.begin() + (b + 1) * fdim,
                  feats.begin() + k * fdim);
        found = true;
      }
    }
    if (!found)
      throw std::invalid_argument("next-neighborhood block missing its owner");
  }
  return encode_neighborhood(rec.next_ids, feats, actions, rec.agent,
                             spec.critic_pad);
}

}  // namespace

double td_target(const InteractionRecord& rec, const NetSpec& spec,
                 const std::vector<Mlp>& target_policies,
                 const Mlp& target_critic, double gamma) {
  if (gamma <= 0.0 || gamma >= 1.0)
    throw std::invalid_argument("discount must lie in (0,1)");
  auto enc = next_critic_input(rec, spec, target_policies);
  double v = mlp_forward(target_critic, enc)[0];
  return rec.reward + gamma * v;
}

Mlp critic_batch_gradient(const Mlp& critic, const NetSpec& spec, double gamma,
                          std::span<const InteractionRecord* const> batch,
                          const std::vector<Mlp>& target_policies,
                          const Mlp& target_critic, double* loss_out) {
  if (batch.empty()) throw std::invalid_argument("empty update batch");
  double inv = 1.0 / double(batch.size());
  Mlp grads = zeros_like(critic);
  double loss = 0.0;
  for (const InteractionRecord* rec : batch) {
    double y = td_target(*rec, spec, target_policies, target_critic, gamma);
    auto enc = encode_neighborhood(rec->nbr_ids, rec->nbr_feats,
                                   rec->nbr_actions, rec->agent, spec.critic_pad);
    ForwardCache cache;
    double q = mlp_forward(critic, enc, &cache)[0];
    if (!std::isfinite(q) || !std::isfinite(y))
      throw std::runtime_error("critic produced a non-finite value");
    double err = q - y;
    loss += err * err * inv;
    std::vector<double> upstream = {2.0 * err * inv};
    auto back = mlp_backward(critic, cache, upstream);
    accumulate(grads, back.grads, 1.0);
  }
  if (loss_out) *loss_out = loss;
  return grads;
}

Mlp actor_batch_gradient(const Mlp& policy, const Mlp& critic,
                         const NetSpec& spec,
                         std::span<const InteractionRecord* const> batch,
                         int agent) {
  if (batch.empty()) throw std::invalid_argument("empty update batch");
  double inv = 1.0 / double(batch.size());
  int adim = spec.critic_pad.action_dim;
  int fdim = spec.critic_pad.state_dim;
  Mlp grads = zeros_like(policy);
  for (const InteractionRecord* rec : batch) {
    if (rec->agent != agent)
      throw std::invalid_argument("record belongs to a different agent");
    auto penc = encode_neighborhood(rec->nbr_ids, rec->nbr_feats, {}, agent,
                                    spec.policy_pad);
    ForwardCache pcache;
    auto own_action = mlp_forward(policy, penc, &pcache);

    // splice the fresh action into the stored joint action row
    auto row = std::find(rec->nbr_ids.begin(), rec->nbr_ids.end(), agent);
    size_t r = size_t(row - rec->nbr_ids.begin());
    std::vector<double> actions = rec->nbr_actions;
    std::copy(own_action.begin(), own_action.end(), actions.begin() + r * adim);

    auto cenc = encode_neighborhood(rec->nbr_ids, rec->nbr_feats, actions,
                                    agent, spec.critic_pad);
    ForwardCache ccache;
    mlp_forward(critic, cenc, &ccache);
    std::vector<double> upstream = {1.0};
    auto cback = mlp_backward(critic, ccache, upstream);
    // subject sits in slot 0: gradient w.r.t. its action starts after its state
    std::span<const double> dq(&cback.input_grad[fdim], size_t(adim));
    std::vector<double> pup(dq.begin(), dq.end());
    auto pback = mlp_backward(policy, pcache, pup);
    accumulate(grads, pback.grads, -inv);  // ascend the critic's value
  }
  return grads;
}

double critic_update_batch(Mlp& critic, AdamState& opt, const NetSpec& spec,
                           double gamma,
                           std::span<const InteractionRecord* const> batch,
                           const std::vector<Mlp>& target_policies,
                           const Mlp& target_critic) {
  double loss = 0.0;
  Mlp grads = critic_batch_gradient(critic, spec, gamma, batch,
                                    target_policies, target_critic, &loss);
  adam_step(critic, grads, opt);
  return loss;
}

void actor_update_batch(Mlp& policy, AdamState& opt, const Mlp& critic,
                        const NetSpec& spec,
                        std::span<const InteractionRecord* const> batch,
                        int agent) {
  Mlp grads = actor_batch_gradient(policy, critic, spec, batch, agent);
  adam_step(policy, grads, opt);
}

Learner::Learner(std::shared_ptr<const Environment> env, LearnerConfig cfg)
    : env_(std::move(env)), cfg_(cfg), spec_(make_net_spec(*env_)),
      buffer_(cfg.buffer_capacity) {
  if (cfg_.agent < 0 || cfg_.agent >= env_->agents())
    throw std::invalid_argument("learner agent id out of range");
  if (cfg_.gamma <= 0.0 || cfg_.gamma >= 1.0)
    throw std::invalid_argument("discount must lie in (0,1)");
  if (cfg_.polyak < 0.0 || cfg_.polyak > 1.0)
    throw std::invalid_argument("polyak rate outside [0,1]");
  if (cfg_.batch < 1 || cfg_.records_per_iteration < 1 ||
      cfg_.updates_per_iteration < 1)
    throw std::invalid_argument("batch and schedule sizes must be positive");
  critic_ = init_critic(spec_, cfg_.seed, cfg_.agent);
  target_critic_ = critic_;
  critic_opt_ = make_adam(critic_, cfg_.lr);
  policy_opt_ = make_adam(init_policy(spec_, cfg_.seed, cfg_.agent), cfg_.lr);
}

void Learner::install(ParamTable table) {
  size_t m = size_t(env_->agents());
  if (table.policies.size() != m || table.targets.size() != m)
    throw std::invalid_argument("parameter table has wrong agent count");
  for (const auto& p : table.policies)
    if (p.input_dim() != encoded_width(spec_.policy_pad))
      throw std::invalid_argument("policy input width does not match environment");
  table_ = std::move(table);
  installed_ = true;
}

const Mlp& Learner::policy() const {
  if (!installed_) throw std::runtime_error("no parameters installed");
  return table_.policies[size_t(cfg_.agent)];
}

const Mlp& Learner::target_policy() const {
  if (!installed_) throw std::runtime_error("no parameters installed");
  return table_.targets[size_t(cfg_.agent)];
}

InteractionRecord Learner::collect_interaction(Rng& rng,
                                               CollectTrace* trace) const {
  if (!installed_) throw std::runtime_error("no parameters installed");
  const GraphConfig& g = env_->graph();
  const int i = cfg_.agent;
  const int fdim = env_->feature_dim();
  const int adim = env_->action_dim();

  WorldState world = env_->sample_world(rng);
  NeighborSets sets = neighbor_sets(world.agents, g, i);

  // Actions are drawn lazily but always in ascending id order within each
  // phase, so the rng consumption is a pure function of the sampled world.
  std::map<int, std::vector<double>> acts;
  auto ensure_action = [&](int j) -> const std::vector<double>& {
    auto it = acts.find(j);
    if (it != acts.end()) return it->second;
    auto ids = one_hop_neighbors(world.agents, g, j);
    std::vector<double> feats(ids.size() * size_t(fdim));
    for (size_t k = 0; k < ids.size(); ++k)
      env_->write_features(world.agents[size_t(ids[k])], &feats[k * fdim]);
    auto a = policy_action(table_.policies[size_t(j)], spec_,
                           std::span<const int>(ids), feats, j);
    add_exploration_noise(a, env_->action_space(), cfg_.explore_sigma, rng);
    return acts.emplace(j, std::move(a)).first->second;
  };

  InteractionRecord rec;
  rec.agent = i;
  rec.nbr_ids.assign(sets.one_hop.begin(), sets.one_hop.end());
  rec.nbr_feats.resize(sets.one_hop.size() * size_t(fdim));
  rec.nbr_actions.resize(sets.one_hop.size() * size_t(adim));
  std::vector<std::vector<double>> hood_actions;
  Neighborhood view;
  view.ids = sets.one_hop;
  for (size_t k = 0; k < sets.one_hop.size(); ++k) {
    int j = sets.one_hop[k];
    view.states.push_back(&world.agents[size_t(j)]);
    env_->write_features(world.agents[size_t(j)], &rec.nbr_feats[k * fdim]);
    const auto& a = ensure_action(j);
    std::copy(a.begin(), a.end(), rec.nbr_actions.begin() + k * adim);
    hood_actions.push_back(a);
  }
  rec.reward = env_->reward(i, view, hood_actions, world.furniture);

  // Advance the potential set from time-t views (simultaneous update), then
  // whatever the new neighbors' own potential sets add. Everyone else keeps
  // a stale state, which is provably still outside interaction range.
  WorldState stepped = world;
  std::set<int> done;
  auto advance = [&](int k) {
    if (done.count(k)) return;
    const auto& a = ensure_action(k);
    Neighborhood kview = env_->local_view(world, k);
    stepped.agents[size_t(k)] =
        env_->transition_agent(k, kview, a, world.furniture, rng);
    done.insert(k);
  };
  for (int k : sets.potential) advance(k);
  std::vector<int> next_ids = one_hop_neighbors(stepped.agents, g, i);
  for (int j : next_ids)
    for (int k : potential_neighbors(world.agents, g, j)) advance(k);
  // recompute: the extra transitions cannot change i's neighborhood, but the
  // blocks below must be read from the fully advanced relevant region
  rec.next_ids.assign(next_ids.begin(), next_ids.end());
  rec.next_hood_offsets.push_back(0);
  for (int j : next_ids) {
    auto hood_j = one_hop_neighbors(stepped.agents, g, j);
    for (int k : hood_j) {
      rec.next_hood_ids.push_back(int32_t(k));
      size_t base = rec.next_hood_feats.size();
      rec.next_hood_feats.resize(base + size_t(fdim));
      env_->write_features(stepped.agents[size_t(k)], &rec.next_hood_feats[base]);
    }
    rec.next_hood_offsets.push_back(int32_t(rec.next_hood_ids.size()));
  }

  if (trace) {
    trace->one_hop = sets.one_hop;
    trace->potential = sets.potential;
    trace->next_one_hop = next_ids;
    trace->transitioned.assign(done.begin(), done.end());
  }
  return rec;
}

double Learner::critic_update(std::span<const size_t> indices) {
  std::vector<const InteractionRecord*> batch;
  batch.reserve(indices.size());
  for (size_t idx : indices) batch.push_back(&buffer_.at(idx));
  return critic_update_batch(critic_, critic_opt_, spec_, cfg_.gamma, batch,
                             table_.targets, target_critic_);
}

void Learner::actor_update(std::span<const size_t> indices) {
  std::vector<const InteractionRecord*> batch;
  batch.reserve(indices.size());
  for (size_t idx : indices) batch.push_back(&buffer_.at(idx));
  actor_update_batch(table_.policies[size_t(cfg_.agent)], policy_opt_, critic_,
                     spec_, batch, cfg_.agent);
}

Learner::IterationResult Learner::run_iteration(uint32_t iteration) {
  if (!installed_) throw std::runtime_error("no parameters installed");
  Rng rng(derive_stream(cfg_.seed, uint64_t(cfg_.agent), iteration));
  int stride = std::max(1, cfg_.records_per_iteration / cfg_.updates_per_iteration);
  IterationResult res;
  for (int n = 1; n <= cfg_.records_per_iteration; ++n) {
    buffer_.push(collect_interaction(rng));
    if (n % stride == 0 && buffer_.size() >= size_t(cfg_.batch)) {
      std::vector<size_t> indices(size_t(cfg_.batch));
      for (auto& idx : indices) idx = rng.pick(buffer_.size());
      res.critic_loss = critic_update(indices);
      actor_update(indices);
      polyak_update(target_critic_, critic_, cfg_.polyak);
      polyak_update(table_.targets[size_t(cfg_.agent)],
                    table_.policies[size_t(cfg_.agent)], cfg_.polyak);
      res.updates += 1;
    }
  }
  res.policy = table_.policies[size_t(cfg_.agent)];
  res.target_policy = table_.targets[size_t(cfg_.agent)];
  res.buffer_size = buffer_.size();
  return res;
}

}  // namespace darl1n

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "darl1n/env.hpp"
#include "darl1n/mlp.hpp"
#include "darl1n/rng.hpp"

namespace darl1n {

// One locally observed interaction: everything agent i's critic needs, and
// nothing that is not within one hop of i at t or t+1. The next-state side
// carries, per member j of the new neighborhood, j's own one-hop block so the
// frozen policies can be evaluated on j's view when forming targets.
struct InteractionRecord {
  int32_t agent = 0;  // record owner
  std::vector<int32_t> nbr_ids;  // one-hop set at t, ascending
  std::vector<double> nbr_feats;  // |nbr_ids| x feature_dim
  std::vector<double> nbr_actions;  // |nbr_ids| x action_dim, aligned
  double reward = 0.0;
  std::vector<int32_t> next_ids;  // one-hop set at t+1, ascending
  std::vector<int32_t> next_hood_offsets;  // |next_ids|+1 block bounds
  std::vector<int32_t> next_hood_ids;  // concatenated one-hop blocks at t+1
  std::vector<double> next_hood_feats;  // aligned with next_hood_ids
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);
  void push(InteractionRecord rec);  // overwrites the oldest when full
  size_t size() const { return ring_.size(); }
  size_t capacity() const { return cap_; }
  const InteractionRecord& at(size_t idx) const;

 private:
  std::vector<InteractionRecord> ring_;
  size_t head_ = 0;  // next overwrite position once at capacity
  size_t cap_;
};

// Network geometry shared by the distributed and centralized trainers:
// three 64-wide ReLU hidden layers, head picked by the action space.
struct NetSpec {
  PadSpec critic_pad;  // features + actions per slot
  PadSpec policy_pad;  // features only
  std::vector<int> critic_dims;
  std::vector<int> policy_dims;
  Head policy_head = Head::Tanh;
};

NetSpec make_net_spec(const Environment& env);
// Overload used by the centralized trainer, which always pads to all agents.
NetSpec make_net_spec(const Environment& env, int max_neighbors);

Mlp init_policy(const NetSpec& spec, uint64_t run_seed, int agent);
Mlp init_critic(const NetSpec& spec, uint64_t run_seed, int agent);

// All agents' current and frozen policies, indexed by agent id.
struct ParamTable {
  std::vector<Mlp> policies;
  std::vector<Mlp> targets;
};

// Deterministic greedy action of `policy` for `subject` given the one-hop
// ids/features; shared by collection, evaluation, and target formation.
std::vector<double> policy_action(const Mlp& policy, const NetSpec& spec,
                                  std::span<const int32_t> ids,
                                  std::span<const double> feats_flat,
                                  int subject);

// Gaussian exploration noise, kept inside the action space: box actions are
// clamped to [-1,1], probability vectors are floored at 0 and renormalized.
void add_exploration_noise(std::vector<double>& action, ActionSpace space,
                           double sigma, Rng& rng);

// r + gamma * frozen_critic(next neighborhood, frozen policy actions).
double td_target(const InteractionRecord& rec, const NetSpec& spec,
                 const std::vector<Mlp>& target_policies,
                 const Mlp& target_critic, double gamma);

// Gradient of the mean squared TD error over `batch` with respect to the
// critic's parameters; targets are held fixed. Writes the loss if asked.
Mlp critic_batch_gradient(const Mlp& critic, const NetSpec& spec, double gamma,
                          std::span<const InteractionRecord* const> batch,
                          const std::vector<Mlp>& target_policies,
                          const Mlp& target_critic, double* loss_out = nullptr);

// Gradient of the (negated) mean critic value over `batch` with respect to
// the policy's parameters, with the subject's stored action replaced by a
// fresh policy output. Stepping along -gradient ascends the critic.
Mlp actor_batch_gradient(const Mlp& policy, const Mlp& critic,
                         const NetSpec& spec,
                         std::span<const InteractionRecord* const> batch,
                         int agent);

// One Adam step on the critic toward the bootstrapped targets over `batch`.
// Returns the mean squared error before the step.
double critic_update_batch(Mlp& critic, AdamState& opt, const NetSpec& spec,
                           double gamma,
                           std::span<const InteractionRecord* const> batch,
                           const std::vector<Mlp>& target_policies,
                           const Mlp& target_critic);

// One Adam ascent step on `policy` through the critic's value of the
// subject's own action slot.
void actor_update_batch(Mlp& policy, AdamState& opt, const Mlp& critic,
                        const NetSpec& spec,
                        std::span<const InteractionRecord* const> batch,
                        int agent);

// Which agents a collection pass touched; used to pin down its locality.
struct CollectTrace {
  std::vector<int> one_hop;       // neighborhood at t
  std::vector<int> potential;     // potential set at t
  std::vector<int> next_one_hop;  // neighborhood at t+1
  std::vector<int> transitioned;  // every agent that was stepped
};

struct LearnerConfig {
  int agent = 0;
  double gamma = 0.95;
  double polyak = 0.01;
  double lr = 0.01;
  double explore_sigma = 0.1;
  int batch = 32;
  int records_per_iteration = 100;
  int updates_per_iteration = 1;
  uint64_t seed = 1;
  size_t buffer_capacity = 1000000;
};

class Learner {
 public:
  Learner(std::shared_ptr<const Environment> env, LearnerConfig cfg);

  const NetSpec& spec() const { return spec_; }
  const LearnerConfig& config() const { return cfg_; }
  ReplayBuffer& buffer() { return buffer_; }

  // Install the parameter table for this iteration (own policy included).
  void install(ParamTable table);

  const Mlp& policy() const;
  const Mlp& target_policy() const;
  const Mlp& critic() const { return critic_; }
  const Mlp& target_critic() const { return target_critic_; }

  // Draw a fresh world and record one local interaction. Every random draw
  // comes from `rng`, in a fixed documented order, so collection is
  // replayable from the seed alone.
  InteractionRecord collect_interaction(Rng& rng,
                                        CollectTrace* trace = nullptr) const;

  double critic_update(std::span<const size_t> indices);
  void actor_update(std::span<const size_t> indices);

  struct IterationResult {
    Mlp policy;
    Mlp target_policy;
    size_t buffer_size = 0;
    double critic_loss = 0.0;  // last update in the iteration, 0 if none ran
    int updates = 0;
  };

  // One full pass: seed from (run seed, agent, iteration), collect
  // records_per_iteration interactions, run the scheduled updates, move the
  // frozen copies, and hand back the refreshed policy pair.
  IterationResult run_iteration(uint32_t iteration);

 private:
  std::shared_ptr<const Environment> env_;
  LearnerConfig cfg_;
  NetSpec spec_;
  ParamTable table_;
  Mlp critic_, target_critic_;
  AdamState critic_opt_, policy_opt_;
  ReplayBuffer buffer_;
  bool installed_ = false;
};

}  // namespace darl1n

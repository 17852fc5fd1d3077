#pragma once

#include <memory>
#include <vector>

#include "darl1n/config.hpp"
#include "darl1n/coordinator.hpp"
#include "darl1n/env.hpp"
#include "darl1n/learner.hpp"
#include "darl1n/rng.hpp"

namespace darl1n {

// One joint transition of every agent at once. This is the data the
// centralized baseline trains on, and the reason it resists distribution:
// each record needs the whole world stepped together.
struct CentralRecord {
  std::vector<double> states;       // agents x feature_dim
  std::vector<double> actions;      // agents x action_dim
  std::vector<double> rewards;      // one per agent
  std::vector<double> next_states;  // agents x feature_dim
};

class CentralBuffer {
 public:
  explicit CentralBuffer(size_t capacity);
  void push(CentralRecord rec);  // overwrites the oldest when full
  size_t size() const { return ring_.size(); }
  size_t capacity() const { return cap_; }
  const CentralRecord& at(size_t idx) const;

 private:
  std::vector<CentralRecord> ring_;
  size_t head_ = 0;
  size_t cap_;
};

// View of a joint record through agent i's eyes with every agent treated as
// a neighbor, so the shared critic/actor update machinery applies unchanged.
InteractionRecord central_to_record(const CentralRecord& rec, int agent, int agents, int fdim,
                                    int adim);

// Single-process trainer with one centralized critic per agent over the full
// joint state and action. Every policy pads to all agents. With one agent it
// consumes random draws in exactly the same order as the distributed
// learner, so the two produce bit-identical parameter trajectories.
class CentralTrainer {
 public:
  CentralTrainer(std::shared_ptr<const Environment> env, RunConfig cfg);

  const NetSpec& spec() const { return spec_; }
  const ParamTable& table() const { return table_; }
  const Mlp& critic(int agent) const;
  size_t buffer_size() const { return buffer_.size(); }

  // Fresh world, all actions, all rewards, all transitions — one record.
  CentralRecord collect_joint(Rng& rng) const;

  // Collection plus the scheduled update rounds for iteration `iteration`,
  // on the stream derive_stream(seed, 0, iteration). Returns the last
  // critic loss of the round (0 when no update ran).
  double run_iteration(uint32_t iteration);

  // Greedy joint-input evaluation on the same fixed stream the distributed
  // controller uses.
  double evaluate() const;

 private:
  std::shared_ptr<const Environment> env_;
  RunConfig cfg_;
  LearnerConfig lc_;
  NetSpec spec_;
  ParamTable table_;
  std::vector<Mlp> critics_, target_critics_;
  std::vector<AdamState> critic_opts_, policy_opts_;
  CentralBuffer buffer_;
};

// Greedy evaluation with every policy reading the full roster — the
// baseline's input convention. Same fixed episode stream as the
// neighborhood-input evaluation, so the two are comparable.
double evaluate_joint_policies(const Environment& env, const NetSpec& spec,
                               const ParamTable& table, const RunConfig& cfg);

// Full training loop for the baseline: same metrics stream, evaluation
// cadence and convergence bookkeeping as the distributed path.
TrainResult run_central_training(const RunConfig& cfg);

}  // namespace darl1n

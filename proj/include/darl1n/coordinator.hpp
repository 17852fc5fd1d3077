#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "darl1n/config.hpp"
#include "darl1n/env.hpp"
#include "darl1n/learner.hpp"
#include "darl1n/metrics.hpp"
#include "darl1n/transport.hpp"

namespace darl1n {

// Controller-side parameter table for iteration 0: each agent's policy drawn
// from its own seeded stream, frozen copy starting equal to it.
ParamTable initial_param_table(const Environment& env, uint64_t run_seed);

// Flattened features for every member of a one-hop view, in id order.
std::vector<double> neighborhood_features(const Environment& env, const Neighborhood& hood);

// Total reward of all agents under the table's greedy policies, averaged
// over cfg.eval_episodes episodes drawn from a fixed stream of cfg.seed.
// Identical inputs give identical values on every call.
double evaluate_policies(const Environment& env, const NetSpec& spec, const ParamTable& table,
                         const RunConfig& cfg);

// Learner endpoint: announce the agent id, then serve one training iteration
// per parameter broadcast until shutdown or channel closure. Sends a
// heartbeat whenever five seconds pass without traffic.
void run_learner_endpoint(std::shared_ptr<const Environment> env, const RunConfig& cfg, int agent,
                          Channel& channel);

struct TrainResult {
  std::vector<MetricsRow> metrics;
  ParamTable params;
  std::optional<size_t> converged_at;  // 1-based evaluation index
};

// The synchronous training barrier: per iteration, broadcast the table to
// all learners, block until each has returned its refreshed policy pair,
// install, and periodically evaluate. Critic parameters never pass through
// here; they live with their learners.
class Controller {
 public:
  // Channels are one per learner in any order; the constructor waits for each
  // learner's announcement and indexes them by agent id.
  Controller(std::shared_ptr<const Environment> env, RunConfig cfg,
             std::vector<std::shared_ptr<Channel>> channels);

  TrainResult train();

 private:
  void broadcast(uint32_t iteration);
  // Blocks until every learner's update for `iteration` is installed.
  // Duplicates are ignored; missing agents past the deadline abort the run.
  void collect(uint32_t iteration);

  std::shared_ptr<const Environment> env_;
  RunConfig cfg_;
  NetSpec spec_;
  std::vector<std::shared_ptr<Channel>> by_agent_;
  ParamTable table_;
};

// Builds the environment, spawns one learner per agent (threads; under
// "tcp" they talk through real sockets on cfg.listen), runs the controller
// to completion, and tears everything down.
TrainResult run_training(const RunConfig& cfg);

}  // namespace darl1n

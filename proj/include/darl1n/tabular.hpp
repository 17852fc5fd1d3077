#pragma once

#include <functional>
#include <vector>

#include "darl1n/geometry.hpp"
#include "darl1n/rng.hpp"

namespace darl1n {

// Finite multi-agent MDP with static neighbor sets and factored structure:
// agent i's transition reads (s over hood(i), a_i) and its reward reads
// (s over hood(i), a over hood(i)). Small enough to enumerate exactly, so it
// serves as ground truth for the neighborhood-truncation machinery.
//
// Index layout (shared by builders and readers): a "local" index runs over
// the hood members in ascending id order, first member least significant.
//   transition[i][ls * A_i + a_i][s_i']   row = distribution over next states
//   reward[i][ls * LA + la]               la = local joint action index
// Full joint Q tables use q[s_joint * A_joint + a_joint] with agent 0 least
// significant in both joint indices.
struct TabularMdp {
  int agents = 0;
  std::vector<int> state_sizes;
  std::vector<int> action_sizes;
  std::vector<std::vector<int>> hoods;  // ascending, self included
  std::vector<std::vector<std::vector<double>>> transition;
  std::vector<std::vector<double>> reward;
  double gamma = 0.95;
  double reward_bound = 1.0;
};

// Shapes, stochastic rows (sum within 1e-9 of 1), reward bound, discount.
void validate_mdp(const TabularMdp& mdp);

long joint_state_count(const TabularMdp& mdp);
long joint_action_count(const TabularMdp& mdp);
long local_state_count(const TabularMdp& mdp, int agent);
long local_action_count(const TabularMdp& mdp, int agent);

// Digit helpers for the mixed-radix indices above.
std::vector<int> decode_digits(long idx, const std::vector<int>& sizes);
long encode_digits(const std::vector<int>& digits, const std::vector<int>& sizes);

// Restrict joint digits to the hood of `agent` and encode locally.
long local_state_index(const TabularMdp& mdp, int agent,
                       const std::vector<int>& joint_state_digits);
long local_action_index(const TabularMdp& mdp, int agent,
                        const std::vector<int>& joint_action_digits);

// Deterministic joint policy: policy[i][s_joint] = agent i's action.
using JointPolicy = std::vector<std::vector<int>>;

// Exact per-agent action-value of the joint policy: the Bellman fixed point,
// iterated until the sup-norm residual drops below 1e-10.
std::vector<std::vector<double>> exact_q(const TabularMdp& mdp,
                                         const JointPolicy& policy);

// Best-case action-value for one agent when every agent cooperates on its
// reward: max over joint actions in the backup, ties to the lowest index.
struct ViResult {
  std::vector<double> q;          // [s_joint * A_joint + a_joint]
  std::vector<int> greedy;        // [s_joint] -> joint action index
};
ViResult value_iteration(const TabularMdp& mdp, int agent);

// Weight of an excluded-agents configuration given the local one; slices must
// be probability distributions over the excluded (state, action) tuples.
using TruncationWeights = std::function<double(long local_sa, long excl_sa)>;

// Average the exact Q over everything outside the hood. Empty weights mean
// uniform. Output indexed [ls * LA + la].
std::vector<double> truncated_q(const TabularMdp& mdp,
                                const std::vector<double>& q_full, int agent,
                                const TruncationWeights& weights = {});

// Worst-case gap between the truncated and exact action-values when rewards
// are bounded and both reward and transition are neighborhood-local.
double truncation_bound(double reward_bound, double gamma);

// Random MDP on a line graph (hood(i) = {i-1, i, i+1} clipped), uniform
// random stochastic rows and rewards in [-bound, bound]. Seeded.
TabularMdp random_local_mdp(int agents, int states, int actions, double gamma,
                            double reward_bound, uint64_t seed);

// Drive a joint state forward `steps` times with `step` and count violations
// of the per-step motion bound and of one-step neighborhood containment
// (someone outside the potential set at t showing up one hop away at t+1).
struct WalkReport {
  long steps = 0;
  long containment_violations = 0;
  long motion_violations = 0;
};
using StepFn = std::function<JointState(const JointState&, Rng&)>;
WalkReport check_containment(JointState start, const StepFn& step,
                             const GraphConfig& cfg, long steps, Rng& rng);

}  // namespace darl1n

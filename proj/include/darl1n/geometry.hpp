#pragma once

#include <vector>

namespace darl1n {

// Full per-agent state vector. The first spatial_dim components (see
// GraphConfig) are the position used by the interaction metric; anything
// after that is non-spatial payload (spin, freeze countdown, ...).
struct AgentState {
  std::vector<double> coords;
};

using JointState = std::vector<AgentState>;

enum class Metric {
  Euclidean,         // L2 over the spatial components
  LatticeAdjacency,  // L1 over the spatial components, optionally wrapped
};

struct GraphConfig {
  double d = 0.15;        // interaction radius
  double epsilon = 0.05;  // per-step motion bound
  Metric metric = Metric::Euclidean;
  int spatial_dim = 0;     // 0 = every component is spatial
  int lattice_period = 0;  // >0 wraps each lattice component (torus)
};

double state_distance(const AgentState& a, const AgentState& b,
                      const GraphConfig& cfg);

// Agents within distance d of agent i, plus i itself. Sorted ascending.
std::vector<int> one_hop_neighbors(const JointState& states,
                                   const GraphConfig& cfg, int agent);

// Agents within distance d + 2*epsilon of agent i, plus i itself. Anything
// outside this set cannot enter agent i's one-hop set in a single step as
// long as per-step motion stays within epsilon.
std::vector<int> potential_neighbors(const JointState& states,
                                     const GraphConfig& cfg, int agent);

struct NeighborSets {
  std::vector<int> one_hop;    // radius d
  std::vector<int> potential;  // radius d + 2*epsilon; superset of one_hop
};

NeighborSets neighbor_sets(const JointState& states, const GraphConfig& cfg,
                           int agent);

// True when the step from prev to next moved at most epsilon (with the same
// boundary slack that neighbor queries use).
bool validate_motion(const AgentState& prev, const AgentState& next,
                     const GraphConfig& cfg);

// Boundary comparisons are inclusive with this much slack so that agents
// sitting exactly on the radius are neighbors regardless of rounding.
constexpr double kDistanceSlack = 1e-12;

}  // namespace darl1n

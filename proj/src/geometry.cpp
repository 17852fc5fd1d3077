#include "darl1n/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace darl1n {

namespace {

int spatial_components(const AgentState& s, const GraphConfig& cfg) {
  int n = static_cast<int>(s.coords.size());
  if (cfg.spatial_dim > 0) {
    if (cfg.spatial_dim > n)
      throw std::invalid_argument("state has fewer components than spatial_dim");
    return cfg.spatial_dim;
  }
  return n;
}

double component_delta(double a, double b, const GraphConfig& cfg) {
  double delta = std::fabs(a - b);
  if (cfg.metric == Metric::LatticeAdjacency && cfg.lattice_period > 0) {
    double period = static_cast<double>(cfg.lattice_period);
    delta = std::fmod(delta, period);
    delta = std::min(delta, period - delta);
  }
  return delta;
}

// Brute-force radius query; also the reference the grid path must agree with.
std::vector<int> radius_query_brute(const JointState& states,
                                    const GraphConfig& cfg, int agent,
                                    double radius) {
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(states.size()); ++j) {
    if (j == agent ||
        state_distance(states[agent], states[j], cfg) <= radius + kDistanceSlack)
      out.push_back(j);
  }
  return out;
}

// Uniform-grid query for larger euclidean populations. Cell edge = radius, so
// candidates live in the 3^dim surrounding cells.
std::vector<int> radius_query_grid(const JointState& states,
                                   const GraphConfig& cfg, int agent,
                                   double radius) {
  int dim = spatial_components(states[agent], cfg);
  double cell = std::max(radius, 1e-9);
  auto cell_key = [&](const AgentState& s) {
    // 21 bits per signed cell coordinate packed into one key; plenty for
    // bounded activity regions.
    uint64_t key = 0;
    for (int c = 0; c < dim; ++c) {
      auto ic = static_cast<int64_t>(std::floor(s.coords[c] / cell));
      key = key * 0x200000ull + static_cast<uint64_t>(ic + 0x100000ll);
    }
    return key;
  };
  std::unordered_map<uint64_t, std::vector<int>> buckets;
  buckets.reserve(states.size() * 2);
  for (int j = 0; j < static_cast<int>(states.size()); ++j)
    buckets[cell_key(states[j])].push_back(j);

  std::vector<int> out;
  std::vector<int64_t> base(dim), probe(dim);
  for (int c = 0; c < dim; ++c)
    base[c] = static_cast<int64_t>(std::floor(states[agent].coords[c] / cell));
  int combos = 1;
  for (int c = 0; c < dim; ++c) combos *= 3;
  for (int k = 0; k < combos; ++k) {
    int rem = k;
    uint64_t key = 0;
    for (int c = 0; c < dim; ++c) {
      probe[c] = base[c] + (rem % 3) - 1;
      rem /= 3;
      key = key * 0x200000ull + static_cast<uint64_t>(probe[c] + 0x100000ll);
    }
    auto it = buckets.find(key);
    if (it == buckets.end()) continue;
    for (int j : it->second) {
      if (j == agent ||
          state_distance(states[agent], states[j], cfg) <= radius + kDistanceSlack)
        out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> radius_query(const JointState& states, const GraphConfig& cfg,
                              int agent, double radius) {
  if (agent < 0 || agent >= static_cast<int>(states.size()))
    throw std::out_of_range("agent index out of range");
  // The grid shortcut only applies to the euclidean metric: wrapped lattice
  // distances do not respect flat cell coordinates.
  if (cfg.metric == Metric::Euclidean && states.size() > 32)
    return radius_query_grid(states, cfg, agent, radius);
  return radius_query_brute(states, cfg, agent, radius);
}

}  // namespace

double state_distance(const AgentState& a, const AgentState& b,
                      const GraphConfig& cfg) {
  if (a.coords.size() != b.coords.size())
    throw std::invalid_argument("state dimension mismatch");
  int dim = spatial_components(a, cfg);
  if (cfg.metric == Metric::LatticeAdjacency) {
    double sum = 0.0;
    for (int c = 0; c < dim; ++c)
      sum += component_delta(a.coords[c], b.coords[c], cfg);
    return sum;
  }
  double sq = 0.0;
  for (int c = 0; c < dim; ++c) {
    double delta = component_delta(a.coords[c], b.coords[c], cfg);
    sq += delta * delta;
  }
  return std::sqrt(sq);
}

std::vector<int> one_hop_neighbors(const JointState& states,
                                   const GraphConfig& cfg, int agent) {
  return radius_query(states, cfg, agent, cfg.d);
}

std::vector<int> potential_neighbors(const JointState& states,
                                     const GraphConfig& cfg, int agent) {
  return radius_query(states, cfg, agent, cfg.d + 2.0 * cfg.epsilon);
}

NeighborSets neighbor_sets(const JointState& states, const GraphConfig& cfg,
                           int agent) {
  NeighborSets sets;
  sets.potential = potential_neighbors(states, cfg, agent);
  for (int j : sets.potential) {
    if (j == agent ||
        state_distance(states[agent], states[j], cfg) <= cfg.d + kDistanceSlack)
      sets.one_hop.push_back(j);
  }
  return sets;
}

bool validate_motion(const AgentState& prev, const AgentState& next,
                     const GraphConfig& cfg) {
  return state_distance(prev, next, cfg) <= cfg.epsilon + kDistanceSlack;
}

}  // namespace darl1n

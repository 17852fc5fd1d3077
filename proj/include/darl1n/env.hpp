#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "darl1n/geometry.hpp"
#include "darl1n/rng.hpp"

namespace darl1n {

enum class EnvKind { Ising, FoodCollection, Grassland, AdversarialBattle };

enum class ActionSpace {
  DiscreteSpin,  // probability vector over {down, up}; ties resolve down
  VelocityBox,   // velocity command in [-1,1]^2, scaled by epsilon per step
};

struct EnvConfig {
  EnvKind kind = EnvKind::Ising;
  int agents = 9;
  int episode_length = 25;
  double box_half_width = 1.0;  // particle activity region is [-w, w]^2
  GraphConfig graph;
  double reward_bound = 1.0;  // per-step |reward| cap
  int lattice_side = 0;       // spin lattice edge; derived from agents when 0
  int pellets = 0;            // food items (food collection, grassland)
  int resources = 0;          // contested items (adversarial battle)
  int adversaries = 0;        // grassland chaser count (tail ids)
  int freeze_steps = 5;       // steps an agent stays immobilized
};

// Non-agent world contents: pellet / resource positions as flat xy pairs.
// Static while agents act; consumed items respawn between steps.
struct Furniture {
  std::vector<double> points;
  std::vector<uint8_t> active;
  int count() const { return static_cast<int>(active.size()); }
};

struct WorldState {
  JointState agents;
  Furniture furniture;
};

struct StepOutcome {
  WorldState world;
  std::vector<double> rewards;
};

// States restricted to one agent's one-hop neighborhood. Rewards and
// transitions only ever receive one of these, so locality is enforced by the
// call signature rather than by convention.
struct Neighborhood {
  std::vector<int> ids;                   // ascending, includes the subject
  std::vector<const AgentState*> states;  // aligned with ids
};

class Environment {
 public:
  explicit Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {}
  virtual ~Environment() = default;

  const EnvConfig& config() const { return cfg_; }
  const GraphConfig& graph() const { return cfg_.graph; }
  int agents() const { return cfg_.agents; }

  virtual int feature_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual ActionSpace action_space() const = 0;
  // Cap on one-hop neighborhood size, used to size padded encodings.
  virtual int max_neighbors() const = 0;
  virtual void write_features(const AgentState& s, double* out) const = 0;

  // Draw a fresh world (agent states + furniture). Also used to re-randomize
  // the world before every recorded interaction during training.
  virtual WorldState sample_world(Rng& rng) const = 0;
  WorldState reset(uint64_t seed) const {
    Rng rng(seed);
    return sample_world(rng);
  }

  // Per-step reward for `agent` from its own and its neighbors' states and
  // actions plus the furniture. `actions` is aligned with `hood.ids`.
  virtual double reward(int agent, const Neighborhood& hood,
                        std::span<const std::vector<double>> actions,
                        const Furniture& furniture) const = 0;

  // Next state of `agent` from its local view and its own action.
  virtual AgentState transition_agent(int agent, const Neighborhood& hood,
                                      std::span<const double> action,
                                      const Furniture& furniture,
                                      Rng& rng) const = 0;

  // Respawn furniture consumed at the positions in `agents_now`.
  virtual void refresh_furniture(const JointState& agents_now, Furniture& f,
                                 Rng& rng) const;

  // Advance every agent simultaneously. Rewards are computed on the current
  // state, then all transitions, then furniture refresh.
  StepOutcome step_world(const WorldState& world,
                         const std::vector<std::vector<double>>& actions,
                         Rng& rng) const;

  // Dimension / finiteness / action-space range checks; throws on violation.
  void check_action(std::span<const double> action) const;

  // Assemble the one-hop view of `agent`.
  Neighborhood local_view(const WorldState& world, int agent) const;

 protected:
  // Guard used by reward/transition implementations: every state handed in
  // must be within interaction range of the subject.
  void validate_view(int agent, const Neighborhood& hood) const;

  EnvConfig cfg_;
};

std::shared_ptr<Environment> make_environment(const EnvConfig& cfg);

// Fills in derived fields (lattice side, graph metric, reward bound, default
// furniture counts) and validates the combination.
EnvConfig finalize_env_config(EnvConfig cfg);

// Maps every world to the full set of per-agent actions for one step.
using ActionProvider =
    std::function<std::vector<std::vector<double>>(const WorldState&)>;

// Total reward of all agents per episode, one entry per episode. Episode e
// draws its world and step randomness from derive_stream(seed, e, ...), so a
// fixed seed gives identical episodes between calls.
std::vector<double> rollout_totals(const Environment& env,
                                   const ActionProvider& provider,
                                   uint64_t seed, int episodes);

}  // namespace darl1n

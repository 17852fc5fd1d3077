#include "darl1n/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace darl1n {

namespace {

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Shared particle kinematics: unit-clip the velocity command, move by
// epsilon * v, clamp to the activity box. Componentwise clamping never
// lengthens the step, so per-step motion stays within epsilon.
void move_xy(const AgentState& from, std::span<const double> action,
             double epsilon, double half_width, AgentState& to) {
  double vx = action[0], vy = action[1];
  double n = std::sqrt(vx * vx + vy * vy);
  if (n > 1.0) {
    vx /= n;
    vy /= n;
  }
  to.coords[0] = clamp(from.coords[0] + epsilon * vx, -half_width, half_width);
  to.coords[1] = clamp(from.coords[1] + epsilon * vy, -half_width, half_width);
}

double xy_dist(const AgentState& a, const AgentState& b) {
  double dx = a.coords[0] - b.coords[0];
  double dy = a.coords[1] - b.coords[1];
  return std::sqrt(dx * dx + dy * dy);
}

double point_dist(const AgentState& a, const double* p) {
  double dx = a.coords[0] - p[0];
  double dy = a.coords[1] - p[1];
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

void Environment::refresh_furniture(const JointState&, Furniture&, Rng&) const {}

Neighborhood Environment::local_view(const WorldState& world, int agent) const {
  Neighborhood hood;
  hood.ids = one_hop_neighbors(world.agents, cfg_.graph, agent);
  hood.states.reserve(hood.ids.size());
  for (int j : hood.ids) hood.states.push_back(&world.agents[j]);
  return hood;
}

void Environment::validate_view(int agent, const Neighborhood& hood) const {
  if (hood.ids.size() != hood.states.size() || hood.ids.empty())
    throw std::invalid_argument("malformed neighborhood view");
  if (!std::is_sorted(hood.ids.begin(), hood.ids.end()))
    throw std::invalid_argument("neighborhood ids must be sorted");
  auto self = std::lower_bound(hood.ids.begin(), hood.ids.end(), agent);
  if (self == hood.ids.end() || *self != agent)
    throw std::invalid_argument("subject missing from neighborhood view");
  const AgentState& me = *hood.states[self - hood.ids.begin()];
  for (size_t k = 0; k < hood.ids.size(); ++k) {
    if (state_distance(me, *hood.states[k], cfg_.graph) >
        cfg_.graph.d + kDistanceSlack)
      throw std::invalid_argument("state outside interaction range passed to local rule");
  }
}

void Environment::check_action(std::span<const double> action) const {
  if (static_cast<int>(action.size()) != action_dim())
    throw std::invalid_argument("action dimension mismatch");
  for (double a : action)
    if (!std::isfinite(a)) throw std::invalid_argument("non-finite action");
  if (action_space() == ActionSpace::DiscreteSpin) {
    double sum = 0.0;
    for (double a : action) {
      if (a < -1e-9) throw std::invalid_argument("negative action probability");
      sum += a;
    }
    if (std::fabs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("action probabilities must sum to 1");
  } else {
    for (double a : action)
      if (std::fabs(a) > 1.0 + 1e-9)
        throw std::invalid_argument("velocity component outside [-1,1]");
  }
}

StepOutcome Environment::step_world(const WorldState& world,
                                    const std::vector<std::vector<double>>& actions,
                                    Rng& rng) const {
  const int m = agents();
  if (static_cast<int>(world.agents.size()) != m)
    throw std::invalid_argument("world has wrong agent count");
  if (static_cast<int>(actions.size()) != m)
    throw std::invalid_argument("need one action per agent");
  for (const auto& a : actions) check_action(a);

  StepOutcome out;
  out.rewards.resize(m);
  std::vector<Neighborhood> hoods(m);
  for (int i = 0; i < m; ++i) hoods[i] = local_view(world, i);
  for (int i = 0; i < m; ++i) {
    std::vector<std::vector<double>> local_actions;
    local_actions.reserve(hoods[i].ids.size());
    for (int j : hoods[i].ids) local_actions.push_back(actions[j]);
    out.rewards[i] = reward(i, hoods[i], local_actions, world.furniture);
  }
  out.world.agents.resize(m);
  for (int i = 0; i < m; ++i)
    out.world.agents[i] =
        transition_agent(i, hoods[i], actions[i], world.furniture, rng);
  out.world.furniture = world.furniture;
  refresh_furniture(world.agents, out.world.furniture, rng);
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// Spin lattice. Agents sit on fixed torus sites; the "position" never moves
// (epsilon = 0) and the third coordinate carries the spin.
class IsingEnv final : public Environment {
 public:
  explicit IsingEnv(EnvConfig cfg) : Environment(std::move(cfg)) {}

  int feature_dim() const override { return 1; }
  int action_dim() const override { return 2; }
  ActionSpace action_space() const override { return ActionSpace::DiscreteSpin; }
  int max_neighbors() const override { return 5; }  // self + 4 cardinal sites

  void write_features(const AgentState& s, double* out) const override {
    out[0] = s.coords[2];
  }

  WorldState sample_world(Rng& rng) const override {
    WorldState w;
    int side = cfg_.lattice_side;
    w.agents.resize(cfg_.agents);
    for (int i = 0; i < cfg_.agents; ++i) {
      double spin = rng.uniform() < 0.5 ? -1.0 : 1.0;
      w.agents[i].coords = {double(i / side), double(i % side), spin};
    }
    return w;
  }

  double reward(int agent, const Neighborhood& hood,
                std::span<const std::vector<double>> actions,
                const Furniture&) const override {
    validate_view(agent, hood);
    if (actions.size() != hood.ids.size())
      throw std::invalid_argument("actions misaligned with neighborhood");
    double mine = 0.0, sum = 0.0;
    for (size_t k = 0; k < hood.ids.size(); ++k)
      if (hood.ids[k] == agent) mine = hood.states[k]->coords[2];
    for (size_t k = 0; k < hood.ids.size(); ++k)
      if (hood.ids[k] != agent) sum += mine * hood.states[k]->coords[2];
    return sum / 4.0;  // at most 4 lattice neighbors, so |reward| <= 1
  }

  AgentState transition_agent(int agent, const Neighborhood& hood,
                              std::span<const double> action, const Furniture&,
                              Rng&) const override {
    validate_view(agent, hood);
    check_action(action);
    AgentState next;
    for (size_t k = 0; k < hood.ids.size(); ++k)
      if (hood.ids[k] == agent) next = *hood.states[k];
    next.coords[2] = action[1] > action[0] ? 1.0 : -1.0;
    return next;
  }
};

// ---------------------------------------------------------------------------
// Common machinery for the planar environments.
class ParticleEnv : public Environment {
 public:
  explicit ParticleEnv(EnvConfig cfg) : Environment(std::move(cfg)) {
    pickup_radius_ = cfg_.graph.d / 4.0;
    collision_dist_ = cfg_.graph.d / 3.0;
    contact_dist_ = cfg_.graph.d / 2.0;  // tag / kill range
  }

  int feature_dim() const override { return 2; }
  int action_dim() const override { return 2; }
  ActionSpace action_space() const override { return ActionSpace::VelocityBox; }
  int max_neighbors() const override { return cfg_.agents; }

  void write_features(const AgentState& s, double* out) const override {
    out[0] = s.coords[0];
    out[1] = s.coords[1];
  }

 protected:
  virtual int coord_dim() const { return 2; }
  virtual int furniture_count() const { return 0; }

  WorldState sample_world(Rng& rng) const override {
    WorldState w;
    double hw = cfg_.box_half_width;
    w.agents.resize(cfg_.agents);
    for (int i = 0; i < cfg_.agents; ++i) {
      w.agents[i].coords.assign(coord_dim(), 0.0);
      w.agents[i].coords[0] = rng.uniform(-hw, hw);
      w.agents[i].coords[1] = rng.uniform(-hw, hw);
    }
    int nf = furniture_count();
    w.furniture.points.resize(2 * nf);
    w.furniture.active.assign(nf, 1);
    for (int p = 0; p < nf; ++p) {
      w.furniture.points[2 * p] = rng.uniform(-hw, hw);
      w.furniture.points[2 * p + 1] = rng.uniform(-hw, hw);
    }
    return w;
  }

  // Distance to the nearest active furniture point, capped at d.
  double shaping_term(const AgentState& s, const Furniture& f) const {
    double best = cfg_.graph.d;
    for (int p = 0; p < f.count(); ++p)
      if (f.active[p]) best = std::min(best, point_dist(s, &f.points[2 * p]));
    return best;
  }

  const AgentState& subject_state(int agent, const Neighborhood& hood) const {
    for (size_t k = 0; k < hood.ids.size(); ++k)
      if (hood.ids[k] == agent) return *hood.states[k];
    throw std::invalid_argument("subject missing from neighborhood view");
  }

  double clamp_reward(double r) const {
    return clamp(r, -cfg_.reward_bound, cfg_.reward_bound);
  }

  double pickup_radius_ = 0.0;
  double collision_dist_ = 0.0;
  double contact_dist_ = 0.0;
};

// ---------------------------------------------------------------------------
class FoodCollectionEnv final : public ParticleEnv {
 public:
  using ParticleEnv::ParticleEnv;

  double reward(int agent, const Neighborhood& hood,
                std::span<const std::vector<double>>,
                const Furniture& furniture) const override {
    validate_view(agent, hood);
    const AgentState& me = subject_state(agent, hood);
    double near = shaping_term(me, furniture);
    double r = -near;
    if (near <= pickup_radius_) r += 5.0;
    for (size_t k = 0; k < hood.ids.size(); ++k)
      if (hood.ids[k] != agent && xy_dist(me, *hood.states[k]) <= collision_dist_)
        r -= 1.0;
    return clamp_reward(r);
  }

  AgentState transition_agent(int agent, const Neighborhood& hood,
                              std::span<const double> action, const Furniture&,
                              Rng&) const override {
    validate_view(agent, hood);
    check_action(action);
    const AgentState& me = subject_state(agent, hood);
    AgentState next = me;
    move_xy(me, action, cfg_.graph.epsilon, cfg_.box_half_width, next);
    return next;
  }

  void refresh_furniture(const JointState& agents_now, Furniture& f,
                         Rng& rng) const override {
    double hw = cfg_.box_half_width;
    for (int p = 0; p < f.count(); ++p) {
      if (!f.active[p]) continue;
      for (const auto& s : agents_now) {
        if (point_dist(s, &f.points[2 * p]) <= pickup_radius_) {
          f.points[2 * p] = rng.uniform(-hw, hw);
          f.points[2 * p + 1] = rng.uniform(-hw, hw);
          break;
        }
      }
    }
  }

 protected:
  int furniture_count() const override { return cfg_.pellets; }
};

// ---------------------------------------------------------------------------
// Grazers (ids [0, M-A)) collect pellets; chasers (tail ids) freeze them on
// contact. coords = (x, y, freeze countdown).
class GrasslandEnv final : public ParticleEnv {
 public:
  using ParticleEnv::ParticleEnv;

  bool is_chaser(int id) const { return id >= cfg_.agents - cfg_.adversaries; }

  double reward(int agent, const Neighborhood& hood,
                std::span<const std::vector<double>>,
                const Furniture& furniture) const override {
    validate_view(agent, hood);
    const AgentState& me = subject_state(agent, hood);
    if (is_chaser(agent)) {
      double r = 0.0, nearest = cfg_.graph.d;
      for (size_t k = 0; k < hood.ids.size(); ++k) {
        int j = hood.ids[k];
        if (j == agent || is_chaser(j)) continue;
        const AgentState& other = *hood.states[k];
        if (other.coords[2] > 0.5) continue;  // already frozen
        double dist = xy_dist(me, other);
        nearest = std::min(nearest, dist);
        if (dist <= contact_dist_) r += 5.0;
      }
      return clamp_reward(r - nearest);
    }
    if (me.coords[2] > 0.5) return -2.0;  // frozen grazers just bleed
    double near = shaping_term(me, furniture);
    double r = -near;
    if (near <= pickup_radius_) r += 5.0;
    for (size_t k = 0; k < hood.ids.size(); ++k)
      if (hood.ids[k] != agent && xy_dist(me, *hood.states[k]) <= collision_dist_)
        r -= 1.0;
    return clamp_reward(r);
  }

  AgentState transition_agent(int agent, const Neighborhood& hood,
                              std::span<const double> action, const Furniture&,
                              Rng&) const override {
    validate_view(agent, hood);
    check_action(action);
    const AgentState& me = subject_state(agent, hood);
    AgentState next = me;
    if (!is_chaser(agent)) {
      if (me.coords[2] > 0.5) {  // serving a freeze: hold position, count down
        next.coords[2] = me.coords[2] - 1.0;
        return next;
      }
      for (size_t k = 0; k < hood.ids.size(); ++k) {
        if (!is_chaser(hood.ids[k])) continue;
        if (xy_dist(me, *hood.states[k]) <= contact_dist_) {
          next.coords[2] = double(cfg_.freeze_steps);  // tagged: freeze here
          return next;
        }
      }
    }
    move_xy(me, action, cfg_.graph.epsilon, cfg_.box_half_width, next);
    return next;
  }

  void refresh_furniture(const JointState& agents_now, Furniture& f,
                         Rng& rng) const override {
    double hw = cfg_.box_half_width;
    int grazers = cfg_.agents - cfg_.adversaries;
    for (int p = 0; p < f.count(); ++p) {
      if (!f.active[p]) continue;
      for (int i = 0; i < grazers; ++i) {
        if (point_dist(agents_now[i], &f.points[2 * p]) <= pickup_radius_) {
          f.points[2 * p] = rng.uniform(-hw, hw);
          f.points[2 * p + 1] = rng.uniform(-hw, hw);
          break;
        }
      }
    }
  }

 protected:
  int coord_dim() const override { return 3; }
  int furniture_count() const override { return cfg_.pellets; }
};

// ---------------------------------------------------------------------------
// Two teams contest resources; two or more opponents within kill range
// knock an agent out for freeze_steps. coords = (x, y, freeze countdown).
class AdversarialBattleEnv final : public ParticleEnv {
 public:
  using ParticleEnv::ParticleEnv;

  int team_of(int id) const { return id < cfg_.agents / 2 ? 0 : 1; }

  double reward(int agent, const Neighborhood& hood,
                std::span<const std::vector<double>>,
                const Furniture& furniture) const override {
    validate_view(agent, hood);
    const AgentState& me = subject_state(agent, hood);
    if (me.coords[2] > 0.5) return 0.0;  // knocked out
    double near = shaping_term(me, furniture);
    double r = -near;
    if (near <= pickup_radius_) r += 5.0;

    int my_team = team_of(agent);
    int opponents_in_kill_range = 0;
    for (size_t k = 0; k < hood.ids.size(); ++k) {
      int j = hood.ids[k];
      if (j == agent) continue;
      const AgentState& other = *hood.states[k];
      if (other.coords[2] > 0.5) continue;
      if (team_of(j) == my_team) continue;
      // opponent grabbing a resource in view costs us
      if (shaping_term(other, furniture) <= pickup_radius_) r -= 5.0;
      double dist = xy_dist(me, other);
      if (dist <= contact_dist_) {
        opponents_in_kill_range += 1;
        // shared bonus if we are part of a group taking this opponent out
        int killers = killers_near(hood, j, my_team);
        if (killers >= 2) r += 10.0 / double(killers);
      }
    }
    if (opponents_in_kill_range >= 2) r -= 10.0;  // we are the one taken out
    return clamp_reward(r);
  }

  AgentState transition_agent(int agent, const Neighborhood& hood,
                              std::span<const double> action, const Furniture&,
                              Rng&) const override {
    validate_view(agent, hood);
    check_action(action);
    const AgentState& me = subject_state(agent, hood);
    AgentState next = me;
    if (me.coords[2] > 0.5) {
      next.coords[2] = me.coords[2] - 1.0;
      return next;
    }
    int my_team = team_of(agent);
    int hostile = 0;
    for (size_t k = 0; k < hood.ids.size(); ++k) {
      int j = hood.ids[k];
      if (j == agent || team_of(j) == my_team) continue;
      if (hood.states[k]->coords[2] > 0.5) continue;
      if (xy_dist(me, *hood.states[k]) <= contact_dist_) hostile += 1;
    }
    if (hostile >= 2) {
      next.coords[2] = double(cfg_.freeze_steps);  // knocked out in place
      return next;
    }
    move_xy(me, action, cfg_.graph.epsilon, cfg_.box_half_width, next);
    return next;
  }

  void refresh_furniture(const JointState& agents_now, Furniture& f,
                         Rng& rng) const override {
    double hw = cfg_.box_half_width;
    for (int p = 0; p < f.count(); ++p) {
      if (!f.active[p]) continue;
      for (const auto& s : agents_now) {
        if (s.coords[2] > 0.5) continue;
        if (point_dist(s, &f.points[2 * p]) <= pickup_radius_) {
          f.points[2 * p] = rng.uniform(-hw, hw);
          f.points[2 * p + 1] = rng.uniform(-hw, hw);
          break;
        }
      }
    }
  }

 protected:
  int coord_dim() const override { return 3; }
  int furniture_count() const override { return cfg_.resources; }

 private:
  // Members of `team` (excluding knocked-out ones) within kill range of the
  // victim. Every such agent is within d of anyone else in kill range of the
  // same victim, so the subject's one-hop view always contains all of them.
  int killers_near(const Neighborhood& hood, int victim, int team) const {
    const AgentState* vs = nullptr;
    for (size_t k = 0; k < hood.ids.size(); ++k)
      if (hood.ids[k] == victim) vs = hood.states[k];
    if (!vs) return 0;
    int n = 0;
    for (size_t k = 0; k < hood.ids.size(); ++k) {
      int j = hood.ids[k];
      if (j == victim || team_of(j) != team) continue;
      if (hood.states[k]->coords[2] > 0.5) continue;
      if (xy_dist(*vs, *hood.states[k]) <= contact_dist_) n += 1;
    }
    return n;
  }
};

}  // namespace

EnvConfig finalize_env_config(EnvConfig cfg) {
  if (cfg.agents < 1) throw std::invalid_argument("need at least one agent");
  if (cfg.episode_length < 1) throw std::invalid_argument("episode_length must be positive");
  if (cfg.freeze_steps < 0) throw std::invalid_argument("freeze_steps must be nonnegative");
  if (cfg.pellets < 0 || cfg.resources < 0 || cfg.adversaries < 0)
    throw std::invalid_argument("furniture counts must be nonnegative");

  if (cfg.kind == EnvKind::Ising) {
    if (cfg.lattice_side == 0)
      cfg.lattice_side = int(std::ceil(std::sqrt(double(cfg.agents))));
    if (cfg.lattice_side * cfg.lattice_side < cfg.agents)
      throw std::invalid_argument("lattice too small for agent count");
    cfg.graph.metric = Metric::LatticeAdjacency;
    cfg.graph.d = 1.0;
    cfg.graph.epsilon = 0.0;
    cfg.graph.lattice_period = cfg.lattice_side;
    cfg.graph.spatial_dim = 2;
    cfg.reward_bound = 1.0;
    cfg.pellets = cfg.resources = cfg.adversaries = 0;
    return cfg;
  }

  // planar environments
  cfg.graph.metric = Metric::Euclidean;
  cfg.graph.spatial_dim = 2;
  cfg.graph.lattice_period = 0;
  cfg.reward_bound = 10.0;
  if (cfg.graph.d <= 0.0) throw std::invalid_argument("interaction radius must be positive");
  if (cfg.graph.epsilon < 0.0) throw std::invalid_argument("epsilon must be nonnegative");
  if (cfg.graph.epsilon > cfg.graph.d)
    throw std::invalid_argument("per-step motion bound exceeds interaction radius");
  if (cfg.box_half_width <= 0.0)
    throw std::invalid_argument("activity region must have positive size");

  switch (cfg.kind) {
    case EnvKind::FoodCollection:
      if (cfg.pellets == 0) cfg.pellets = std::max(1, cfg.agents / 2);
      cfg.resources = cfg.adversaries = 0;
      break;
    case EnvKind::Grassland:
      if (cfg.pellets == 0) cfg.pellets = std::max(1, cfg.agents / 2);
      if (cfg.adversaries == 0) cfg.adversaries = cfg.agents / 2;
      if (cfg.adversaries >= cfg.agents)
        throw std::invalid_argument("grassland needs at least one grazer");
      cfg.resources = 0;
      break;
    case EnvKind::AdversarialBattle:
      if (cfg.resources == 0) cfg.resources = std::max(1, cfg.agents / 2);
      cfg.pellets = cfg.adversaries = 0;
      break;
    default:
      throw std::invalid_argument("unknown environment kind");
  }
  return cfg;
}

std::shared_ptr<Environment> make_environment(const EnvConfig& raw) {
  EnvConfig cfg = finalize_env_config(raw);
  switch (cfg.kind) {
    case EnvKind::Ising:
      return std::make_shared<IsingEnv>(cfg);
    case EnvKind::FoodCollection:
      return std::make_shared<FoodCollectionEnv>(cfg);
    case EnvKind::Grassland:
      return std::make_shared<GrasslandEnv>(cfg);
    case EnvKind::AdversarialBattle:
      return std::make_shared<AdversarialBattleEnv>(cfg);
  }
  throw std::invalid_argument("unknown environment kind");
}

std::vector<double> rollout_totals(const Environment& env,
                                   const ActionProvider& provider,
                                   uint64_t seed, int episodes) {
  if (episodes < 1) throw std::invalid_argument("episodes must be positive");
  std::vector<double> totals;
  totals.reserve(episodes);
  for (int ep = 0; ep < episodes; ++ep) {
    Rng rng(derive_stream(seed, uint64_t(ep), 0));
    WorldState world = env.sample_world(rng);
    double total = 0.0;
    for (int t = 0; t < env.config().episode_length; ++t) {
      StepOutcome out = env.step_world(world, provider(world), rng);
      for (double r : out.rewards) total += r;
      world = std::move(out.world);
    }
    totals.push_back(total);
  }
  return totals;
}

}  // namespace darl1n

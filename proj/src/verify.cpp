#include "darl1n/verify.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "darl1n/config.hpp"
#include "darl1n/coordinator.hpp"
#include "darl1n/learner.hpp"
#include "darl1n/tabular.hpp"

namespace darl1n {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

JointPolicy random_policy(const TabularMdp& mdp, Rng& rng) {
  JointPolicy policy(static_cast<size_t>(mdp.agents));
  const long S = joint_state_count(mdp);
  for (int i = 0; i < mdp.agents; ++i) {
    policy[size_t(i)].resize(size_t(S));
    for (long s = 0; s < S; ++s)
      policy[size_t(i)][size_t(s)] =
          int(rng.pick(size_t(mdp.action_sizes[size_t(i)])));
  }
  return policy;
}

// One-step Bellman backup residual of q under `policy`, written directly
// from the factored transition product so it does not share code with the
// fixed-point solver it is checking.
double bellman_residual(const TabularMdp& mdp, const JointPolicy& policy,
                        const std::vector<std::vector<double>>& q) {
  const long S = joint_state_count(mdp);
  const long A = joint_action_count(mdp);
  double worst = 0.0;
  std::vector<int> next_action(static_cast<size_t>(mdp.agents));
  for (int i = 0; i < mdp.agents; ++i) {
    const long LA = local_action_count(mdp, i);
    for (long s = 0; s < S; ++s) {
      const auto sd = decode_digits(s, mdp.state_sizes);
      for (long a = 0; a < A; ++a) {
        const auto ad = decode_digits(a, mdp.action_sizes);
        const long ls = local_state_index(mdp, i, sd);
        const long la = local_action_index(mdp, i, ad);
        double backup = mdp.reward[size_t(i)][size_t(ls * LA + la)];
        double acc = 0.0;
        for (long sn = 0; sn < S; ++sn) {
          const auto snd = decode_digits(sn, mdp.state_sizes);
          double p = 1.0;
          for (int j = 0; j < mdp.agents && p != 0.0; ++j) {
            const long lsj = local_state_index(mdp, j, sd);
            const long row = lsj * mdp.action_sizes[size_t(j)] + ad[size_t(j)];
            p *= mdp.transition[size_t(j)][size_t(row)][size_t(snd[size_t(j)])];
          }
          if (p == 0.0) continue;
          for (int j = 0; j < mdp.agents; ++j)
            next_action[size_t(j)] = policy[size_t(j)][size_t(sn)];
          const long an = encode_digits(next_action, mdp.action_sizes);
          acc += p * q[size_t(i)][size_t(sn * A + an)];
        }
        backup += mdp.gamma * acc;
        worst = std::max(worst,
                         std::abs(backup - q[size_t(i)][size_t(s * A + a)]));
      }
    }
  }
  return worst;
}

}  // namespace

CheckResult check_exact_value_consistency() {
  constexpr double kResidualTol = 1e-9;
  constexpr double kClosedFormTol = 1e-8;  // fixed point stops at 1e-10/(1-g)

  const std::array<double, 3> gammas{0.5, 0.9, 0.95};
  double worst = 0.0;
  int mdps = 0;
  for (size_t gi = 0; gi < gammas.size(); ++gi) {
    for (uint64_t seed = 0; seed < 2; ++seed) {
      TabularMdp mdp =
          random_local_mdp(3, 3, 2, gammas[gi], 1.0, derive_stream(11, gi, seed));
      Rng prng(derive_stream(12, gi, seed));
      const JointPolicy policy = random_policy(mdp, prng);
      const auto q = exact_q(mdp, policy);
      worst = std::max(worst, bellman_residual(mdp, policy, q));
      ++mdps;
    }
  }

  // single state, reward 1 forever: value is the geometric series 1/(1-g)
  TabularMdp unit;
  unit.agents = 1;
  unit.state_sizes = {1};
  unit.action_sizes = {1};
  unit.hoods = {{0}};
  unit.transition = {{{1.0}}};
  unit.reward = {{1.0}};
  unit.gamma = 0.95;
  unit.reward_bound = 1.0;
  validate_mdp(unit);
  const double gap20 = std::abs(exact_q(unit, JointPolicy{{0}})[0][0] - 20.0);

  CheckResult res;
  res.name = "tabular-solver-consistency";
  res.pass = worst <= kResidualTol && gap20 <= kClosedFormTol;
  res.detail = std::to_string(mdps) +
               " random 3-agent MDPs: worst Bellman residual " + fmt(worst) +
               " (tol " + fmt(kResidualTol) + "); geometric-series value off by " +
               fmt(gap20);
  return res;
}

CheckResult check_value_truncation_bound() {
  constexpr double kSlack = 1e-7;  // covers the solver's fixed-point stop
  const std::array<double, 3> gammas{0.5, 0.9, 0.95};
  const std::array<double, 3> bounds{0.5, 1.0, 2.0};

  const auto t0 = Clock::now();
  int mdps = 0;
  long scanned = 0;
  long violations = 0;
  double worst_ratio = 0.0;
  double worst_gap = 0.0;
  for (size_t gi = 0; gi < gammas.size(); ++gi) {
    for (uint64_t seed = 0; seed < 8; ++seed) {
      const int states = 2 + int(seed % 2);
      const double rbar = bounds[seed % 3];
      TabularMdp mdp = random_local_mdp(3, states, 2, gammas[gi], rbar,
                                        derive_stream(21, gi, seed));
      Rng prng(derive_stream(22, gi, seed));
      const JointPolicy policy = random_policy(mdp, prng);
      const auto q = exact_q(mdp, policy);
      const double bound = truncation_bound(rbar, gammas[gi]);
      const long S = joint_state_count(mdp);
      const long A = joint_action_count(mdp);
      for (int agent = 0; agent < mdp.agents; ++agent) {
        const long LS = local_state_count(mdp, agent);
        const long LA = local_action_count(mdp, agent);
        const long ES = S / LS;
        const long EA = A / LA;

        // uniform weights plus one random normalized weight table: the bound
        // may not depend on the choice
        std::vector<std::vector<double>> w(size_t(LS * LA),
                                           std::vector<double>(size_t(ES * EA)));
        Rng wrng(derive_stream(23, uint64_t(mdps), uint64_t(agent)));
        for (auto& row : w) {
          double sum = 0.0;
          for (auto& x : row) {
            x = wrng.uniform(0.1, 1.0);
            sum += x;
          }
          for (auto& x : row) x /= sum;
        }
        const std::array<TruncationWeights, 2> variants = {
            TruncationWeights{},
            TruncationWeights{[&w](long lsa, long esa) {
              return w[size_t(lsa)][size_t(esa)];
            }}};

        for (const auto& weights : variants) {
          const auto trunc = truncated_q(mdp, q[size_t(agent)], agent, weights);
          for (long s = 0; s < S; ++s) {
            const auto sd = decode_digits(s, mdp.state_sizes);
            const long ls = local_state_index(mdp, agent, sd);
            for (long a = 0; a < A; ++a) {
              const auto ad = decode_digits(a, mdp.action_sizes);
              const long la = local_action_index(mdp, agent, ad);
              const double gap = std::abs(trunc[size_t(ls * LA + la)] -
                                          q[size_t(agent)][size_t(s * A + a)]);
              if (gap > bound + kSlack) ++violations;
              worst_gap = std::max(worst_gap, gap);
              worst_ratio = std::max(worst_ratio, gap / bound);
              ++scanned;
            }
          }
        }
      }
      ++mdps;
    }
  }
  const double elapsed = seconds_since(t0);

  CheckResult res;
  res.name = "value-truncation-bound";
  res.pass = violations == 0 && mdps >= 20;
  res.detail = std::to_string(mdps) + " MDPs / " + std::to_string(scanned) +
               " table entries: " + std::to_string(violations) +
               " bound violations, worst gap/bound ratio " + fmt(worst_ratio) +
               " (worst gap " + fmt(worst_gap) + "), " + fmt(elapsed) + " s";
  return res;
}

CheckResult check_one_step_containment() {
  constexpr long kStepsPerCombo = 100000;
  struct Scale {
    double d, epsilon, half_width;
  };
  // interaction radius / motion bound / activity box, by published scale
  const std::array<Scale, 5> scales{{{0.15, 0.05, 1.0},
                                     {0.2, 0.10, 1.5},
                                     {0.25, 0.15, 2.0},
                                     {0.3, 0.20, 2.5},
                                     {0.35, 0.25, 3.0}}};
  const std::array<EnvKind, 3> kinds{EnvKind::FoodCollection, EnvKind::Grassland,
                                     EnvKind::AdversarialBattle};

  long steps = 0;
  long containment = 0;
  long motion = 0;
  for (size_t ki = 0; ki < kinds.size(); ++ki) {
    for (size_t si = 0; si < scales.size(); ++si) {
      EnvConfig ec;
      ec.kind = kinds[ki];
      ec.agents = 4;
      ec.graph.d = scales[si].d;
      ec.graph.epsilon = scales[si].epsilon;
      ec.box_half_width = scales[si].half_width;
      const auto env = make_environment(ec);
      const GraphConfig graph = env->graph();

      Rng rng(derive_stream(31, ki, si));
      WorldState world = env->sample_world(rng);
      const JointState start = world.agents;
      const StepFn step = [&](const JointState& prev, Rng& r) {
        world.agents = prev;
        std::vector<std::vector<double>> acts(size_t(env->agents()));
        for (auto& a : acts) a = {r.uniform(-1.0, 1.0), r.uniform(-1.0, 1.0)};
        world = env->step_world(world, acts, r).world;
        return world.agents;
      };
      const WalkReport rep =
          check_containment(start, step, graph, kStepsPerCombo, rng);
      steps += rep.steps;
      containment += rep.containment_violations;
      motion += rep.motion_violations;
    }
  }

  // detector sensitivity: an agent that jumps farther than epsilon must be
  // reported, otherwise the zeros above mean nothing
  long faults = 0;
  {
    EnvConfig ec;
    ec.kind = EnvKind::FoodCollection;
    ec.agents = 4;
    ec.graph.d = 0.15;
    ec.graph.epsilon = 0.05;
    ec.box_half_width = 1.0;
    const auto env = make_environment(ec);
    Rng rng(derive_stream(32, 0, 0));
    WorldState world = env->sample_world(rng);
    const JointState start = world.agents;
    long n = 0;
    const StepFn bad = [&](const JointState& prev, Rng& r) {
      world.agents = prev;
      std::vector<std::vector<double>> acts(size_t(env->agents()));
      for (auto& a : acts) a = {r.uniform(-1.0, 1.0), r.uniform(-1.0, 1.0)};
      world = env->step_world(world, acts, r).world;
      if (++n % 25 == 0) {
        auto& c = world.agents[0].coords;
        c[0] = c[0] > 0.0 ? c[0] - 0.7 : c[0] + 0.7;  // far beyond epsilon
      }
      return world.agents;
    };
    const WalkReport rep = check_containment(start, bad, env->graph(), 2000, rng);
    faults = rep.motion_violations;
  }

  CheckResult res;
  res.name = "one-step-containment";
  res.pass = containment == 0 && motion == 0 && faults > 0;
  res.detail = std::to_string(steps) + " steps over 3 environments x 5 scales: " +
               std::to_string(containment) + " containment / " +
               std::to_string(motion) +
               " motion violations; injected teleport flagged " +
               std::to_string(faults) + "x in 2000 steps";
  return res;
}

namespace {

// flat index into the concatenation of every layer's weights then biases
struct FlatCoord {
  size_t layer = 0;
  bool bias = false;
  size_t off = 0;
};

FlatCoord locate(const Mlp& net, size_t flat) {
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    if (flat < layer.w.size()) return {l, false, flat};
    flat -= layer.w.size();
    if (flat < layer.b.size()) return {l, true, flat};
    flat -= layer.b.size();
  }
  throw std::out_of_range("parameter index past the end of the net");
}

double read_coord(const Mlp& net, const FlatCoord& c) {
  const auto& layer = net.layers[c.layer];
  return c.bias ? layer.b[c.off] : layer.w[c.off];
}

void write_coord(Mlp& net, const FlatCoord& c, double v) {
  auto& layer = net.layers[c.layer];
  (c.bias ? layer.b[c.off] : layer.w[c.off]) = v;
}

}  // namespace

CheckResult check_gradient_fidelity() {
  constexpr double kTol = 1e-4;        // relative error allowed per coordinate
  constexpr double kDenomFloor = 1e-6; // keeps dead-unit zeros from dividing by zero
  constexpr int kConfigs = 50;
  constexpr int kCoordsPerNet = 20;

  const std::array<EnvKind, 4> kinds{EnvKind::Ising, EnvKind::FoodCollection,
                                     EnvKind::Grassland,
                                     EnvKind::AdversarialBattle};
  double worst_critic = 0.0;
  double worst_actor = 0.0;
  int probes = 0;
  for (int c = 0; c < kConfigs; ++c) {
    RunConfig rc;
    rc.env = kinds[size_t(c % 4)];
    rc.agents = rc.env == EnvKind::Ising ? (c % 2 ? 4 : 9) : 2 + (c / 4) % 2;
    rc.seed = 9000 + uint64_t(c);
    rc.batch = 2 + c % 3;
    resolve_config(rc);

    const auto env = make_environment(make_env_config(rc));
    const NetSpec spec = make_net_spec(*env);
    const ParamTable table = initial_param_table(*env, rc.seed);
    const int agent = c % rc.agents;
    const Mlp critic = init_critic(spec, rc.seed, agent);
    const Mlp target_critic = init_critic(spec, rc.seed + 101, agent);

    Learner ln(env, make_learner_config(rc, agent));
    ln.install(table);
    Rng crng(derive_stream(rc.seed, 41, uint64_t(c)));
    std::vector<InteractionRecord> recs;
    recs.reserve(size_t(rc.batch));
    for (int b = 0; b < rc.batch; ++b)
      recs.push_back(ln.collect_interaction(crng));
    std::vector<const InteractionRecord*> batch;
    for (const auto& r : recs) batch.push_back(&r);

    const Mlp gc = critic_batch_gradient(critic, spec, rc.gamma, batch,
                                         table.targets, target_critic);
    const Mlp& policy = table.policies[size_t(agent)];
    const Mlp ga = actor_batch_gradient(policy, critic, spec, batch, agent);

    // critic objective: mean squared error against targets that depend only
    // on the frozen nets, so they are constants here
    const double inv = 1.0 / double(batch.size());
    std::vector<double> y(batch.size());
    std::vector<std::vector<double>> cenc(batch.size());
    std::vector<std::vector<double>> penc(batch.size());
    std::vector<size_t> own_row(batch.size());
    const int adim = spec.critic_pad.action_dim;
    for (size_t b = 0; b < batch.size(); ++b) {
      const InteractionRecord& rec = *batch[b];
      y[b] = td_target(rec, spec, table.targets, target_critic, rc.gamma);
      cenc[b] = encode_neighborhood(rec.nbr_ids, rec.nbr_feats, rec.nbr_actions,
                                    agent, spec.critic_pad);
      penc[b] = encode_neighborhood(rec.nbr_ids, rec.nbr_feats, {}, agent,
                                    spec.policy_pad);
      const auto it =
          std::find(rec.nbr_ids.begin(), rec.nbr_ids.end(), agent);
      own_row[b] = size_t(it - rec.nbr_ids.begin());
    }
    const auto critic_loss = [&](const Mlp& net) {
      double s = 0.0;
      for (size_t b = 0; b < batch.size(); ++b) {
        const double q = mlp_forward(net, cenc[b])[0];
        s += (q - y[b]) * (q - y[b]);
      }
      return s * inv;
    };
    // actor objective: negated mean critic value with the subject's stored
    // action replaced by the policy's output, matching the analytic path
    const auto actor_objective = [&](const Mlp& pol) {
      double s = 0.0;
      for (size_t b = 0; b < batch.size(); ++b) {
        const auto own = mlp_forward(pol, penc[b]);
        std::vector<double> actions = batch[b]->nbr_actions;
        std::copy(own.begin(), own.end(),
                  actions.begin() + long(own_row[b]) * adim);
        const auto enc = encode_neighborhood(batch[b]->nbr_ids,
                                             batch[b]->nbr_feats, actions,
                                             agent, spec.critic_pad);
        s += mlp_forward(critic, enc)[0];
      }
      return -s * inv;
    };

    Rng prng(derive_stream(rc.seed, 42, uint64_t(c)));
    const auto probe = [&](const Mlp& params, const Mlp& grads,
                           const auto& objective, double& worst) {
      const size_t total = params.param_count();
      for (int k = 0; k < kCoordsPerNet; ++k) {
        const FlatCoord fc = locate(params, prng.pick(total));
        Mlp work = params;
        const double base = read_coord(work, fc);
        const double h = 1e-5 * std::max(1.0, std::abs(base));
        write_coord(work, fc, base + h);
        const double jp = objective(work);
        write_coord(work, fc, base - h);
        const double jm = objective(work);
        const double fd = (jp - jm) / (2.0 * h);
        const double an = read_coord(grads, fc);
        const double rel = std::abs(an - fd) /
                           std::max({std::abs(an), std::abs(fd), kDenomFloor});
        worst = std::max(worst, rel);
        ++probes;
      }
    };
    probe(critic, gc, critic_loss, worst_critic);
    probe(policy, ga, actor_objective, worst_actor);
  }

  CheckResult res;
  res.name = "gradient-fidelity";
  res.pass = worst_critic <= kTol && worst_actor <= kTol;
  res.detail = std::to_string(kConfigs) + " configurations / " +
               std::to_string(probes) +
               " coordinates: worst relative error critic " + fmt(worst_critic) +
               ", actor " + fmt(worst_actor) + " (tol " + fmt(kTol) + ")";
  return res;
}

CheckResult check_environment_conformance() {
  constexpr long kProbesPerEnv = 100000;
  struct Plan {
    EnvKind kind;
    int agents;
  };
  const std::array<Plan, 4> plans{{{EnvKind::Ising, 9},
                                   {EnvKind::FoodCollection, 6},
                                   {EnvKind::Grassland, 6},
                                   {EnvKind::AdversarialBattle, 6}}};

  long bound_viol = 0;
  long reward_locality_viol = 0;
  long transition_locality_viol = 0;
  long motion_viol = 0;
  long far_probes = 0;
  long probes = 0;
  for (size_t ei = 0; ei < plans.size(); ++ei) {
    RunConfig rc;
    rc.env = plans[ei].kind;
    rc.agents = plans[ei].agents;
    rc.seed = 7000 + ei;
    resolve_config(rc);
    const auto env = make_environment(make_env_config(rc));
    const EnvConfig& ec = env->config();
    const int m = env->agents();

    Rng rng(derive_stream(51, ei, 0));
    const auto random_action = [&](Rng& r) {
      if (env->action_space() == ActionSpace::DiscreteSpin) {
        const double u = r.uniform();
        return std::vector<double>{u, 1.0 - u};
      }
      return std::vector<double>{r.uniform(-1.0, 1.0), r.uniform(-1.0, 1.0)};
    };

    WorldState world = env->sample_world(rng);
    for (long p = 0; p < kProbesPerEnv; ++p) {
      ++probes;
      if (p % 16 == 0) {
        world = env->sample_world(rng);  // fresh starts
      } else {
        std::vector<std::vector<double>> acts(static_cast<size_t>(m));
        for (auto& a : acts) a = random_action(rng);
        world = env->step_world(world, acts, rng).world;  // reachable states
      }
      const int i = int(rng.pick(size_t(m)));
      const Neighborhood hood = env->local_view(world, i);
      std::vector<std::vector<double>> hacts(hood.ids.size());
      size_t self = 0;
      for (size_t k = 0; k < hood.ids.size(); ++k) {
        hacts[k] = random_action(rng);
        if (hood.ids[k] == i) self = k;
      }

      const double r1 = env->reward(i, hood, hacts, world.furniture);
      if (!(std::abs(r1) <= ec.reward_bound + 1e-12)) ++bound_viol;

      const uint64_t tseed = derive_stream(rc.seed, 0xABCD, uint64_t(p));
      AgentState t1;
      {
        Rng tr(tseed);
        t1 = env->transition_agent(i, hood, hacts[self], world.furniture, tr);
      }
      if (!validate_motion(world.agents[size_t(i)], t1, ec.graph)) ++motion_viol;

      // perturb an agent outside the neighborhood; nothing about agent i's
      // view, reward or transition may change
      int far = -1;
      for (int j = 0; j < m; ++j) {
        if (!std::binary_search(hood.ids.begin(), hood.ids.end(), j)) {
          far = j;
          break;
        }
      }
      if (far < 0) continue;
      ++far_probes;
      WorldState w2 = world;
      if (ec.kind == EnvKind::Ising) {
        auto& spin = w2.agents[size_t(far)].coords[2];
        spin = -spin;  // lattice positions are fixed; the payload is the knob
      } else {
        // the corner opposite agent i is farther than any interaction radius
        const auto& me = world.agents[size_t(i)].coords;
        w2.agents[size_t(far)].coords[0] =
            me[0] > 0.0 ? -ec.box_half_width : ec.box_half_width;
        w2.agents[size_t(far)].coords[1] =
            me[1] > 0.0 ? -ec.box_half_width : ec.box_half_width;
      }
      const Neighborhood hood2 = env->local_view(w2, i);
      if (hood2.ids != hood.ids) {
        ++reward_locality_viol;  // the far agent must not enter the view
        continue;
      }
      const double r2 = env->reward(i, hood2, hacts, w2.furniture);
      if (r2 != r1) ++reward_locality_viol;
      AgentState t2;
      {
        Rng tr(tseed);
        t2 = env->transition_agent(i, hood2, hacts[self], w2.furniture, tr);
      }
      if (t2.coords != t1.coords) ++transition_locality_viol;
    }
  }

  CheckResult res;
  res.name = "environment-conformance";
  res.pass = bound_viol == 0 && reward_locality_viol == 0 &&
             transition_locality_viol == 0 && motion_viol == 0;
  res.detail = std::to_string(probes) + " probes over 4 environments (" +
               std::to_string(far_probes) +
               " with a perturbable non-neighbor): reward bound " +
               std::to_string(bound_viol) + ", reward locality " +
               std::to_string(reward_locality_viol) + ", transition locality " +
               std::to_string(transition_locality_viol) + ", motion bound " +
               std::to_string(motion_viol) + " violations";
  return res;
}

std::vector<CheckResult> run_verification_suite() {
  return {check_exact_value_consistency(), check_value_truncation_bound(),
          check_one_step_containment(), check_gradient_fidelity(),
          check_environment_conformance()};
}

}  // namespace darl1n

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "darl1n/tabular.hpp"

using namespace darl1n;

namespace {

// Single agent ping-ponging between two states; reward 1 only in state 0.
TabularMdp two_state_chain(double gamma) {
  TabularMdp mdp;
  mdp.agents = 1;
  mdp.state_sizes = {2};
  mdp.action_sizes = {1};
  mdp.hoods = {{0}};
  mdp.transition = {{{0.0, 1.0}, {1.0, 0.0}}};
  mdp.reward = {{1.0, 0.0}};
  mdp.gamma = gamma;
  mdp.reward_bound = 1.0;
  return mdp;
}

JointPolicy random_policy(const TabularMdp& mdp, uint64_t seed) {
  Rng rng(seed);
  long S = joint_state_count(mdp);
  JointPolicy pi(size_t(mdp.agents), std::vector<int>(size_t(S)));
  for (auto& row : pi)
    for (auto& a : row) a = int(rng.pick(size_t(mdp.action_sizes[0])));
  return pi;
}

// Independent joint-transition probability used to cross-check the solver.
double prob_of(const TabularMdp& mdp, long s, long a, long sn) {
  auto sd = decode_digits(s, mdp.state_sizes);
  auto ad = decode_digits(a, mdp.action_sizes);
  auto nd = decode_digits(sn, mdp.state_sizes);
  double p = 1.0;
  for (int i = 0; i < mdp.agents; ++i) {
    long ls = local_state_index(mdp, i, sd);
    long row = ls * mdp.action_sizes[size_t(i)] + ad[size_t(i)];
    p *= mdp.transition[size_t(i)][size_t(row)][size_t(nd[size_t(i)])];
  }
  return p;
}

double reward_of(const TabularMdp& mdp, int agent, long s, long a) {
  auto sd = decode_digits(s, mdp.state_sizes);
  auto ad = decode_digits(a, mdp.action_sizes);
  long ls = local_state_index(mdp, agent, sd);
  long la = local_action_index(mdp, agent, ad);
  return mdp.reward[size_t(agent)][size_t(ls * local_action_count(mdp, agent) + la)];
}

}  // namespace

TEST_CASE("two-state chain matches the closed form") {
  for (double gamma : {0.5, 0.9, 0.95}) {
    auto mdp = two_state_chain(gamma);
    JointPolicy pi = {{0, 0}};
    auto q = exact_q(mdp, pi);
    double q0 = 1.0 / (1.0 - gamma * gamma);
    double q1 = gamma / (1.0 - gamma * gamma);
    CHECK(q[0][0] == doctest::Approx(q0).epsilon(1e-8));
    CHECK(q[0][1] == doctest::Approx(q1).epsilon(1e-8));
  }
}

TEST_CASE("fixed point satisfies the bellman identity componentwise") {
  auto mdp = random_local_mdp(3, 2, 2, 0.9, 1.0, 71);
  auto pi = random_policy(mdp, 3);
  auto q = exact_q(mdp, pi);
  long S = joint_state_count(mdp), A = joint_action_count(mdp);
  for (int i = 0; i < 3; ++i) {
    for (long s = 0; s < S; ++s) {
      for (long a = 0; a < A; ++a) {
        double rhs = reward_of(mdp, i, s, a);
        for (long sn = 0; sn < S; ++sn) {
          std::vector<int> ad(3);
          for (int k = 0; k < 3; ++k) ad[size_t(k)] = pi[size_t(k)][size_t(sn)];
          long an = encode_digits(ad, mdp.action_sizes);
          rhs += mdp.gamma * prob_of(mdp, s, a, sn) * q[size_t(i)][size_t(sn * A + an)];
        }
        CHECK(q[size_t(i)][size_t(s * A + a)] == doctest::Approx(rhs).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("cooperative optimum dominates any fixed policy and its greedy attains it") {
  auto mdp = random_local_mdp(3, 2, 2, 0.85, 1.0, 12);
  auto vi = value_iteration(mdp, 1);
  long S = joint_state_count(mdp), A = joint_action_count(mdp);
  for (uint64_t seed : {4u, 5u, 6u}) {
    auto q = exact_q(mdp, random_policy(mdp, seed));
    for (long k = 0; k < S * A; ++k) CHECK(vi.q[size_t(k)] >= q[1][size_t(k)] - 1e-7);
  }
  // evaluate the greedy joint policy exactly: it must reproduce the optimum
  JointPolicy greedy(size_t(3), std::vector<int>(size_t(S)));
  for (long s = 0; s < S; ++s) {
    auto ad = decode_digits(vi.greedy[size_t(s)], mdp.action_sizes);
    for (int i = 0; i < 3; ++i) greedy[size_t(i)][size_t(s)] = ad[size_t(i)];
  }
  auto q_greedy = exact_q(mdp, greedy);
  for (long k = 0; k < S * A; ++k)
    CHECK(q_greedy[1][size_t(k)] == doctest::Approx(vi.q[size_t(k)]).epsilon(1e-7));
}

TEST_CASE("duplicate actions break ties toward the lowest index") {
  auto mdp = random_local_mdp(1, 3, 1, 0.9, 1.0, 8);
  // clone the single action into two identical ones
  mdp.action_sizes = {2};
  auto& t = mdp.transition[0];
  std::vector<std::vector<double>> t2;
  for (long s = 0; s < 3; ++s) {
    t2.push_back(t[size_t(s)]);
    t2.push_back(t[size_t(s)]);
  }
  mdp.transition[0] = t2;
  std::vector<double> r2;
  for (long s = 0; s < 3; ++s) {
    r2.push_back(mdp.reward[0][size_t(s)]);
    r2.push_back(mdp.reward[0][size_t(s)]);
  }
  mdp.reward[0] = r2;
  auto vi = value_iteration(mdp, 0);
  for (int g : vi.greedy) CHECK(g == 0);
}

TEST_CASE("truncation with a full neighborhood is exact") {
  auto mdp = random_local_mdp(2, 3, 2, 0.9, 1.0, 21);  // line hood = everyone
  auto pi = random_policy(mdp, 9);
  auto q = exact_q(mdp, pi);
  for (int i = 0; i < 2; ++i) {
    auto trunc = truncated_q(mdp, q[size_t(i)], i);
    REQUIRE(trunc.size() == q[size_t(i)].size());
    for (size_t k = 0; k < trunc.size(); ++k) CHECK(trunc[k] == q[size_t(i)][k]);
  }
}

TEST_CASE("neighborhood truncation stays within the discount-scaled bound") {
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    for (double gamma : {0.5, 0.9, 0.95}) {
      auto mdp = random_local_mdp(3, 2, 2, gamma, 1.0, seed);
      auto pi = random_policy(mdp, seed * 17 + 1);
      auto q = exact_q(mdp, pi);
      double bound = truncation_bound(1.0, gamma);
      long A = joint_action_count(mdp);
      for (int i = 0; i < 3; ++i) {
        auto trunc = truncated_q(mdp, q[size_t(i)], i);
        long LA = local_action_count(mdp, i);
        long S = joint_state_count(mdp);
        for (long s = 0; s < S; ++s) {
          auto sd = decode_digits(s, mdp.state_sizes);
          long ls = local_state_index(mdp, i, sd);
          for (long a = 0; a < A; ++a) {
            auto ad = decode_digits(a, mdp.action_sizes);
            long la = local_action_index(mdp, i, ad);
            double gap = std::fabs(trunc[size_t(ls * LA + la)] -
                                   q[size_t(i)][size_t(s * A + a)]);
            CHECK(gap <= bound + 1e-9);
          }
        }
      }
    }
  }
}

TEST_CASE("custom truncation weights are validated and honored") {
  auto mdp = random_local_mdp(3, 2, 2, 0.9, 1.0, 33);
  auto q = exact_q(mdp, random_policy(mdp, 2));
  // all mass on the first excluded configuration
  TruncationWeights point = [](long, long excl) { return excl == 0 ? 1.0 : 0.0; };
  auto t_point = truncated_q(mdp, q[0], 0, point);
  auto t_unif = truncated_q(mdp, q[0], 0);
  bool differs = false;
  for (size_t k = 0; k < t_point.size(); ++k)
    differs |= std::fabs(t_point[k] - t_unif[k]) > 1e-12;
  CHECK(differs);

  TruncationWeights bad = [](long, long) { return 0.3; };
  CHECK_THROWS_AS(truncated_q(mdp, q[0], 0, bad), std::invalid_argument);
  TruncationWeights negative = [](long, long excl) {
    return excl == 0 ? 1.5 : -0.5 / 7.0;
  };
  CHECK_THROWS_AS(truncated_q(mdp, q[0], 0, negative), std::invalid_argument);
}

TEST_CASE("gap bound closed form and domain checks") {
  CHECK(truncation_bound(1.0, 0.5) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(truncation_bound(1.0, 0.95) == doctest::Approx(38.0).epsilon(1e-12));
  CHECK(truncation_bound(10.0, 0.95) == doctest::Approx(380.0).epsilon(1e-12));
  CHECK_THROWS_AS(truncation_bound(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(truncation_bound(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(truncation_bound(0.0, 0.5), std::invalid_argument);
}

TEST_CASE("mdp validation rejects corrupt tables") {
  auto mdp = random_local_mdp(2, 2, 2, 0.9, 1.0, 3);
  auto broken = mdp;
  broken.transition[0][0][0] += 0.1;
  CHECK_THROWS_AS(validate_mdp(broken), std::invalid_argument);
  broken = mdp;
  broken.reward[1][0] = 5.0;
  CHECK_THROWS_AS(validate_mdp(broken), std::invalid_argument);
  broken = mdp;
  broken.hoods[0] = {1};  // dropped itself
  CHECK_THROWS_AS(validate_mdp(broken), std::invalid_argument);
  broken = mdp;
  broken.gamma = 1.0;
  CHECK_THROWS_AS(validate_mdp(broken), std::invalid_argument);
}

TEST_CASE("bounded random walks never break one-step containment") {
  GraphConfig cfg;
  cfg.d = 0.3;
  cfg.epsilon = 0.1;
  Rng rng(44);
  JointState start;
  for (int i = 0; i < 6; ++i)
    start.push_back(AgentState{{rng.uniform(-1, 1), rng.uniform(-1, 1)}});
  StepFn wander = [&](const JointState& cur, Rng& r) {
    JointState next = cur;
    for (auto& s : next) {
      double ang = r.uniform(0, 6.283185307179586);
      double len = r.uniform(0, 0.1);
      s.coords[0] += len * std::cos(ang);
      s.coords[1] += len * std::sin(ang);
    }
    return next;
  };
  auto rep = check_containment(start, wander, cfg, 500, rng);
  CHECK(rep.steps == 500);
  CHECK(rep.containment_violations == 0);
  CHECK(rep.motion_violations == 0);
}

TEST_CASE("a teleporting agent trips both violation counters") {
  GraphConfig cfg;
  cfg.d = 0.3;
  cfg.epsilon = 0.1;
  JointState start = {AgentState{{0.0, 0.0}}, AgentState{{2.0, 0.0}}};
  StepFn teleport = [](const JointState& cur, Rng&) {
    JointState next = cur;
    next[1].coords[0] = 0.1;  // jump straight into agent 0's neighborhood
    return next;
  };
  Rng rng(1);
  auto rep = check_containment(start, teleport, cfg, 1, rng);
  CHECK(rep.motion_violations >= 1);
  CHECK(rep.containment_violations >= 2);  // both directions see the breach
}

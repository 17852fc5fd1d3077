#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "darl1n/geometry.hpp"
#include "darl1n/rng.hpp"

using namespace darl1n;

namespace {

JointState points(std::initializer_list<std::vector<double>> pts) {
  JointState s;
  for (const auto& p : pts) s.push_back(AgentState{p});
  return s;
}

}  // namespace

TEST_CASE("one-hop set on a line of three agents") {
  GraphConfig cfg;
  cfg.d = 0.15;
  auto s = points({{0.0, 0.0}, {0.1, 0.0}, {1.0, 0.0}});
  CHECK(one_hop_neighbors(s, cfg, 0) == std::vector<int>{0, 1});
  CHECK(one_hop_neighbors(s, cfg, 1) == std::vector<int>{0, 1});
  CHECK(one_hop_neighbors(s, cfg, 2) == std::vector<int>{2});
}

TEST_CASE("isolated agent keeps itself") {
  GraphConfig cfg;
  cfg.d = 0.25;
  auto s = points({{0.0, 0.0}, {0.3, 0.0}});
  CHECK(one_hop_neighbors(s, cfg, 0) == std::vector<int>{0});
  auto single = points({{5.0, -2.0}});
  CHECK(one_hop_neighbors(single, cfg, 0) == std::vector<int>{0});
}

TEST_CASE("boundary distance is inclusive") {
  GraphConfig cfg;
  cfg.d = 0.5;
  auto s = points({{0.0, 0.0}, {0.5, 0.0}});
  CHECK(one_hop_neighbors(s, cfg, 0) == std::vector<int>{0, 1});
}

TEST_CASE("lattice adjacency on a 3x3 torus") {
  GraphConfig cfg;
  cfg.d = 1.0;
  cfg.epsilon = 0.0;
  cfg.metric = Metric::LatticeAdjacency;
  cfg.lattice_period = 3;
  cfg.spatial_dim = 2;
  JointState s;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      s.push_back(AgentState{{double(r), double(c), 1.0}});  // trailing spin ignored
  // Center cell (1,1) = agent 4: the four cardinal sites plus itself.
  CHECK(one_hop_neighbors(s, cfg, 4) == std::vector<int>{1, 3, 4, 5, 7});
  // Corner (0,0) = agent 0 wraps: right 1, left wraps to 2, down 3, up wraps to 6.
  CHECK(one_hop_neighbors(s, cfg, 0) == std::vector<int>{0, 1, 2, 3, 6});
}

TEST_CASE("potential set collapses to one-hop when epsilon is zero") {
  GraphConfig cfg;
  cfg.d = 0.2;
  cfg.epsilon = 0.0;
  Rng rng(7);
  JointState s;
  for (int i = 0; i < 12; ++i)
    s.push_back(AgentState{{rng.uniform(-1, 1), rng.uniform(-1, 1)}});
  for (int i = 0; i < 12; ++i)
    CHECK(potential_neighbors(s, cfg, i) == one_hop_neighbors(s, cfg, i));
}

TEST_CASE("potential set uses radius d + 2*epsilon") {
  GraphConfig cfg;
  cfg.d = 0.15;
  cfg.epsilon = 0.05;
  auto s = points({{0.0, 0.0}, {0.2, 0.0}, {0.26, 0.0}});
  CHECK(one_hop_neighbors(s, cfg, 0) == std::vector<int>{0});
  CHECK(potential_neighbors(s, cfg, 0) == std::vector<int>{0, 1});
  auto sets = neighbor_sets(s, cfg, 0);
  CHECK(sets.one_hop == std::vector<int>{0});
  CHECK(sets.potential == std::vector<int>{0, 1});
}

TEST_CASE("motion validation against the per-step bound") {
  GraphConfig cfg;
  cfg.epsilon = 0.05;
  CHECK(validate_motion(AgentState{{0, 0}}, AgentState{{0.05, 0}}, cfg));
  cfg.epsilon = 0.1;
  CHECK_FALSE(validate_motion(AgentState{{0, 0}}, AgentState{{0.2, 0}}, cfg));
}

TEST_CASE("membership properties on random clouds") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    GraphConfig cfg;
    cfg.d = rng.uniform(0.05, 0.5);
    cfg.epsilon = rng.uniform(0.0, 0.25);
    int m = 2 + int(rng.pick(14));
    JointState s;
    for (int i = 0; i < m; ++i)
      s.push_back(AgentState{{rng.uniform(-2, 2), rng.uniform(-2, 2)}});
    for (int i = 0; i < m; ++i) {
      auto hood = one_hop_neighbors(s, cfg, i);
      auto pot = potential_neighbors(s, cfg, i);
      CHECK(std::binary_search(hood.begin(), hood.end(), i));
      CHECK(std::is_sorted(hood.begin(), hood.end()));
      // one-hop is contained in potential
      CHECK(std::includes(pot.begin(), pot.end(), hood.begin(), hood.end()));
      // symmetry
      for (int j : hood) {
        auto back = one_hop_neighbors(s, cfg, j);
        CHECK(std::binary_search(back.begin(), back.end(), i));
      }
    }
  }
}

TEST_CASE("grid accelerated queries match brute force") {
  Rng rng(99);
  for (int trial = 0; trial < 6; ++trial) {
    GraphConfig cfg;
    cfg.d = rng.uniform(0.1, 0.4);
    cfg.epsilon = rng.uniform(0.0, 0.2);
    int m = 40 + int(rng.pick(60));  // above the grid threshold
    JointState s;
    for (int i = 0; i < m; ++i)
      s.push_back(AgentState{{rng.uniform(-3, 3), rng.uniform(-3, 3)}});
    // Reference: restrict to the first 30 agents so the brute path runs,
    // then check the grid answer on the full cloud against direct distance.
    for (int i = 0; i < m; ++i) {
      auto fast = one_hop_neighbors(s, cfg, i);
      std::vector<int> slow;
      for (int j = 0; j < m; ++j)
        if (j == i || state_distance(s[i], s[j], cfg) <= cfg.d + kDistanceSlack)
          slow.push_back(j);
      CHECK(fast == slow);
      auto fastp = potential_neighbors(s, cfg, i);
      std::vector<int> slowp;
      for (int j = 0; j < m; ++j)
        if (j == i || state_distance(s[i], s[j], cfg) <=
                          cfg.d + 2 * cfg.epsilon + kDistanceSlack)
          slowp.push_back(j);
      CHECK(fastp == slowp);
    }
  }
}

TEST_CASE("mixed dimensions and bad indices are rejected") {
  GraphConfig cfg;
  auto s = points({{0.0, 0.0}, {0.1, 0.0}});
  CHECK_THROWS_AS(state_distance(AgentState{{0, 0}}, AgentState{{0, 0, 0}}, cfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(one_hop_neighbors(s, cfg, 2), std::out_of_range);
  CHECK_THROWS_AS(one_hop_neighbors(s, cfg, -1), std::out_of_range);
}

TEST_CASE("documented two-step walkthrough of neighborhood evolution") {
  GraphConfig cfg;
  cfg.d = 1.0;
  cfg.epsilon = 0.4;
  auto t0 = points({{0.0, 0.0}, {0.45, 0.75}, {1.75, 0.0}, {2.2, 0.0}});
  auto t1 = points({{0.4, 0.0}, {0.45, 1.15}, {1.35, 0.0}, {1.8, 0.0}});
  for (int i = 0; i < 4; ++i)
    CHECK(validate_motion(t0[i], t1[i], cfg));

  CHECK(one_hop_neighbors(t0, cfg, 0) == std::vector<int>{0, 1});
  CHECK(potential_neighbors(t0, cfg, 0) == std::vector<int>{0, 1, 2});
  CHECK(one_hop_neighbors(t1, cfg, 0) == std::vector<int>{0, 2});

  CHECK(potential_neighbors(t0, cfg, 2) == std::vector<int>{0, 1, 2, 3});
  CHECK(one_hop_neighbors(t1, cfg, 2) == std::vector<int>{0, 2, 3});

  // An agent outside the potential set at t cannot be a neighbor at t+1:
  // 3 is outside potential_neighbors(t0, 0), so 3 is not in one_hop(t1, 0).
  auto pot0 = potential_neighbors(t0, cfg, 0);
  CHECK_FALSE(std::binary_search(pot0.begin(), pot0.end(), 3));
  auto hood1 = one_hop_neighbors(t1, cfg, 0);
  CHECK_FALSE(std::binary_search(hood1.begin(), hood1.end(), 3));
}

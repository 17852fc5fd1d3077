#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "darl1n/config.hpp"

using namespace darl1n;

TEST_CASE("empty config yields the published defaults") {
  const RunConfig cfg = parse_config_text("");
  CHECK(cfg.algorithm == "darl1n");
  CHECK(cfg.env == EnvKind::Ising);
  CHECK(cfg.agents == 9);
  CHECK(cfg.seed == 1);
  CHECK(cfg.gamma == doctest::Approx(0.95));
  CHECK(cfg.lr == doctest::Approx(0.01));
  CHECK(cfg.polyak == doctest::Approx(0.01));
  CHECK(cfg.buffer == 1000000);
  CHECK(cfg.batch == 32);  // spin lattice batch size
  CHECK(cfg.episode_length == 25);
  CHECK(cfg.max_transition_number == 100);  // 4 episodes worth
  CHECK(cfg.update_every_episodes == 4);
  CHECK(cfg.transport == "inproc");
  CHECK(cfg.eval_every == 1);
  CHECK(cfg.eval_episodes == 10);
  CHECK(cfg.convergence_window == 90);
  CHECK(cfg.convergence_ratio == doctest::Approx(0.02));
  CHECK(cfg.seeds == std::vector<uint64_t>{1});
}

TEST_CASE("24-agent food collection auto-selects the published ranges") {
  const RunConfig cfg = parse_config_text("env=food_collection\nM=24\n");
  CHECK(cfg.d == doctest::Approx(0.3));
  CHECK(cfg.epsilon == doctest::Approx(0.20));
  CHECK(cfg.box_half_width == doctest::Approx(2.5));
  CHECK(cfg.batch == 1024);
  CHECK(cfg.episode_length == 25);
}

TEST_CASE("range table picks the smallest tabulated count at or above M") {
  const RunConfig g9 = parse_config_text("env=grassland\nM=9\n");
  CHECK(g9.d == doctest::Approx(0.25));
  CHECK(g9.epsilon == doctest::Approx(0.15));
  CHECK(g9.box_half_width == doctest::Approx(2.0));
  CHECK(g9.episode_length == 30);

  const RunConfig g3 = parse_config_text("env=grassland\nM=3\nadversaries=1\n");
  CHECK(g3.d == doctest::Approx(0.15));
  CHECK(g3.episode_length == 25);

  const RunConfig b100 = parse_config_text("env=adversarial_battle\nM=100\n");
  CHECK(b100.d == doctest::Approx(0.35));
  CHECK(b100.epsilon == doctest::Approx(0.25));
  CHECK(b100.box_half_width == doctest::Approx(3.0));
  CHECK(b100.episode_length == 40);
}

TEST_CASE("explicit values win over the table") {
  const RunConfig cfg =
      parse_config_text("env=food_collection\nM=6\nd=0.5\nepsilon=0.1\nbox_half_width=4\n");
  CHECK(cfg.d == doctest::Approx(0.5));
  CHECK(cfg.epsilon == doctest::Approx(0.1));
  CHECK(cfg.box_half_width == doctest::Approx(4.0));
}

TEST_CASE("comments, blank lines and spacing are tolerated") {
  const RunConfig cfg = parse_config_text(
      "# full line comment\n"
      "\n"
      "  env = food_collection   # trailing comment\n"
      "  M=3\n");
  CHECK(cfg.env == EnvKind::FoodCollection);
  CHECK(cfg.agents == 3);
}

TEST_CASE("bad inputs are rejected with ConfigError") {
  CHECK_THROWS_AS(parse_config_text("gamma=1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("gamma=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("gamma=0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("widgets=3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("M nine\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("M=nine\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("M=0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("lr=-0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("polyak=0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("batch=-4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("algorithm=qmix\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("env=pong\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("transport=carrier_pigeon\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("listen=nohost\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("listen=host:\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("seeds=3,,5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("stop_on_convergence=maybe\n"), ConfigError);
}

TEST_CASE("motion bound larger than the interaction radius is inconsistent") {
  CHECK_THROWS_AS(parse_config_text("env=food_collection\nM=3\nd=0.2\nepsilon=0.3\n"),
                  ConfigError);
}

TEST_CASE("grassland with no grazers left is rejected at parse time") {
  CHECK_THROWS_AS(parse_config_text("env=grassland\nM=4\nadversaries=4\n"), ConfigError);
}

TEST_CASE("rendered config re-parses to the same resolved values") {
  RunConfig cfg = parse_config_text(
      "env=adversarial_battle\nM=6\nseed=77\nmax_iterations=12\nbatch=16\n"
      "output_dir=/tmp/x\nbench_agents=3,6\nstop_on_convergence=1\n");
  const RunConfig back = parse_config_text(render_config(cfg));
  CHECK(back.env == cfg.env);
  CHECK(back.agents == cfg.agents);
  CHECK(back.seed == cfg.seed);
  CHECK(back.batch == cfg.batch);
  CHECK(back.d == cfg.d);
  CHECK(back.epsilon == cfg.epsilon);
  CHECK(back.max_iterations == cfg.max_iterations);
  CHECK(back.output_dir == cfg.output_dir);
  CHECK(back.bench_agents == cfg.bench_agents);
  CHECK(back.stop_on_convergence == cfg.stop_on_convergence);
  CHECK(back.episode_length == cfg.episode_length);
  CHECK(back.max_transition_number == cfg.max_transition_number);
}

TEST_CASE("seed list parses and defaults to the single seed") {
  const RunConfig multi = parse_config_text("seeds=3,5,9\n");
  CHECK(multi.seeds == std::vector<uint64_t>{3, 5, 9});
  const RunConfig single = parse_config_text("seed=42\n");
  CHECK(single.seeds == std::vector<uint64_t>{42});
}

TEST_CASE("learner config mirrors the update cadence") {
  SUBCASE("defaults: one update per collection round") {
    const RunConfig cfg = parse_config_text("");
    const LearnerConfig lc = make_learner_config(cfg, 3);
    CHECK(lc.agent == 3);
    CHECK(lc.records_per_iteration == 100);
    CHECK(lc.updates_per_iteration == 1);
    CHECK(lc.gamma == doctest::Approx(0.95));
    CHECK(lc.buffer_capacity == 1000000);
  }
  SUBCASE("doubling the transition budget doubles the updates") {
    const RunConfig cfg = parse_config_text("max_transition_number=200\n");
    CHECK(make_learner_config(cfg, 0).updates_per_iteration == 2);
  }
  SUBCASE("more frequent update cadence") {
    const RunConfig cfg = parse_config_text("update_every_episodes=1\n");
    CHECK(make_learner_config(cfg, 0).updates_per_iteration == 4);
  }
}

TEST_CASE("env config carries the resolved geometry") {
  const RunConfig cfg = parse_config_text("env=food_collection\nM=12\npellets=4\n");
  const EnvConfig env = finalize_env_config(make_env_config(cfg));
  CHECK(env.agents == 12);
  CHECK(env.graph.d == doctest::Approx(0.25));
  CHECK(env.graph.epsilon == doctest::Approx(0.15));
  CHECK(env.box_half_width == doctest::Approx(2.0));
  CHECK(env.pellets == 4);
}

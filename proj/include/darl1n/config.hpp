#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "darl1n/env.hpp"
#include "darl1n/learner.hpp"

namespace darl1n {

// Fully describes one training / evaluation run. Zeros in d, epsilon,
// box_half_width, episode_length, batch, max_transition_number, pellets,
// resources and adversaries mean "pick the published default for this
// environment and agent count"; resolve_config() fills them in.
struct RunConfig {
  std::string algorithm = "darl1n";  // darl1n | maddpg
  EnvKind env = EnvKind::Ising;
  int agents = 9;
  uint64_t seed = 1;
  std::vector<uint64_t> seeds;  // optional multi-run list; empty = {seed}

  double gamma = 0.95;
  double lr = 0.01;
  double polyak = 0.01;
  double explore_sigma = 0.1;
  size_t buffer = 1000000;
  int batch = 0;
  int episode_length = 0;
  double d = 0.0;
  double epsilon = 0.0;
  double box_half_width = 0.0;
  int pellets = 0;
  int resources = 0;
  int adversaries = 0;

  int max_transition_number = 0;
  int update_every_episodes = 4;

  std::string transport = "inproc";  // inproc | tcp
  std::string listen = "127.0.0.1:0";
  int max_iterations = 200;
  int eval_every = 1;
  int eval_episodes = 10;
  int collect_timeout_ms = 600000;

  bool stop_on_convergence = false;
  int convergence_window = 90;
  double convergence_ratio = 0.02;

  std::string output_dir;

  // bench sweep; empty agent list = per-env default scenarios
  std::vector<int> bench_agents;
  int bench_iterations = 3;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One key=value pair per line, '#' starts a comment, blank lines ignored.
// Unknown keys, unparsable values and inconsistent combinations throw
// ConfigError. The result is fully resolved (no sentinel zeros left).
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Applies one key=value pair; used by the parser and by CLI overrides.
void apply_config_pair(RunConfig& cfg, const std::string& key, const std::string& value);

// Fills sentinel fields from the published per-environment tables and
// validates the combination. Called by parse_config_text.
void resolve_config(RunConfig& cfg);

// key=value echo of the resolved config, one per line, stable order.
std::string render_config(const RunConfig& cfg);

EnvConfig make_env_config(const RunConfig& cfg);
LearnerConfig make_learner_config(const RunConfig& cfg, int agent);

// The key used for this kind in config files ("ising", "grassland", ...).
std::string env_kind_name(EnvKind kind);

// Published interaction-range defaults, keyed by the smallest tabulated
// agent count >= agents: d, epsilon, box half-width.
struct RangeDefaults {
  double d;
  double epsilon;
  double box_half_width;
};
RangeDefaults range_defaults(int agents);
int default_episode_length(EnvKind kind, int agents);

}  // namespace darl1n

#include "darl1n/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace darl1n {
namespace {

std::string trim(const std::string& s) {
  size_t a = 0;
  size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& value) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + value + "'");
  }
  if (used != value.size()) throw ConfigError("bad value for " + key + ": '" + value + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& value) {
  size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + value + "'");
  }
  if (used != value.size()) throw ConfigError("bad value for " + key + ": '" + value + "'");
  return v;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  const long long v = parse_int(key, value);
  if (v < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<uint64_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "no") return false;
  throw ConfigError("bad value for " + key + ": '" + value + "'");
}

template <typename T, typename Fn>
std::vector<T> parse_list(const std::string& key, const std::string& value, Fn one) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty element in list for " + key);
    out.push_back(one(key, item));
  }
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

EnvKind parse_env(const std::string& value) {
  if (value == "ising") return EnvKind::Ising;
  if (value == "food_collection") return EnvKind::FoodCollection;
  if (value == "grassland") return EnvKind::Grassland;
  if (value == "adversarial_battle") return EnvKind::AdversarialBattle;
  throw ConfigError("unknown env: '" + value + "'");
}

}  // namespace

std::string env_kind_name(EnvKind kind) {
  switch (kind) {
    case EnvKind::Ising: return "ising";
    case EnvKind::FoodCollection: return "food_collection";
    case EnvKind::Grassland: return "grassland";
    case EnvKind::AdversarialBattle: return "adversarial_battle";
  }
  throw ConfigError("bad env kind");
}

RangeDefaults range_defaults(int agents) {
  // published interaction ranges keyed by agent count
  struct Row {
    int agents;
    RangeDefaults values;
  };
  static const Row table[] = {
      {3, {0.15, 0.05, 1.0}},  {6, {0.2, 0.10, 1.5}},  {12, {0.25, 0.15, 2.0}},
      {24, {0.3, 0.20, 2.5}},  {48, {0.35, 0.25, 3.0}},
  };
  for (const Row& row : table) {
    if (agents <= row.agents) return row.values;
  }
  return table[4].values;
}

int default_episode_length(EnvKind kind, int agents) {
  if (kind == EnvKind::Ising || kind == EnvKind::FoodCollection) return 25;
  if (agents <= 6) return 25;
  if (agents <= 12) return 30;
  if (agents <= 24) return 35;
  return 40;
}

void apply_config_pair(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "algorithm") {
    if (value != "darl1n" && value != "maddpg") throw ConfigError("unknown algorithm: '" + value + "'");
    cfg.algorithm = value;
  } else if (key == "env") {
    cfg.env = parse_env(value);
  } else if (key == "M") {
    cfg.agents = static_cast<int>(parse_int(key, value));
  } else if (key == "seed") {
    cfg.seed = parse_u64(key, value);
  } else if (key == "seeds") {
    cfg.seeds = parse_list<uint64_t>(key, value, parse_u64);
  } else if (key == "gamma") {
    cfg.gamma = parse_double(key, value);
  } else if (key == "lr") {
    cfg.lr = parse_double(key, value);
  } else if (key == "polyak") {
    cfg.polyak = parse_double(key, value);
  } else if (key == "explore_sigma") {
    cfg.explore_sigma = parse_double(key, value);
  } else if (key == "buffer") {
    const long long v = parse_int(key, value);
    if (v < 1) throw ConfigError("buffer must be >= 1");
    cfg.buffer = static_cast<size_t>(v);
  } else if (key == "batch") {
    cfg.batch = static_cast<int>(parse_int(key, value));
  } else if (key == "episode_length") {
    cfg.episode_length = static_cast<int>(parse_int(key, value));
  } else if (key == "d") {
    cfg.d = parse_double(key, value);
  } else if (key == "epsilon") {
    cfg.epsilon = parse_double(key, value);
  } else if (key == "box_half_width") {
    cfg.box_half_width = parse_double(key, value);
  } else if (key == "pellets") {
    cfg.pellets = static_cast<int>(parse_int(key, value));
  } else if (key == "resources") {
    cfg.resources = static_cast<int>(parse_int(key, value));
  } else if (key == "adversaries") {
    cfg.adversaries = static_cast<int>(parse_int(key, value));
  } else if (key == "max_transition_number") {
    cfg.max_transition_number = static_cast<int>(parse_int(key, value));
  } else if (key == "update_every_episodes") {
    cfg.update_every_episodes = static_cast<int>(parse_int(key, value));
  } else if (key == "transport") {
    if (value != "inproc" && value != "tcp") throw ConfigError("unknown transport: '" + value + "'");
    cfg.transport = value;
  } else if (key == "listen") {
    cfg.listen = value;
  } else if (key == "max_iterations") {
    cfg.max_iterations = static_cast<int>(parse_int(key, value));
  } else if (key == "eval_every") {
    cfg.eval_every = static_cast<int>(parse_int(key, value));
  } else if (key == "eval_episodes") {
    cfg.eval_episodes = static_cast<int>(parse_int(key, value));
  } else if (key == "collect_timeout_ms") {
    cfg.collect_timeout_ms = static_cast<int>(parse_int(key, value));
  } else if (key == "stop_on_convergence") {
    cfg.stop_on_convergence = parse_bool(key, value);
  } else if (key == "convergence_window") {
    cfg.convergence_window = static_cast<int>(parse_int(key, value));
  } else if (key == "convergence_ratio") {
    cfg.convergence_ratio = parse_double(key, value);
  } else if (key == "output_dir") {
    cfg.output_dir = value;
  } else if (key == "bench_agents") {
    cfg.bench_agents = parse_list<int>(key, value, [](const std::string& k, const std::string& v) {
      return static_cast<int>(parse_int(k, v));
    });
  } else if (key == "bench_iterations") {
    cfg.bench_iterations = static_cast<int>(parse_int(key, value));
  } else {
    throw ConfigError("unknown config key: '" + key + "'");
  }
}

void resolve_config(RunConfig& cfg) {
  if (cfg.agents < 1) throw ConfigError("M must be >= 1");
  const RangeDefaults ranges = range_defaults(cfg.agents);
  if (cfg.env != EnvKind::Ising) {
    if (cfg.d == 0.0) cfg.d = ranges.d;
    if (cfg.epsilon == 0.0) cfg.epsilon = ranges.epsilon;
    if (cfg.box_half_width == 0.0) cfg.box_half_width = ranges.box_half_width;
    if (cfg.d <= 0.0) throw ConfigError("d must be positive");
    if (cfg.epsilon <= 0.0) throw ConfigError("epsilon must be positive");
    if (cfg.epsilon > cfg.d) throw ConfigError("epsilon must not exceed d");
    if (cfg.box_half_width <= 0.0) throw ConfigError("box_half_width must be positive");
  }
  if (cfg.episode_length == 0) cfg.episode_length = default_episode_length(cfg.env, cfg.agents);
  if (cfg.episode_length < 1) throw ConfigError("episode_length must be >= 1");
  if (cfg.batch == 0) cfg.batch = cfg.env == EnvKind::Ising ? 32 : 1024;
  if (cfg.batch < 1) throw ConfigError("batch must be >= 1");
  if (cfg.max_transition_number == 0) cfg.max_transition_number = 4 * cfg.episode_length;
  if (cfg.max_transition_number < 1) throw ConfigError("max_transition_number must be >= 1");
  if (cfg.update_every_episodes < 1) throw ConfigError("update_every_episodes must be >= 1");

  if (cfg.gamma <= 0.0 || cfg.gamma >= 1.0) throw ConfigError("gamma must be in (0, 1)");
  if (cfg.lr <= 0.0) throw ConfigError("lr must be positive");
  if (cfg.polyak <= 0.0 || cfg.polyak > 1.0) throw ConfigError("polyak must be in (0, 1]");
  if (cfg.explore_sigma < 0.0) throw ConfigError("explore_sigma must be >= 0");
  if (cfg.max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (cfg.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (cfg.collect_timeout_ms < 1) throw ConfigError("collect_timeout_ms must be >= 1");
  if (cfg.convergence_window < 2) throw ConfigError("convergence_window must be >= 2");
  if (cfg.convergence_ratio < 0.0) throw ConfigError("convergence_ratio must be >= 0");
  if (cfg.pellets < 0 || cfg.resources < 0 || cfg.adversaries < 0) {
    throw ConfigError("pellets/resources/adversaries must be >= 0");
  }
  if (cfg.bench_iterations < 1) throw ConfigError("bench_iterations must be >= 1");
  for (int m : cfg.bench_agents) {
    if (m < 1) throw ConfigError("bench_agents entries must be >= 1");
  }
  if (cfg.seeds.empty()) cfg.seeds = {cfg.seed};

  const size_t colon = cfg.listen.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= cfg.listen.size()) {
    throw ConfigError("listen must be host:port");
  }
  parse_int("listen port", cfg.listen.substr(colon + 1));

  // sanity-check the derived env config early so bad combinations fail at
  // parse time rather than mid-run
  try {
    finalize_env_config(make_env_config(cfg));
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    apply_config_pair(cfg, key, value);
  }
  resolve_config(cfg);
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "algorithm=" << cfg.algorithm << "\n";
  out << "env=" << env_kind_name(cfg.env) << "\n";
  out << "M=" << cfg.agents << "\n";
  out << "seed=" << cfg.seed << "\n";
  out << "seeds=";
  for (size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
  out << "\n";
  out << "gamma=" << cfg.gamma << "\n";
  out << "lr=" << cfg.lr << "\n";
  out << "polyak=" << cfg.polyak << "\n";
  out << "explore_sigma=" << cfg.explore_sigma << "\n";
  out << "buffer=" << cfg.buffer << "\n";
  out << "batch=" << cfg.batch << "\n";
  out << "episode_length=" << cfg.episode_length << "\n";
  out << "d=" << cfg.d << "\n";
  out << "epsilon=" << cfg.epsilon << "\n";
  out << "box_half_width=" << cfg.box_half_width << "\n";
  out << "pellets=" << cfg.pellets << "\n";
  out << "resources=" << cfg.resources << "\n";
  out << "adversaries=" << cfg.adversaries << "\n";
  out << "max_transition_number=" << cfg.max_transition_number << "\n";
  out << "update_every_episodes=" << cfg.update_every_episodes << "\n";
  out << "transport=" << cfg.transport << "\n";
  out << "listen=" << cfg.listen << "\n";
  out << "max_iterations=" << cfg.max_iterations << "\n";
  out << "eval_every=" << cfg.eval_every << "\n";
  out << "eval_episodes=" << cfg.eval_episodes << "\n";
  out << "collect_timeout_ms=" << cfg.collect_timeout_ms << "\n";
  out << "stop_on_convergence=" << (cfg.stop_on_convergence ? 1 : 0) << "\n";
  out << "convergence_window=" << cfg.convergence_window << "\n";
  out << "convergence_ratio=" << cfg.convergence_ratio << "\n";
  out << "output_dir=" << cfg.output_dir << "\n";
  if (!cfg.bench_agents.empty()) {
    out << "bench_agents=";
    for (size_t i = 0; i < cfg.bench_agents.size(); ++i)
      out << (i ? "," : "") << cfg.bench_agents[i];
    out << "\n";
  }
  out << "bench_iterations=" << cfg.bench_iterations << "\n";
  return out.str();
}

EnvConfig make_env_config(const RunConfig& cfg) {
  EnvConfig env;
  env.kind = cfg.env;
  env.agents = cfg.agents;
  env.episode_length = cfg.episode_length;
  env.box_half_width = cfg.box_half_width;
  env.graph.d = cfg.d;
  env.graph.epsilon = cfg.epsilon;
  env.pellets = cfg.pellets;
  env.resources = cfg.resources;
  env.adversaries = cfg.adversaries;
  return env;
}

LearnerConfig make_learner_config(const RunConfig& cfg, int agent) {
  LearnerConfig lc;
  lc.agent = agent;
  lc.gamma = cfg.gamma;
  lc.polyak = cfg.polyak;
  lc.lr = cfg.lr;
  lc.explore_sigma = cfg.explore_sigma;
  lc.batch = cfg.batch;
  lc.records_per_iteration = cfg.max_transition_number;
  const int episodes = std::max(1, cfg.max_transition_number / cfg.episode_length);
  lc.updates_per_iteration = std::max(1, episodes / cfg.update_every_episodes);
  lc.seed = cfg.seed;
  lc.buffer_capacity = cfg.buffer;
  return lc;
}

}  // namespace darl1n

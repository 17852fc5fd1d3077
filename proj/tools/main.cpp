#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "darl1n/bench.hpp"
#include "darl1n/config.hpp"
#include "darl1n/coordinator.hpp"
#include "darl1n/maddpg.hpp"
#include "darl1n/metrics.hpp"
#include "darl1n/verify.hpp"
#include "darl1n/wire.hpp"

namespace fs = std::filesystem;
using namespace darl1n;

namespace {

constexpr int kOk = 0;
constexpr int kConfigExit = 1;
constexpr int kRuntimeExit = 2;
constexpr int kVerifyExit = 3;

std::string self_exe(const char* argv0) {
  char buf[4096];
  const ssize_t n = readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n > 0) {
    buf[n] = '\0';
    return std::string(buf);
  }
  return std::string(argv0);
}

void write_file(const fs::path& path, const void* data, size_t size) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  f.write(static_cast<const char*>(data), std::streamsize(size));
  if (!f) throw std::runtime_error("short write to " + path.string());
}

std::vector<uint8_t> read_binary(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path.string());
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                              std::istreambuf_iterator<char>());
}

std::pair<std::string, uint16_t> split_endpoint(const std::string& ep) {
  const size_t colon = ep.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= ep.size())
    throw ConfigError("endpoint must be host:port, got '" + ep + "'");
  const int port = std::stoi(ep.substr(colon + 1));
  if (port < 0 || port > 65535) throw ConfigError("port out of range in '" + ep + "'");
  return {ep.substr(0, colon), uint16_t(port)};
}

// final policies and their frozen copies, in the broadcast wire format
void write_params_file(const fs::path& path, const ParamTable& table,
                       uint32_t iteration) {
  ParamsMsg msg;
  msg.iteration = iteration;
  for (size_t i = 0; i < table.policies.size(); ++i)
    msg.entries.emplace_back(table.policies[i], table.targets[i]);
  const auto bytes = encode_params(msg);
  write_file(path, bytes.data(), bytes.size());
}

void emit_run_artifacts(const fs::path& dir, const RunConfig& cfg,
                        const TrainResult& result) {
  fs::create_directories(dir);
  const std::string echo = render_config(cfg);
  write_file(dir / "config.txt", echo.data(), echo.size());
  write_metrics_csv((dir / "metrics.csv").string(), result.metrics);
  write_summary((dir / "summary.txt").string(), result.metrics,
                size_t(cfg.convergence_window), cfg.convergence_ratio);
  write_reward_svg((dir / "reward_curve.svg").string(), result.metrics);
  const uint32_t iter =
      result.metrics.empty() ? 0 : result.metrics.back().iteration;
  write_params_file(dir / "params.bin", result.params, iter);
}

// One OS process per learner: spawn them, serve the controller here, reap.
TrainResult train_tcp_processes(const RunConfig& cfg, const std::string& cfg_path,
                                const std::string& self) {
  const auto env = make_environment(make_env_config(cfg));
  const auto [host, req_port] = split_endpoint(cfg.listen);
  TcpListener listener(host, req_port);
  const std::string endpoint = host + ":" + std::to_string(listener.port());

  std::vector<pid_t> kids;
  const auto kill_all = [&kids]() {
    for (pid_t p : kids) kill(p, SIGTERM);
    for (pid_t p : kids) waitpid(p, nullptr, 0);
    kids.clear();
  };
  try {
    for (int agent = 0; agent < cfg.agents; ++agent) {
      const pid_t pid = fork();
      if (pid < 0) throw std::runtime_error("fork failed");
      if (pid == 0) {
        execl(self.c_str(), self.c_str(), "learner", cfg_path.c_str(),
              std::to_string(agent).c_str(), endpoint.c_str(),
              std::to_string(cfg.seed).c_str(), static_cast<char*>(nullptr));
        _exit(127);  // exec failed; the parent sees the status below
      }
      kids.push_back(pid);
    }

    std::vector<std::shared_ptr<Channel>> channels;
    for (int i = 0; i < cfg.agents; ++i) {
      auto ch = listener.accept(std::chrono::milliseconds(15000));
      if (!ch) throw std::runtime_error("a learner process did not connect within 15 s");
      channels.push_back(std::move(ch));
    }

    Controller controller(env, cfg, channels);
    TrainResult result = controller.train();
    for (const auto& ch : channels) ch->close();
    for (pid_t p : kids) {
      int status = 0;
      waitpid(p, &status, 0);
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        throw std::runtime_error("a learner process exited abnormally");
    }
    kids.clear();
    return result;
  } catch (...) {
    kill_all();
    throw;
  }
}

int cmd_train(const std::string& cfg_path, const std::string& self) {
  const RunConfig base = load_config_file(cfg_path);
  const fs::path out_root =
      base.output_dir.empty()
          ? fs::path("runs") / (base.algorithm + "-" + env_kind_name(base.env) +
                                "-m" + std::to_string(base.agents))
          : fs::path(base.output_dir);
  const bool multi = base.seeds.size() > 1;

  struct Recap {
    uint64_t seed = 0;
    double final_reward = 0.0;
    bool converged = false;
    double convergence_time_s = 0.0;
    double convergence_reward = 0.0;
  };
  std::vector<Recap> recaps;

  for (const uint64_t seed : base.seeds) {
    RunConfig cfg = base;
    cfg.seed = seed;
    cfg.seeds = {seed};
    const fs::path dir = multi ? out_root / ("seed-" + std::to_string(seed)) : out_root;
    std::cout << "training algorithm=" << cfg.algorithm << " env="
              << env_kind_name(cfg.env) << " M=" << cfg.agents << " seed=" << seed
              << " max_iterations=" << cfg.max_iterations << " transport="
              << cfg.transport << std::endl;

    TrainResult result;
    if (cfg.algorithm == "maddpg")
      result = run_central_training(cfg);
    else if (cfg.transport == "tcp")
      result = train_tcp_processes(cfg, cfg_path, self);
    else
      result = run_training(cfg);

    emit_run_artifacts(dir, cfg, result);
    std::cout << summary_text(result.metrics, size_t(cfg.convergence_window),
                              cfg.convergence_ratio)
              << "artifacts written to " << dir.string() << std::endl;

    Recap recap;
    recap.seed = seed;
    if (!result.metrics.empty())
      recap.final_reward = result.metrics.back().avg_total_reward;
    if (result.converged_at.has_value()) {
      recap.converged = true;
      const MetricsRow& row = result.metrics[*result.converged_at - 1];
      recap.convergence_time_s = row.seconds;
      recap.convergence_reward = row.avg_total_reward;
    }
    recaps.push_back(recap);
  }

  if (multi) {
    std::ostringstream agg;
    agg << "runs=" << recaps.size() << "\n";
    double final_sum = 0.0, time_sum = 0.0, reward_sum = 0.0;
    size_t converged = 0;
    for (const Recap& r : recaps) {
      final_sum += r.final_reward;
      if (r.converged) {
        ++converged;
        time_sum += r.convergence_time_s;
        reward_sum += r.convergence_reward;
      }
    }
    agg << "converged_runs=" << converged << "\n";
    agg << "mean_final_reward=" << format_full(final_sum / double(recaps.size()))
        << "\n";
    if (converged > 0) {
      agg << "mean_convergence_time_s=" << format_full(time_sum / double(converged))
          << "\n";
      agg << "mean_convergence_reward="
          << format_full(reward_sum / double(converged)) << "\n";
    }
    for (const Recap& r : recaps) {
      agg << "seed=" << r.seed << " final_reward=" << format_full(r.final_reward)
          << " converged=" << (r.converged ? 1 : 0);
      if (r.converged) {
        agg << " convergence_time_s=" << format_full(r.convergence_time_s)
            << " convergence_reward=" << format_full(r.convergence_reward);
      }
      agg << "\n";
    }
    const std::string text = agg.str();
    write_file(out_root / "aggregate.txt", text.data(), text.size());
    std::cout << text << std::flush;
  }
  return kOk;
}

int cmd_eval(const std::string& cfg_path, const std::string& params_arg) {
  const RunConfig cfg = load_config_file(cfg_path);
  const auto env = make_environment(make_env_config(cfg));
  const bool central = cfg.algorithm == "maddpg";
  const NetSpec spec =
      central ? make_net_spec(*env, cfg.agents) : make_net_spec(*env);

  fs::path path(params_arg);
  if (fs::is_directory(path)) path /= "params.bin";
  const auto bytes = read_binary(path);
  ParamsMsg msg;
  try {
    msg = decode_params(bytes, spec.policy_head);
  } catch (const ProtocolError& e) {
    throw ConfigError("unreadable parameter file " + path.string() + ": " + e.what());
  }
  if (msg.entries.size() != size_t(cfg.agents))
    throw ConfigError("parameter file holds " + std::to_string(msg.entries.size()) +
                      " agents but the config says " + std::to_string(cfg.agents));
  ParamTable table;
  for (auto& entry : msg.entries) {
    if (entry.first.input_dim() != spec.policy_dims.front() ||
        entry.first.output_dim() != spec.policy_dims.back())
      throw ConfigError("parameter shapes in " + path.string() +
                        " do not match this config");
    table.policies.push_back(std::move(entry.first));
    table.targets.push_back(std::move(entry.second));
  }

  const double avg = central ? evaluate_joint_policies(*env, spec, table, cfg)
                             : evaluate_policies(*env, spec, table, cfg);
  std::cout << "episodes=" << cfg.eval_episodes << "\n"
            << "avg_total_reward=" << format_full(avg) << "\n";
  return kOk;
}

int cmd_bench(const std::string& cfg_path) {
  const RunConfig cfg = load_config_file(cfg_path);
  const auto rows = run_bench(cfg);
  const std::string csv = render_bench_csv(rows);
  std::cout << csv << std::flush;
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    write_file(fs::path(cfg.output_dir) / "bench.csv", csv.data(), csv.size());
  }
  return kOk;
}

int cmd_verify() {
  using CheckFn = CheckResult (*)();
  const std::array<CheckFn, 5> checks = {
      check_exact_value_consistency, check_value_truncation_bound,
      check_one_step_containment, check_gradient_fidelity,
      check_environment_conformance};
  bool all = true;
  for (const CheckFn fn : checks) {
    const CheckResult r = fn();
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail
              << std::endl;
    all = all && r.pass;
  }
  std::cout << (all ? "verification passed" : "verification FAILED") << std::endl;
  return all ? kOk : kVerifyExit;
}

int cmd_learner(const std::string& cfg_path, int agent, const std::string& endpoint,
                uint64_t seed) {
  RunConfig cfg = load_config_file(cfg_path);
  cfg.seed = seed;
  cfg.seeds = {seed};
  if (agent < 0 || agent >= cfg.agents)
    throw ConfigError("agent index out of range for this config");
  const auto env = make_environment(make_env_config(cfg));
  const auto [host, port] = split_endpoint(endpoint);
  const auto channel = tcp_connect(host, port, std::chrono::milliseconds(10000));
  run_learner_endpoint(env, cfg, agent, *channel);
  channel->close();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed one-hop multi-agent reinforcement learning engine"};
  app.require_subcommand(1);

  std::string config_path, params_arg, endpoint;
  int agent = 0;
  uint64_t seed = 1;

  CLI::App* train = app.add_subcommand("train", "train per the config, write metrics/params");
  train->add_option("config", config_path, "key=value config file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* eval = app.add_subcommand("eval", "score saved parameters greedily");
  eval->add_option("config", config_path, "key=value config file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("params", params_arg, "run directory or params.bin path")->required();

  CLI::App* bench = app.add_subcommand("bench", "per-iteration timing sweep over agent counts");
  bench->add_option("config", config_path, "key=value config file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* verify = app.add_subcommand("verify", "run the verification suite");

  // internal endpoint mode used by `train` under transport=tcp
  CLI::App* learner = app.add_subcommand("learner", "");
  learner->group("");
  learner->add_option("config", config_path)->required();
  learner->add_option("agent", agent)->required();
  learner->add_option("endpoint", endpoint)->required();
  learner->add_option("seed", seed)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigExit;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, self_exe(argv[0]));
    if (eval->parsed()) return cmd_eval(config_path, params_arg);
    if (bench->parsed()) return cmd_bench(config_path);
    if (verify->parsed()) return cmd_verify();
    if (learner->parsed()) return cmd_learner(config_path, agent, endpoint, seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kRuntimeExit;
  }
  return kConfigExit;
}

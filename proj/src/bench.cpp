#include "darl1n/bench.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "darl1n/coordinator.hpp"
#include "darl1n/maddpg.hpp"
#include "darl1n/metrics.hpp"

namespace darl1n {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<int> default_sweep(EnvKind kind) {
  switch (kind) {
    case EnvKind::Ising: return {9, 16, 25};
    case EnvKind::FoodCollection: return {3, 6, 12};
    default: return {6, 12, 24};
  }
}

RunConfig sweep_point(const RunConfig& base, int agents) {
  RunConfig cfg = base;
  cfg.agents = agents;
  // re-derive everything the published tables key on the agent count
  cfg.d = 0.0;
  cfg.epsilon = 0.0;
  cfg.box_half_width = 0.0;
  cfg.episode_length = 0;
  cfg.batch = 0;
  cfg.max_transition_number = 0;
  cfg.pellets = 0;
  cfg.resources = 0;
  cfg.adversaries = 0;
  resolve_config(cfg);
  return cfg;
}

BenchRow bench_distributed(const RunConfig& cfg) {
  const std::shared_ptr<Environment> env =
      make_environment(finalize_env_config(make_env_config(cfg)));
  const int agents = cfg.agents;
  std::vector<Learner> learners;
  learners.reserve(agents);
  for (int i = 0; i < agents; ++i) learners.emplace_back(env, make_learner_config(cfg, i));
  ParamTable table = initial_param_table(*env, cfg.seed);

  BenchRow row;
  row.algorithm = "darl1n";
  row.agents = agents;
  row.iterations = cfg.bench_iterations;
  for (int iter = 0; iter < cfg.bench_iterations; ++iter) {
    ParamTable next = table;
    double slowest = 0.0;
    double total = 0.0;
    for (int i = 0; i < agents; ++i) {
      const auto t0 = Clock::now();
      learners[size_t(i)].install(table);
      const Learner::IterationResult res = learners[size_t(i)].run_iteration(uint32_t(iter));
      const double took = seconds_since(t0);
      total += took;
      slowest = std::max(slowest, took);
      next.policies[size_t(i)] = res.policy;
      next.targets[size_t(i)] = res.target_policy;
    }
    table = std::move(next);
    row.iter_total_s += total;
    row.iter_max_learner_s += slowest;
  }
  row.iter_total_s /= double(cfg.bench_iterations);
  row.iter_max_learner_s /= double(cfg.bench_iterations);
  return row;
}

BenchRow bench_central(const RunConfig& cfg) {
  const std::shared_ptr<Environment> env =
      make_environment(finalize_env_config(make_env_config(cfg)));
  RunConfig central = cfg;
  central.algorithm = "maddpg";
  CentralTrainer trainer(env, central);

  BenchRow row;
  row.algorithm = "maddpg";
  row.agents = cfg.agents;
  row.iterations = cfg.bench_iterations;
  for (int iter = 0; iter < cfg.bench_iterations; ++iter) {
    const auto t0 = Clock::now();
    trainer.run_iteration(uint32_t(iter));
    const double took = seconds_since(t0);
    row.iter_total_s += took;
    row.iter_max_learner_s += took;  // indivisible: one process does it all
  }
  row.iter_total_s /= double(cfg.bench_iterations);
  row.iter_max_learner_s /= double(cfg.bench_iterations);
  return row;
}

}  // namespace

std::vector<BenchRow> run_bench(const RunConfig& cfg) {
  const std::vector<int> sweep =
      cfg.bench_agents.empty() ? default_sweep(cfg.env) : cfg.bench_agents;
  std::vector<BenchRow> rows;
  for (int agents : sweep) {
    const RunConfig point = sweep_point(cfg, agents);
    rows.push_back(bench_distributed(point));
    rows.push_back(bench_central(point));
  }
  return rows;
}

std::string render_bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "algorithm,agents,iterations,iter_total_s,iter_max_learner_s\n";
  for (const BenchRow& row : rows) {
    out << row.algorithm << ',' << row.agents << ',' << row.iterations << ','
        << format_full(row.iter_total_s) << ',' << format_full(row.iter_max_learner_s) << "\n";
  }
  return out.str();
}

}  // namespace darl1n

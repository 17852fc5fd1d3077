#pragma once

#include <string>
#include <vector>

#include "darl1n/config.hpp"

namespace darl1n {

// Per-iteration training cost at one sweep point. iter_total_s is the mean
// wall time to run everything on this host; iter_max_learner_s is the mean
// critical path — the slowest single learner per iteration, i.e. the
// per-iteration time with one host per learner and free communication. For
// the centralized baseline the two coincide: its iteration is indivisible.
struct BenchRow {
  std::string algorithm;
  int agents = 0;
  int iterations = 0;
  double iter_total_s = 0.0;
  double iter_max_learner_s = 0.0;
};

// Times both trainers at every agent count in cfg.bench_agents (default:
// the published scenario sizes for cfg.env). Interaction ranges, episode
// length and batch size re-resolve per sweep point from the published
// tables; the sweep deliberately ignores explicit overrides of those.
std::vector<BenchRow> run_bench(const RunConfig& cfg);

std::string render_bench_csv(const std::vector<BenchRow>& rows);

}  // namespace darl1n

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace darl1n {

// One evaluation point. `seconds` is cumulative wall-clock time since the
// start of the run; collect_s / update_s are the per-iteration pieces.
struct MetricsRow {
  uint32_t iteration = 0;
  double seconds = 0.0;
  double avg_total_reward = 0.0;
  double collect_s = 0.0;
  double update_s = 0.0;
};

// Earliest 1-based index t such that the population variance of
// rewards[t-window .. t-1] is at most ratio * |mean| of the same window.
// Returns nullopt when the series is shorter than the window or no window
// qualifies.
std::optional<size_t> detect_convergence(const std::vector<double>& rewards, size_t window = 90,
                                         double ratio = 0.02);

// %.17g — shortest text that round-trips a double exactly.
std::string format_full(double v);

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

std::string summary_text(const std::vector<MetricsRow>& rows, size_t window, double ratio);
void write_summary(const std::string& path, const std::vector<MetricsRow>& rows, size_t window,
                   double ratio);

// Minimal self-contained line plot of avg_total_reward against iteration.
void write_reward_svg(const std::string& path, const std::vector<MetricsRow>& rows);

}  // namespace darl1n

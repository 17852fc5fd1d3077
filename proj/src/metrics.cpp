#include "darl1n/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace darl1n {

std::optional<size_t> detect_convergence(const std::vector<double>& rewards, size_t window,
                                         double ratio) {
  if (window < 2) throw std::invalid_argument("window must be >= 2");
  if (ratio < 0.0) throw std::invalid_argument("ratio must be >= 0");
  if (rewards.size() < window) return std::nullopt;
  for (size_t end = window; end <= rewards.size(); ++end) {
    double mean = 0.0;
    for (size_t k = end - window; k < end; ++k) mean += rewards[k];
    mean /= static_cast<double>(window);
    double var = 0.0;
    for (size_t k = end - window; k < end; ++k) {
      const double dev = rewards[k] - mean;
      var += dev * dev;
    }
    var /= static_cast<double>(window);
    if (var <= ratio * std::fabs(mean)) return end;
  }
  return std::nullopt;
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

constexpr const char* kCsvHeader = "iteration,seconds,avg_total_reward,collect_s,update_s";

double field_to_double(const std::string& field, const std::string& path) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    throw std::runtime_error("bad number in " + path + ": '" + field + "'");
  }
  if (used != field.size()) throw std::runtime_error("bad number in " + path + ": '" + field + "'");
  return v;
}

}  // namespace

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kCsvHeader << "\n";
  for (const MetricsRow& row : rows) {
    out << row.iteration << ',' << format_full(row.seconds) << ','
        << format_full(row.avg_total_reward) << ',' << format_full(row.collect_s) << ','
        << format_full(row.update_s) << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics file " + path);
  if (line == std::string(kCsvHeader) + "\r") line.pop_back();
  if (line != kCsvHeader) throw std::runtime_error("bad header in " + path);
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw std::runtime_error("bad row in " + path + ": '" + line + "'");
    MetricsRow row;
    row.iteration = static_cast<uint32_t>(field_to_double(fields[0], path));
    row.seconds = field_to_double(fields[1], path);
    row.avg_total_reward = field_to_double(fields[2], path);
    row.collect_s = field_to_double(fields[3], path);
    row.update_s = field_to_double(fields[4], path);
    rows.push_back(row);
  }
  return rows;
}

std::string summary_text(const std::vector<MetricsRow>& rows, size_t window, double ratio) {
  std::ostringstream out;
  out << "evaluations=" << rows.size() << "\n";
  if (rows.empty()) {
    out << "converged=0\n";
    return out.str();
  }
  out << "final_iteration=" << rows.back().iteration << "\n";
  out << "final_reward=" << format_full(rows.back().avg_total_reward) << "\n";
  double best = rows[0].avg_total_reward;
  for (const MetricsRow& row : rows) best = std::max(best, row.avg_total_reward);
  out << "best_reward=" << format_full(best) << "\n";
  out << "total_seconds=" << format_full(rows.back().seconds) << "\n";

  std::vector<double> rewards;
  rewards.reserve(rows.size());
  for (const MetricsRow& row : rows) rewards.push_back(row.avg_total_reward);
  const auto hit = detect_convergence(rewards, window, ratio);
  if (hit.has_value()) {
    const MetricsRow& at = rows[*hit - 1];
    out << "converged=1\n";
    out << "converged_eval_index=" << *hit << "\n";
    out << "converged_iteration=" << at.iteration << "\n";
    out << "convergence_time_s=" << format_full(at.seconds) << "\n";
    out << "convergence_reward=" << format_full(at.avg_total_reward) << "\n";
  } else {
    out << "converged=0\n";
  }
  return out.str();
}

void write_summary(const std::string& path, const std::vector<MetricsRow>& rows, size_t window,
                   double ratio) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << summary_text(rows, window, ratio);
  if (!out) throw std::runtime_error("write failed for " + path);
}

void write_reward_svg(const std::string& path, const std::vector<MetricsRow>& rows) {
  const double width = 800.0;
  const double height = 500.0;
  const double margin = 60.0;
  double lo = 0.0;
  double hi = 1.0;
  uint32_t it_lo = 0;
  uint32_t it_hi = 1;
  if (!rows.empty()) {
    lo = hi = rows[0].avg_total_reward;
    it_lo = it_hi = rows[0].iteration;
    for (const MetricsRow& row : rows) {
      lo = std::min(lo, row.avg_total_reward);
      hi = std::max(hi, row.avg_total_reward);
      it_lo = std::min(it_lo, row.iteration);
      it_hi = std::max(it_hi, row.iteration);
    }
  }
  if (hi - lo < 1e-12) {
    hi += 0.5;
    lo -= 0.5;
  }
  if (it_hi == it_lo) it_hi = it_lo + 1;

  const auto x_of = [&](uint32_t it) {
    return margin + (width - 2 * margin) * (static_cast<double>(it) - it_lo) /
                        (static_cast<double>(it_hi) - it_lo);
  };
  const auto y_of = [&](double r) {
    return height - margin - (height - 2 * margin) * (r - lo) / (hi - lo);
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - margin / 3
      << "\" text-anchor=\"middle\" font-size=\"14\">iteration</text>\n";
  out << "<text x=\"" << margin / 3 << "\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 " << margin / 3 << ' '
      << height / 2 << ")\">average total reward</text>\n";
  out << "<text x=\"" << margin - 6 << "\" y=\"" << y_of(hi) + 4
      << "\" text-anchor=\"end\" font-size=\"12\">" << format_full(hi) << "</text>\n";
  out << "<text x=\"" << margin - 6 << "\" y=\"" << y_of(lo) + 4
      << "\" text-anchor=\"end\" font-size=\"12\">" << format_full(lo) << "</text>\n";
  out << "<text x=\"" << x_of(it_lo) << "\" y=\"" << height - margin + 16
      << "\" text-anchor=\"middle\" font-size=\"12\">" << it_lo << "</text>\n";
  out << "<text x=\"" << x_of(it_hi) << "\" y=\"" << height - margin + 16
      << "\" text-anchor=\"middle\" font-size=\"12\">" << it_hi << "</text>\n";
  if (!rows.empty()) {
    out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
    for (const MetricsRow& row : rows) {
      out << x_of(row.iteration) << ',' << y_of(row.avg_total_reward) << ' ';
    }
    out << "\"/>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace darl1n

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "darl1n/metrics.hpp"
#include "darl1n/rng.hpp"

using namespace darl1n;

namespace {

std::string temp_path(const char* name) {
  return std::string("/tmp/darl1n_metrics_") + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("constant series converges exactly when the window fills") {
  std::vector<double> series(120, 7.5);
  const auto hit = detect_convergence(series);
  REQUIRE(hit.has_value());
  CHECK(*hit == 90);
}

TEST_CASE("zero-mean alternating series never converges") {
  std::vector<double> series;
  for (int i = 0; i < 400; ++i) series.push_back(i % 2 == 0 ? 1.0 : -1.0);
  CHECK_FALSE(detect_convergence(series).has_value());
  // shifting the mean to 5 still leaves variance 1 > 0.02*5
  for (auto& v : series) v += 5.0;
  CHECK_FALSE(detect_convergence(series).has_value());
}

TEST_CASE("short series reports no convergence") {
  std::vector<double> series(89, 1.0);
  CHECK_FALSE(detect_convergence(series).has_value());
}

TEST_CASE("decaying-noise series converges at the precomputed window end") {
  // r[t] = 10 + 5 exp(-t/40) sin(0.7 t); first qualifying window ends at 143,
  // where var 0.19163 <= 0.02*|mean| 0.20021 while the window before misses
  // (0.21069 > 0.19995).
  std::vector<double> series;
  for (int t = 0; t < 200; ++t) {
    series.push_back(10.0 + 5.0 * std::exp(-t / 40.0) * std::sin(0.7 * t));
  }
  const auto hit = detect_convergence(series);
  REQUIRE(hit.has_value());
  CHECK(*hit == 143);
}

TEST_CASE("hand-checked window on a short series") {
  // window {2,3,2,1,2}: mean 2.0, population var 0.4 <= 0.3*2; the first
  // window {1,2,3,2,1} has var 0.56 > 0.3*1.8.
  const std::vector<double> series = {1, 2, 3, 2, 1, 2, 3, 2, 1, 2};
  const auto hit = detect_convergence(series, 5, 0.3);
  REQUIRE(hit.has_value());
  CHECK(*hit == 6);
}

TEST_CASE("zero ratio accepts only exactly constant windows") {
  std::vector<double> series(101, 3.0);
  series[10] = 3.0000001;  // 0-based; last window 11..100 is the first clean one
  const auto hit = detect_convergence(series, 90, 0.0);
  REQUIRE(hit.has_value());
  CHECK(*hit == 101);
  series.resize(100);  // now every window straddles the blip
  CHECK_FALSE(detect_convergence(series, 90, 0.0).has_value());
}

TEST_CASE("detect_convergence validates its knobs") {
  CHECK_THROWS_AS(detect_convergence({1.0, 2.0}, 1, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(detect_convergence({1.0, 2.0}, 90, -0.1), std::invalid_argument);
}

TEST_CASE("metrics csv round-trips every bit of every double") {
  Rng rng(404);
  std::vector<MetricsRow> rows;
  for (uint32_t i = 1; i <= 25; ++i) {
    MetricsRow row;
    row.iteration = i;
    row.seconds = rng.uniform(0, 1000);
    row.avg_total_reward = rng.gaussian(0, 100);
    row.collect_s = rng.uniform(0, 1);
    row.update_s = rng.uniform(0, 1);
    rows.push_back(row);
  }
  rows[3].avg_total_reward = -0.0;
  rows[4].avg_total_reward = 1e-300;
  rows[5].avg_total_reward = 12345678.901234567;

  const std::string path = temp_path("roundtrip.csv");
  write_metrics_csv(path, rows);
  const std::vector<MetricsRow> back = read_metrics_csv(path);
  REQUIRE(back.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].iteration == rows[i].iteration);
    CHECK(std::bit_cast<uint64_t>(back[i].seconds) == std::bit_cast<uint64_t>(rows[i].seconds));
    CHECK(std::bit_cast<uint64_t>(back[i].avg_total_reward) ==
          std::bit_cast<uint64_t>(rows[i].avg_total_reward));
    CHECK(std::bit_cast<uint64_t>(back[i].collect_s) == std::bit_cast<uint64_t>(rows[i].collect_s));
    CHECK(std::bit_cast<uint64_t>(back[i].update_s) == std::bit_cast<uint64_t>(rows[i].update_s));
  }
  std::remove(path.c_str());
}

TEST_CASE("empty metrics produce a header-only csv") {
  const std::string path = temp_path("empty.csv");
  write_metrics_csv(path, {});
  CHECK(slurp(path) == "iteration,seconds,avg_total_reward,collect_s,update_s\n");
  CHECK(read_metrics_csv(path).empty());
  std::remove(path.c_str());
}

TEST_CASE("csv reader rejects foreign files") {
  const std::string path = temp_path("bad.csv");
  {
    std::ofstream out(path);
    out << "time,reward\n1,2\n";
  }
  CHECK_THROWS(read_metrics_csv(path));
  {
    std::ofstream out(path);
    out << "iteration,seconds,avg_total_reward,collect_s,update_s\n1,2,3\n";
  }
  CHECK_THROWS(read_metrics_csv(path));
  std::remove(path.c_str());
}

TEST_CASE("summary text mirrors the convergence detector") {
  std::vector<MetricsRow> rows;
  for (uint32_t i = 1; i <= 120; ++i) {
    MetricsRow row;
    row.iteration = i;
    row.seconds = 0.5 * i;
    row.avg_total_reward = 7.5;
    rows.push_back(row);
  }
  const std::string text = summary_text(rows, 90, 0.02);
  CHECK(text.find("evaluations=120\n") != std::string::npos);
  CHECK(text.find("converged=1\n") != std::string::npos);
  CHECK(text.find("converged_eval_index=90\n") != std::string::npos);
  CHECK(text.find("converged_iteration=90\n") != std::string::npos);
  CHECK(text.find("convergence_time_s=45\n") != std::string::npos);
  CHECK(text.find("convergence_reward=7.5\n") != std::string::npos);
  CHECK(text.find("final_reward=7.5\n") != std::string::npos);

  // alternating rewards: never converges
  for (size_t i = 0; i < rows.size(); ++i) rows[i].avg_total_reward = (i % 2 == 0) ? 1.0 : -1.0;
  const std::string no = summary_text(rows, 90, 0.02);
  CHECK(no.find("converged=0\n") != std::string::npos);
  CHECK(no.find("converged_eval_index") == std::string::npos);

  CHECK(summary_text({}, 90, 0.02).find("evaluations=0\n") != std::string::npos);
}

TEST_CASE("reward plot is a well-formed svg with one polyline") {
  std::vector<MetricsRow> rows;
  for (uint32_t i = 1; i <= 40; ++i) {
    MetricsRow row;
    row.iteration = i;
    row.avg_total_reward = std::sin(0.3 * i);
    rows.push_back(row);
  }
  const std::string path = temp_path("plot.svg");
  write_reward_svg(path, rows);
  const std::string svg = slurp(path);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  // every point is inside the viewBox
  CHECK(svg.find("-") != 0);

  write_reward_svg(path, {});
  const std::string empty_svg = slurp(path);
  CHECK(empty_svg.rfind("<svg", 0) == 0);
  CHECK(empty_svg.find("<polyline") == std::string::npos);
  std::remove(path.c_str());
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "lbbsp/rng.hpp"
#include "lbbsp/trace.hpp"

using namespace lbbsp;

namespace {

std::filesystem::path temp_csv(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << body;
  return path;
}

double quantile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  const auto idx = static_cast<std::size_t>(q * static_cast<double>(xs.size() - 1));
  return xs[idx];
}

}  // namespace

TEST_CASE("parse_trace reads a small valid file") {
  const auto path = temp_csv("lbbsp_trace_ok.csv",
                             "machine_id,t_offset_s,cpu_avail,mem_avail\n"
                             "m1,0,0.9,0.8\n"
                             "m1,10,0.5,0.7\n");
  const auto traces = parse_trace(path);
  REQUIRE(traces.size() == 1);
  CHECK(traces[0].machine_id == "m1");
  REQUIRE(traces[0].points.size() == 2);
  CHECK(traces[0].points[1].cpu_avail == doctest::Approx(0.5));
  std::filesystem::remove(path);
}

TEST_CASE("parse_trace rejects out-of-range fractions with the line number") {
  const auto path = temp_csv("lbbsp_trace_range.csv",
                             "machine_id,t_offset_s,cpu_avail,mem_avail\n"
                             "m1,0,0.9,0.8\n"
                             "m1,10,1.2,0.7\n");
  CHECK_THROWS_WITH_AS(parse_trace(path), doctest::Contains("line 3"), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("parse_trace rejects a missing column by name") {
  const auto path = temp_csv("lbbsp_trace_col.csv",
                             "machine_id,t_offset_s,cpu_avail\n"
                             "m1,0,0.9\n");
  CHECK_THROWS_WITH_AS(parse_trace(path), doctest::Contains("mem_avail"), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("write then parse round trips exactly") {
  Rng rng(808);
  std::vector<ResourceTrace> traces;
  for (int m = 0; m < 5; ++m) {
    ResourceTrace t;
    t.machine_id = "machine-" + std::to_string(m);
    double time = 0.0;
    for (int r = 0; r < 20; ++r) {
      time += rng.uniform(0.0, 30.0);
      t.points.push_back(TracePoint{time, rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)});
    }
    traces.push_back(t);
  }
  const auto path = std::filesystem::temp_directory_path() / "lbbsp_trace_rt.csv";
  write_trace(traces, path);
  const auto back = parse_trace(path);
  REQUIRE(back.size() == traces.size());
  for (std::size_t m = 0; m < traces.size(); ++m) {
    CHECK(back[m].machine_id == traces[m].machine_id);
    REQUIRE(back[m].points.size() == traces[m].points.size());
    for (std::size_t r = 0; r < traces[m].points.size(); ++r) {
      CHECK(back[m].points[r].t_offset_s == traces[m].points[r].t_offset_s);
      CHECK(back[m].points[r].cpu_avail == traces[m].points[r].cpu_avail);
      CHECK(back[m].points[r].mem_avail == traces[m].points[r].mem_avail);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("trace_at steps through rows") {
  ResourceTrace t;
  t.machine_id = "m";
  t.points = {{0.0, 0.9, 0.8}, {10.0, 0.5, 0.7}, {20.0, 0.3, 0.6}};
  CHECK(trace_at(t, 10.0).first == doctest::Approx(0.5));   // exact row
  CHECK(trace_at(t, 14.0).first == doctest::Approx(0.5));   // between rows
  CHECK(trace_at(t, 500.0).first == doctest::Approx(0.3));  // past the end
  CHECK(trace_at(t, -5.0).first == doctest::Approx(0.9));   // before the start

  // monotone queries walk the rows in order
  double prev = 1.0;
  for (double q = 0.0; q <= 25.0; q += 1.0) {
    const double c = trace_at(t, q).first;
    CHECK(c <= prev + 1e-12);
    prev = c;
  }

  ResourceTrace empty;
  CHECK_THROWS_AS(trace_at(empty, 0.0), std::invalid_argument);
}

TEST_CASE("map_traces uses every machine once when counts match") {
  std::vector<ResourceTrace> traces;
  for (int m = 0; m < 8; ++m) {
    ResourceTrace t;
    t.machine_id = std::to_string(m);
    t.points = {{0.0, 0.1 * m + 0.1, 1.0}};
    traces.push_back(t);
  }
  auto mapping = map_traces(traces, 8, 3);
  std::sort(mapping.begin(), mapping.end());
  for (std::size_t i = 0; i < 8; ++i) CHECK(mapping[i] == i);
}

TEST_CASE("map_traces is reproducible and preserves quartiles within 10%") {
  Rng rng(515);
  std::vector<ResourceTrace> traces;
  std::vector<double> source_means;
  for (int m = 0; m < 1000; ++m) {
    ResourceTrace t;
    t.machine_id = "g" + std::to_string(m);
    const double mean = rng.uniform(0.05, 0.95);
    t.points = {{0.0, mean, 1.0}};
    traces.push_back(t);
    source_means.push_back(mean);
  }

  const auto a = map_traces(traces, 32, 99);
  const auto b = map_traces(traces, 32, 99);
  CHECK(a == b);

  std::vector<double> sampled;
  for (const auto idx : a) sampled.push_back(traces[idx].mean_cpu());
  for (const double q : {0.25, 0.5, 0.75}) {
    const double src = quantile(source_means, q);
    const double got = quantile(sampled, q);
    CHECK(std::fabs(got - src) / src < 0.10);
  }
}

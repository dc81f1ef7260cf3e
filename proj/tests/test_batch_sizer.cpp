#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numeric>
#include <vector>

#include "lbbsp/batch_sizer.hpp"
#include "lbbsp/rng.hpp"

using namespace lbbsp;

namespace {

int sum(const std::vector<int>& xs) { return std::accumulate(xs.begin(), xs.end(), 0); }

GpuProfile wide(double m, double b) { return GpuProfile{m, b, 1, 1 << 20}; }

}  // namespace

TEST_CASE("cpu_allocate proportional examples") {
  const std::vector<double> v1 = {4, 2, 1, 1};
  CHECK(cpu_allocate(v1, 512).sizes == std::vector<int>{256, 128, 64, 64});

  const std::vector<double> v2 = {1, 1, 1, 1};
  CHECK(cpu_allocate(v2, 512).sizes == std::vector<int>{128, 128, 128, 128});
}

TEST_CASE("cpu_allocate matches the exhaustive oracle objective within slack") {
  const std::vector<double> speeds = {3, 2, 2};
  const BatchAssignment fast = cpu_allocate(speeds, 10);
  const BatchAssignment best = oracle_cpu_allocate(speeds, 10);
  CHECK(sum(fast.sizes) == 10);
  CHECK(sum(best.sizes) == 10);
  const double slack = 1.0 / 2.0;  // one sample on the slowest worker
  CHECK(cpu_makespan(speeds, fast) <= cpu_makespan(speeds, best) + slack);
}

TEST_CASE("cpu_allocate rejections") {
  const std::vector<double> zero = {1.0, 0.0};
  CHECK_THROWS_AS(cpu_allocate(zero, 10), std::invalid_argument);
  const std::vector<double> ok = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(cpu_allocate(ok, 2), std::invalid_argument);
}

TEST_CASE("cpu_allocate scale invariance") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.uniform_int(2, 8);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(0.1, 10.0);
    const int budget = rng.uniform_int(n, 2000);
    const auto base = cpu_allocate(v, budget);
    const double c = rng.uniform(0.5, 20.0);
    std::vector<double> scaled = v;
    for (auto& x : scaled) x *= c;
    CHECK(cpu_allocate(scaled, budget).sizes == base.sizes);
  }
}

TEST_CASE("cpu_allocate monotone in a single worker's speed") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(2, 6);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(0.2, 5.0);
    const int budget = rng.uniform_int(n, 600);
    const int who = rng.uniform_int(0, n - 1);
    const auto before = cpu_allocate(v, budget);
    v[static_cast<std::size_t>(who)] *= rng.uniform(1.01, 3.0);
    const auto after = cpu_allocate(v, budget);
    CHECK(after.sizes[static_cast<std::size_t>(who)] >=
          before.sizes[static_cast<std::size_t>(who)]);
  }
}

TEST_CASE("cpu_allocate keeps near-zero-speed workers at one sample") {
  const std::vector<double> v = {1e-9, 5.0, 5.0};
  const auto a = cpu_allocate(v, 100);
  CHECK(a.sizes[0] == 1);
  CHECK(sum(a.sizes) == 100);
}

TEST_CASE("gpu_allocate equalizes the worked two-worker instance") {
  const std::vector<GpuProfile> profiles = {wide(0.01, 0.1), wide(0.005, 0.1)};
  const std::vector<double> comm = {0.0, 0.0};
  const auto a = gpu_allocate(profiles, comm, 759);
  CHECK(sum(a.sizes) == 759);
  CHECK(std::abs(a.sizes[0] - 253) <= 1);
  CHECK(std::abs(a.sizes[1] - 506) <= 1);
  CHECK(gpu_makespan(profiles, comm, a) == doctest::Approx(2.63).epsilon(0.01));

  const auto oracle = oracle_gpu_allocate(profiles, comm, 200);
  const auto fast = gpu_allocate(profiles, comm, 200);
  CHECK(gpu_makespan(profiles, comm, fast) <=
        gpu_makespan(profiles, comm, oracle) + 0.01 + 1e-12);
}

TEST_CASE("gpu_allocate single worker and symmetric split") {
  const std::vector<GpuProfile> one = {GpuProfile{0.002, 0.05, 58, 384}};
  const std::vector<double> c1 = {0.0};
  CHECK(gpu_allocate(one, c1, 380).sizes == std::vector<int>{380});

  const std::vector<GpuProfile> twins = {GpuProfile{0.002, 0.05, 58, 384},
                                         GpuProfile{0.002, 0.05, 58, 384}};
  const std::vector<double> c2 = {0.1, 0.1};
  CHECK(gpu_allocate(twins, c2, 400).sizes == std::vector<int>{200, 200});
}

TEST_CASE("gpu_allocate infeasible budgets name the violated bound") {
  const std::vector<GpuProfile> profiles = {GpuProfile{0.002, 0.05, 58, 384},
                                            GpuProfile{0.0008, 0.08, 92, 1184}};
  const std::vector<double> comm = {0.0, 0.0};
  CHECK_THROWS_WITH_AS(gpu_allocate(profiles, comm, 100),
                       doctest::Contains("below total saturation minimum"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(gpu_allocate(profiles, comm, 2000),
                       doctest::Contains("above total memory capacity"),
                       std::invalid_argument);
  // oracle shares the verdict
  CHECK_THROWS_AS(oracle_gpu_allocate(profiles, comm, 100), std::invalid_argument);
}

TEST_CASE("gpu_allocate respects bounds and equalization") {
  Rng rng(4242);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(2, 6);
    std::vector<GpuProfile> profiles;
    std::vector<double> comm(static_cast<std::size_t>(n), 0.0);
    int lo = 0, hi = 0;
    for (int i = 0; i < n; ++i) {
      GpuProfile p;
      p.sec_per_sample = rng.uniform(0.001, 0.02);
      p.base_time_s = rng.uniform(0.0, 0.2);
      p.saturation_point = rng.uniform_int(1, 40);
      p.oom_point = p.saturation_point + rng.uniform_int(0, 400);
      profiles.push_back(p);
      lo += p.saturation_point;
      hi += p.oom_point;
    }
    const int budget = rng.uniform_int(lo, hi);
    const auto a = gpu_allocate(profiles, comm, budget);
    CHECK(sum(a.sizes) == budget);
    double max_m = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(a.sizes[static_cast<std::size_t>(i)] >= profiles[static_cast<std::size_t>(i)].saturation_point);
      CHECK(a.sizes[static_cast<std::size_t>(i)] <= profiles[static_cast<std::size_t>(i)].oom_point);
      max_m = std::max(max_m, profiles[static_cast<std::size_t>(i)].sec_per_sample);
    }

    // with wide bounds and zero comm the per-worker times equalize
    bool all_interior = true;
    for (int i = 0; i < n; ++i) {
      const auto& p = profiles[static_cast<std::size_t>(i)];
      if (a.sizes[static_cast<std::size_t>(i)] <= p.saturation_point ||
          a.sizes[static_cast<std::size_t>(i)] >= p.oom_point)
        all_interior = false;
    }
    if (all_interior) {
      double t_min = 1e300, t_max = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto& p = profiles[static_cast<std::size_t>(i)];
        const double t = p.sec_per_sample * a.sizes[static_cast<std::size_t>(i)] + p.base_time_s;
        t_min = std::min(t_min, t);
        t_max = std::max(t_max, t);
      }
      CHECK(t_max - t_min <= max_m + 1e-12);
    }
  }
}

TEST_CASE("both allocators stay within one-sample slack of the oracle") {
  Rng rng(31337);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = rng.uniform_int(2, 4);

    std::vector<double> speeds(static_cast<std::size_t>(n));
    for (auto& v : speeds) v = rng.uniform(0.5, 8.0);
    const int cpu_budget = rng.uniform_int(n, 120);
    const auto cpu_fast = cpu_allocate(speeds, cpu_budget);
    const auto cpu_best = oracle_cpu_allocate(speeds, cpu_budget);
    double slack_cpu = 0.0;
    for (const double v : speeds) slack_cpu = std::max(slack_cpu, 1.0 / v);
    CHECK(cpu_makespan(speeds, cpu_fast) <=
          cpu_makespan(speeds, cpu_best) + slack_cpu + 1e-12);

    std::vector<GpuProfile> profiles;
    std::vector<double> comm;
    int lo = 0;
    double slack_gpu = 0.0;
    for (int i = 0; i < n; ++i) {
      GpuProfile p;
      p.sec_per_sample = rng.uniform(0.01, 0.2);
      p.base_time_s = rng.uniform(0.0, 1.0);
      p.saturation_point = rng.uniform_int(1, 10);
      p.oom_point = p.saturation_point + rng.uniform_int(5, 60);
      profiles.push_back(p);
      comm.push_back(rng.uniform(0.0, 0.5));
      lo += p.saturation_point;
      slack_gpu = std::max(slack_gpu, p.sec_per_sample);
    }
    const int gpu_budget = lo + rng.uniform_int(0, 60);
    int hi = 0;
    for (const auto& p : profiles) hi += p.oom_point;
    if (gpu_budget > hi) continue;
    const auto gpu_fast = gpu_allocate(profiles, comm, gpu_budget);
    const auto gpu_best = oracle_gpu_allocate(profiles, comm, gpu_budget);
    CHECK(gpu_makespan(profiles, comm, gpu_fast) <=
          gpu_makespan(profiles, comm, gpu_best) + slack_gpu + 1e-12);
  }
}

TEST_CASE("oracle rejects oversized instances") {
  const std::vector<double> five(5, 1.0);
  CHECK_THROWS_AS(oracle_cpu_allocate(five, 20), std::invalid_argument);
  const std::vector<double> two(2, 1.0);
  CHECK_THROWS_AS(oracle_cpu_allocate(two, 500), std::invalid_argument);
}

TEST_CASE("budget conservation under fuzzing") {
  Rng rng(0xf0220);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = rng.uniform_int(1, 16);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(1e-3, 50.0);
    const int budget = rng.uniform_int(n, 5000);
    CHECK(sum(cpu_allocate(v, budget).sizes) == budget);
  }
}

TEST_CASE("clamp_speed_floor") {
  CHECK(clamp_speed_floor(5.0) == 5.0);
  CHECK(clamp_speed_floor(0.0) == 1e-3);
  CHECK(clamp_speed_floor(-2.0) == 1e-3);
}

#pragma once

#include <span>
#include <vector>

namespace lbbsp {

/// Profiled GPU compute-time curve: flat below the saturation point, then
/// linear up to the out-of-memory point.
struct GpuProfile {
  double sec_per_sample = 0.0;  // slope of the linear region
  double base_time_s = 0.0;     // intercept
  int saturation_point = 1;     // batches below this take constant time
  int oom_point = 1;            // batches above this do not fit in device memory
};

struct BatchAssignment {
  std::vector<int> sizes;
  int total_budget = 0;
};

/// Proportional split x_i = v_i / sum(v) * budget, rounded by largest
/// remainder so the sizes sum to the budget exactly; every worker gets >= 1.
BatchAssignment cpu_allocate(std::span<const double> speeds, int total_budget);

/// Integer assignment minimizing max_i(m_i*x_i + b_i + comm_i) subject to
/// saturation/OOM bounds and sum(x) = budget. Solved by waterfilling on the
/// continuous relaxation, then greedy integer repair; the result is within one
/// sample per worker of the continuous optimum.
BatchAssignment gpu_allocate(std::span<const GpuProfile> profiles,
                             std::span<const double> comm_s, int total_budget);

/// Exhaustive-search optimum for small instances (n <= 4, budget <= 200).
BatchAssignment oracle_cpu_allocate(std::span<const double> speeds, int total_budget);
BatchAssignment oracle_gpu_allocate(std::span<const GpuProfile> profiles,
                                    std::span<const double> comm_s, int total_budget);

/// max_i x_i / v_i
double cpu_makespan(std::span<const double> speeds, const BatchAssignment& a);

/// max_i Gamma_i(x_i) + comm_i
double gpu_makespan(std::span<const GpuProfile> profiles, std::span<const double> comm_s,
                    const BatchAssignment& a);

/// Guard for predictor pathologies: speeds at or below zero are lifted to the floor.
double clamp_speed_floor(double speed, double floor = 1e-3);

}  // namespace lbbsp

#include "lbbsp/batch_sizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lbbsp {

double clamp_speed_floor(double speed, double floor) {
  return speed > floor ? speed : floor;
}

namespace {

void validate_gpu_instance(std::span<const GpuProfile> profiles,
                           std::span<const double> comm_s, int total_budget,
                           long long* sum_sat, long long* sum_oom) {
  if (profiles.empty()) throw std::invalid_argument("gpu_allocate: no workers");
  if (profiles.size() != comm_s.size())
    throw std::invalid_argument("gpu_allocate: profiles/comm size mismatch");
  long long lo = 0, hi = 0;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& p = profiles[i];
    if (p.sec_per_sample <= 0.0)
      throw std::invalid_argument("gpu_allocate: sec_per_sample must be > 0");
    if (p.base_time_s < 0.0)
      throw std::invalid_argument("gpu_allocate: base_time_s must be >= 0");
    if (p.saturation_point < 1 || p.oom_point < p.saturation_point)
      throw std::invalid_argument("gpu_allocate: need 1 <= saturation_point <= oom_point");
    if (comm_s[i] < 0.0) throw std::invalid_argument("gpu_allocate: comm time must be >= 0");
    lo += p.saturation_point;
    hi += p.oom_point;
  }
  if (total_budget < lo)
    throw std::invalid_argument("gpu_allocate: budget " + std::to_string(total_budget) +
                                " below total saturation minimum " + std::to_string(lo));
  if (total_budget > hi)
    throw std::invalid_argument("gpu_allocate: budget " + std::to_string(total_budget) +
                                " above total memory capacity " + std::to_string(hi));
  *sum_sat = lo;
  *sum_oom = hi;
}

double gpu_time(const GpuProfile& p, int x, double comm) {
  return p.sec_per_sample * static_cast<double>(std::max(x, p.saturation_point)) +
         p.base_time_s + comm;
}

}  // namespace

BatchAssignment cpu_allocate(std::span<const double> speeds, int total_budget) {
  const int n = static_cast<int>(speeds.size());
  if (n == 0) throw std::invalid_argument("cpu_allocate: no workers");
  if (total_budget < n)
    throw std::invalid_argument("cpu_allocate: budget " + std::to_string(total_budget) +
                                " below worker count " + std::to_string(n));
  double sum = 0.0;
  for (const double v : speeds) {
    if (!(v > 0.0)) throw std::invalid_argument("cpu_allocate: speeds must be > 0");
    sum += v;
  }

  BatchAssignment a;
  a.total_budget = total_budget;
  a.sizes.resize(static_cast<std::size_t>(n));
  std::vector<double> remainder(static_cast<std::size_t>(n));
  int assigned = 0;
  for (int i = 0; i < n; ++i) {
    const double share = speeds[static_cast<std::size_t>(i)] / sum *
                         static_cast<double>(total_budget);
    const double fl = std::floor(share);
    a.sizes[static_cast<std::size_t>(i)] = static_cast<int>(fl);
    remainder[static_cast<std::size_t>(i)] = share - fl;
    assigned += static_cast<int>(fl);
  }

  // largest-remainder rounding, ties to the lower index
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int l, int r) {
    return remainder[static_cast<std::size_t>(l)] > remainder[static_cast<std::size_t>(r)];
  });
  for (int k = 0; k < total_budget - assigned; ++k)
    a.sizes[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] += 1;

  // a near-zero speed still participates; deficit comes out of the largest batch
  for (auto& x : a.sizes) {
    while (x < 1) {
      auto largest = std::max_element(a.sizes.begin(), a.sizes.end());
      if (*largest <= 1) throw std::logic_error("cpu_allocate: cannot enforce minimum batch");
      *largest -= 1;
      x += 1;
    }
  }
  return a;
}

BatchAssignment gpu_allocate(std::span<const GpuProfile> profiles,
                             std::span<const double> comm_s, int total_budget) {
  long long sum_sat = 0, sum_oom = 0;
  validate_gpu_instance(profiles, comm_s, total_budget, &sum_sat, &sum_oom);
  const int n = static_cast<int>(profiles.size());

  // Continuous relaxation: find the level T where the bounded demands
  // x_i(T) = clamp((T - b_i - c_i) / m_i, sat_i, oom_i) sum to the budget.
  // x_i(T) is piecewise linear and non-decreasing, so scan its breakpoints.
  auto demand_at = [&](double level) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto& p = profiles[static_cast<std::size_t>(i)];
      double x = (level - p.base_time_s - comm_s[static_cast<std::size_t>(i)]) / p.sec_per_sample;
      x = std::clamp(x, static_cast<double>(p.saturation_point),
                     static_cast<double>(p.oom_point));
      s += x;
    }
    return s;
  };

  std::vector<double> breakpoints;
  breakpoints.reserve(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < n; ++i) {
    const auto& p = profiles[static_cast<std::size_t>(i)];
    const double c = comm_s[static_cast<std::size_t>(i)];
    breakpoints.push_back(gpu_time(p, p.saturation_point, c));
    breakpoints.push_back(gpu_time(p, p.oom_point, c));
  }
  std::sort(breakpoints.begin(), breakpoints.end());

  const double target = static_cast<double>(total_budget);
  double level = breakpoints.front();
  if (demand_at(level) < target) {
    for (std::size_t b = 0; b + 1 < breakpoints.size(); ++b) {
      const double t0 = breakpoints[b], t1 = breakpoints[b + 1];
      if (demand_at(t1) < target) continue;
      // linear within the segment; slope is the sum of 1/m over active workers
      double slope = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto& p = profiles[static_cast<std::size_t>(i)];
        const double c = comm_s[static_cast<std::size_t>(i)];
        if (gpu_time(p, p.saturation_point, c) <= t0 && gpu_time(p, p.oom_point, c) > t0)
          slope += 1.0 / p.sec_per_sample;
      }
      level = slope > 0.0 ? t0 + (target - demand_at(t0)) / slope : t1;
      break;
    }
  }

  BatchAssignment a;
  a.total_budget = total_budget;
  a.sizes.resize(static_cast<std::size_t>(n));
  int assigned = 0;
  for (int i = 0; i < n; ++i) {
    const auto& p = profiles[static_cast<std::size_t>(i)];
    double x = (level - p.base_time_s - comm_s[static_cast<std::size_t>(i)]) / p.sec_per_sample;
    x = std::clamp(x, static_cast<double>(p.saturation_point), static_cast<double>(p.oom_point));
    const int xi = std::clamp(static_cast<int>(std::floor(x)), p.saturation_point, p.oom_point);
    a.sizes[static_cast<std::size_t>(i)] = xi;
    assigned += xi;
  }

  // integer repair: hand out the remaining samples to whoever stays cheapest
  while (assigned < total_budget) {
    int best = -1;
    double best_time = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const auto& p = profiles[static_cast<std::size_t>(i)];
      const int xi = a.sizes[static_cast<std::size_t>(i)];
      if (xi >= p.oom_point) continue;
      const double t = gpu_time(p, xi + 1, comm_s[static_cast<std::size_t>(i)]);
      if (t < best_time) {
        best_time = t;
        best = i;
      }
    }
    a.sizes[static_cast<std::size_t>(best)] += 1;
    ++assigned;
  }
  while (assigned > total_budget) {
    int worst = -1;
    double worst_time = -1.0;
    for (int i = 0; i < n; ++i) {
      const auto& p = profiles[static_cast<std::size_t>(i)];
      const int xi = a.sizes[static_cast<std::size_t>(i)];
      if (xi <= p.saturation_point) continue;
      const double t = gpu_time(p, xi, comm_s[static_cast<std::size_t>(i)]);
      if (t > worst_time) {
        worst_time = t;
        worst = i;
      }
    }
    if (worst < 0) throw std::logic_error("gpu_allocate: repair failed");
    a.sizes[static_cast<std::size_t>(worst)] -= 1;
    --assigned;
  }
  return a;
}

namespace {

struct OracleState {
  std::vector<int> current;
  std::vector<int> best;
  double best_objective = std::numeric_limits<double>::infinity();
};

// enumerate compositions of `remaining` over workers [i, n) within bounds
template <typename TimeFn>
void enumerate(int i, int n, int remaining, double partial_max,
               const std::vector<int>& lo, const std::vector<int>& hi, TimeFn time_of,
               OracleState& st) {
  if (partial_max >= st.best_objective) return;
  if (i == n - 1) {
    if (remaining < lo[static_cast<std::size_t>(i)] || remaining > hi[static_cast<std::size_t>(i)])
      return;
    const double obj = std::max(partial_max, time_of(i, remaining));
    if (obj < st.best_objective) {
      st.current[static_cast<std::size_t>(i)] = remaining;
      st.best_objective = obj;
      st.best = st.current;
    }
    return;
  }
  int tail_lo = 0, tail_hi = 0;
  for (int j = i + 1; j < n; ++j) {
    tail_lo += lo[static_cast<std::size_t>(j)];
    tail_hi += hi[static_cast<std::size_t>(j)];
  }
  const int from = std::max(lo[static_cast<std::size_t>(i)], remaining - tail_hi);
  const int to = std::min(hi[static_cast<std::size_t>(i)], remaining - tail_lo);
  for (int x = from; x <= to; ++x) {
    st.current[static_cast<std::size_t>(i)] = x;
    enumerate(i + 1, n, remaining - x, std::max(partial_max, time_of(i, x)), lo, hi,
              time_of, st);
  }
}

void check_oracle_size(std::size_t n, int total_budget) {
  if (n > 4 || total_budget > 200)
    throw std::invalid_argument("allocate oracle: instance too large (need n <= 4, budget <= 200)");
}

}  // namespace

BatchAssignment oracle_cpu_allocate(std::span<const double> speeds, int total_budget) {
  check_oracle_size(speeds.size(), total_budget);
  const int n = static_cast<int>(speeds.size());
  if (n == 0) throw std::invalid_argument("oracle_cpu_allocate: no workers");
  if (total_budget < n) throw std::invalid_argument("oracle_cpu_allocate: budget below worker count");
  for (const double v : speeds)
    if (!(v > 0.0)) throw std::invalid_argument("oracle_cpu_allocate: speeds must be > 0");

  OracleState st;
  st.current.resize(static_cast<std::size_t>(n));
  const std::vector<int> lo(static_cast<std::size_t>(n), 1);
  const std::vector<int> hi(static_cast<std::size_t>(n), total_budget);
  enumerate(0, n, total_budget, 0.0, lo, hi,
            [&](int i, int x) { return static_cast<double>(x) / speeds[static_cast<std::size_t>(i)]; },
            st);
  return BatchAssignment{st.best, total_budget};
}

BatchAssignment oracle_gpu_allocate(std::span<const GpuProfile> profiles,
                                    std::span<const double> comm_s, int total_budget) {
  check_oracle_size(profiles.size(), total_budget);
  long long sum_sat = 0, sum_oom = 0;
  validate_gpu_instance(profiles, comm_s, total_budget, &sum_sat, &sum_oom);
  const int n = static_cast<int>(profiles.size());

  OracleState st;
  st.current.resize(static_cast<std::size_t>(n));
  std::vector<int> lo, hi;
  for (const auto& p : profiles) {
    lo.push_back(p.saturation_point);
    hi.push_back(p.oom_point);
  }
  enumerate(0, n, total_budget, 0.0, lo, hi,
            [&](int i, int x) {
              return gpu_time(profiles[static_cast<std::size_t>(i)], x,
                              comm_s[static_cast<std::size_t>(i)]);
            },
            st);
  return BatchAssignment{st.best, total_budget};
}

double cpu_makespan(std::span<const double> speeds, const BatchAssignment& a) {
  double worst = 0.0;
  for (std::size_t i = 0; i < speeds.size(); ++i)
    worst = std::max(worst, static_cast<double>(a.sizes[i]) / speeds[i]);
  return worst;
}

double gpu_makespan(std::span<const GpuProfile> profiles, std::span<const double> comm_s,
                    const BatchAssignment& a) {
  double worst = 0.0;
  for (std::size_t i = 0; i < profiles.size(); ++i)
    worst = std::max(worst, gpu_time(profiles[i], a.sizes[i], comm_s[i]));
  return worst;
}

}  // namespace lbbsp

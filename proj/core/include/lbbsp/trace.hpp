#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lbbsp {

struct TracePoint {
  double t_offset_s = 0.0;
  double cpu_avail = 1.0;
  double mem_avail = 1.0;
};

/// Leftover-resource series for one machine, time-sorted.
struct ResourceTrace {
  std::string machine_id;
  std::vector<TracePoint> points;

  double mean_cpu() const;
};

/// Reads `machine_id,t_offset_s,cpu_avail,mem_avail` CSV. Malformed rows and
/// out-of-range fractions are rejected with the offending line number.
std::vector<ResourceTrace> parse_trace(const std::filesystem::path& path);

void write_trace(const std::vector<ResourceTrace>& traces, const std::filesystem::path& path);

/// Picks one machine per mean-cpu stratum (seeded), so the sampled
/// heterogeneity distribution follows the source's quantiles.
std::vector<std::size_t> map_traces(const std::vector<ResourceTrace>& traces, int workers,
                                    std::uint64_t seed);

/// Step interpolation: value of the latest point at or before `time_s`;
/// the first point before the trace starts, the last one past its end.
std::pair<double, double> trace_at(const ResourceTrace& trace, double time_s);

}  // namespace lbbsp

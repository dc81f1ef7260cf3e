#include "lbbsp/trace.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lbbsp/rng.hpp"

namespace lbbsp {

double ResourceTrace::mean_cpu() const {
  if (points.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : points) s += p.cpu_avail;
  return s / static_cast<double>(points.size());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, const char* what, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("trace line " + std::to_string(line_no) + ": bad " +
                             std::string(what) + " '" + s + "'");
  }
}

double parse_fraction(const std::string& s, const char* what, int line_no) {
  const double v = parse_real(s, what, line_no);
  if (v < 0.0 || v > 1.0)
    throw std::runtime_error("trace line " + std::to_string(line_no) + ": " +
                             std::string(what) + " " + s + " outside [0,1]");
  return v;
}

}  // namespace

std::vector<ResourceTrace> parse_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_trace: cannot open " + path.string());

  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("parse_trace: empty file " + path.string());
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const std::vector<std::string> cols = split_csv(header);
  const std::vector<std::string> expected = {"machine_id", "t_offset_s", "cpu_avail", "mem_avail"};
  for (const auto& name : expected)
    if (std::find(cols.begin(), cols.end(), name) == cols.end())
      throw std::runtime_error("parse_trace: missing column '" + name + "'");
  if (cols != expected)
    throw std::runtime_error("parse_trace: unexpected column order, want machine_id,t_offset_s,cpu_avail,mem_avail");

  std::vector<ResourceTrace> traces;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 4)
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": expected 4 fields, got " +
                               std::to_string(fields.size()));
    TracePoint p;
    p.t_offset_s = parse_real(fields[1], "t_offset_s", line_no);
    p.cpu_avail = parse_fraction(fields[2], "cpu_avail", line_no);
    p.mem_avail = parse_fraction(fields[3], "mem_avail", line_no);

    auto it = std::find_if(traces.begin(), traces.end(),
                           [&](const ResourceTrace& t) { return t.machine_id == fields[0]; });
    if (it == traces.end()) {
      traces.push_back(ResourceTrace{fields[0], {}});
      it = std::prev(traces.end());
    }
    if (!it->points.empty() && p.t_offset_s < it->points.back().t_offset_s)
      throw std::runtime_error("trace line " + std::to_string(line_no) +
                               ": time offsets not sorted for machine " + fields[0]);
    it->points.push_back(p);
  }
  return traces;
}

void write_trace(const std::vector<ResourceTrace>& traces, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
  if (!out) throw std::runtime_error("write_trace: cannot open " + path.string());
  out.precision(17);
  out << "machine_id,t_offset_s,cpu_avail,mem_avail\n";
  for (const auto& t : traces)
    for (const auto& p : t.points)
      out << t.machine_id << "," << p.t_offset_s << "," << p.cpu_avail << "," << p.mem_avail << "\n";
}

std::vector<std::size_t> map_traces(const std::vector<ResourceTrace>& traces, int workers,
                                    std::uint64_t seed) {
  if (traces.empty()) throw std::invalid_argument("map_traces: no traces");
  if (workers < 1) throw std::invalid_argument("map_traces: workers must be >= 1");

  // machines sorted by mean cpu availability, then carved into one stratum
  // per worker; each worker draws from its own stratum
  std::vector<std::size_t> order(traces.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return traces[a].mean_cpu() < traces[b].mean_cpu();
  });

  Rng rng(mix_seed(seed, 0x7ace5ull));
  std::vector<std::size_t> assignment(static_cast<std::size_t>(workers));
  const double stride = static_cast<double>(traces.size()) / static_cast<double>(workers);
  for (int w = 0; w < workers; ++w) {
    const std::size_t lo = static_cast<std::size_t>(std::floor(stride * w));
    std::size_t hi = static_cast<std::size_t>(std::floor(stride * (w + 1)));
    if (hi <= lo) hi = lo + 1;
    if (hi > traces.size()) hi = traces.size();
    const std::size_t pick = lo + static_cast<std::size_t>(
        rng.uniform() * static_cast<double>(hi - lo));
    assignment[static_cast<std::size_t>(w)] = order[std::min(pick, traces.size() - 1)];
  }
  return assignment;
}

std::pair<double, double> trace_at(const ResourceTrace& trace, double time_s) {
  if (trace.points.empty()) throw std::invalid_argument("trace_at: empty trace");
  auto it = std::upper_bound(trace.points.begin(), trace.points.end(), time_s,
                             [](double t, const TracePoint& p) { return t < p.t_offset_s; });
  if (it != trace.points.begin()) --it;
  return {it->cpu_avail, it->mem_avail};
}

}  // namespace lbbsp

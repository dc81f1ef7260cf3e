#include "lbbsp/coordination.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace lbbsp {

const char* to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::Bsp: return "bsp";
    case SchemeKind::Asp: return "asp";
    case SchemeKind::Ssp: return "ssp";
    case SchemeKind::LbBsp: return "lb-bsp";
  }
  return "?";
}

SchemeKind scheme_from_string(std::string_view name) {
  if (name == "bsp") return SchemeKind::Bsp;
  if (name == "asp") return SchemeKind::Asp;
  if (name == "ssp") return SchemeKind::Ssp;
  if (name == "lb-bsp" || name == "lbbsp") return SchemeKind::LbBsp;
  throw std::invalid_argument("unknown scheme: " + std::string(name));
}

namespace {

void check_dims(std::span<const Gradient> grads) {
  if (grads.empty()) throw std::invalid_argument("aggregate: empty gradient list");
  const std::size_t dim = grads.front().values.size();
  for (const auto& g : grads)
    if (g.values.size() != dim)
      throw std::invalid_argument("aggregate: gradient dimension mismatch");
}

}  // namespace

Gradient aggregate_naive(std::span<const Gradient> grads) {
  check_dims(grads);
  Gradient out;
  out.values.assign(grads.front().values.size(), 0.0);
  for (const auto& g : grads) {
    for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] += g.values[j];
    out.batch_size += g.batch_size;
  }
  const double inv = 1.0 / static_cast<double>(grads.size());
  for (auto& v : out.values) v *= inv;
  return out;
}

Gradient aggregate_weighted(std::span<const Gradient> grads) {
  check_dims(grads);
  double total = 0.0;
  for (const auto& g : grads) {
    if (g.batch_size < 1)
      throw std::invalid_argument("aggregate_weighted: batch size must be >= 1");
    total += static_cast<double>(g.batch_size);
  }
  Gradient out;
  out.values.assign(grads.front().values.size(), 0.0);
  for (const auto& g : grads) {
    const double w = static_cast<double>(g.batch_size) / total;
    for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] += w * g.values[j];
    out.batch_size += g.batch_size;
  }
  return out;
}

bool ssp_gate(std::int64_t worker_clock, std::int64_t min_worker_clock,
              std::int64_t staleness_threshold) {
  return worker_clock - min_worker_clock <= staleness_threshold;
}

ModelState ps_step(const SchemeConfig& scheme, int worker_count, ModelState model,
                   std::span<const PendingUpdate> ready) {
  if (ready.empty()) throw std::invalid_argument("ps_step: no pending updates");

  switch (scheme.kind) {
    case SchemeKind::Asp: {
      for (const auto& u : ready) {
        const Gradient one[] = {u.gradient};
        model = apply_update(std::move(model), aggregate_naive(one));
      }
      return model;
    }
    case SchemeKind::Bsp:
    case SchemeKind::Ssp:
    case SchemeKind::LbBsp: {
      // one update per worker, no more, no less
      std::vector<char> seen(static_cast<std::size_t>(worker_count), 0);
      for (const auto& u : ready) {
        if (u.worker_id < 0 || u.worker_id >= worker_count)
          throw std::invalid_argument("ps_step: unknown worker id " +
                                      std::to_string(u.worker_id));
        if (seen[static_cast<std::size_t>(u.worker_id)]++)
          throw std::invalid_argument("ps_step: duplicate update from worker " +
                                      std::to_string(u.worker_id));
      }
      if (static_cast<int>(ready.size()) != worker_count)
        throw std::invalid_argument("ps_step: missing worker update (got " +
                                    std::to_string(ready.size()) + " of " +
                                    std::to_string(worker_count) + ")");
      std::vector<Gradient> grads;
      grads.reserve(ready.size());
      for (const auto& u : ready) grads.push_back(u.gradient);
      const Gradient agg = scheme.kind == SchemeKind::LbBsp
                               ? aggregate_weighted(grads)
                               : aggregate_naive(grads);
      return apply_update(std::move(model), agg);
    }
  }
  throw std::logic_error("ps_step: unreachable");
}

}  // namespace lbbsp

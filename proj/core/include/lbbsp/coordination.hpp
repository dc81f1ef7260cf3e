#pragma once

#include <span>
#include <string_view>

#include "lbbsp/sgd.hpp"

namespace lbbsp {

enum class SchemeKind { Bsp, Asp, Ssp, LbBsp };

const char* to_string(SchemeKind kind);
SchemeKind scheme_from_string(std::string_view name);

struct SchemeConfig {
  SchemeKind kind = SchemeKind::Bsp;
  int staleness_threshold = 0;  // SSP only
  int total_budget = 0;         // samples processed per iteration across the cluster
};

struct PendingUpdate {
  int worker_id = 0;
  Gradient gradient;
  std::int64_t worker_clock = 0;
};

/// Unweighted mean of the gradient vectors; batch_size sums.
Gradient aggregate_naive(std::span<const Gradient> grads);

/// Batch-size-weighted mean, so every sample contributes equally regardless of
/// which worker processed it.
Gradient aggregate_weighted(std::span<const Gradient> grads);

/// True when a worker with `worker_clock` completed iterations may start its
/// next iteration given the slowest worker's clock.
bool ssp_gate(std::int64_t worker_clock, std::int64_t min_worker_clock,
              std::int64_t staleness_threshold);

/// Applies one parameter-server step.
///   BSP/SSP:  one naive aggregate over exactly one update per worker, clock +1.
///   LB-BSP:   one weighted aggregate over exactly one update per worker, clock +1.
///   ASP:      each update applied individually in list order, clock +1 each.
ModelState ps_step(const SchemeConfig& scheme, int worker_count, ModelState model,
                   std::span<const PendingUpdate> ready);

}  // namespace lbbsp

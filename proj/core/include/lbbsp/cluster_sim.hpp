#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "lbbsp/batch_sizer.hpp"
#include "lbbsp/coordination.hpp"
#include "lbbsp/predictor.hpp"
#include "lbbsp/sgd.hpp"
#include "lbbsp/trace.hpp"

namespace lbbsp {

enum class WorkerKind { Cpu, Gpu };

/// Communication-time multiplier taking effect at a given iteration
/// (base_bandwidth / current_bandwidth).
struct BandwidthEvent {
  std::int64_t at_iteration = 0;
  double comm_factor = 1.0;
};

struct CommModel {
  double base_tm_s = 0.0;
  std::vector<BandwidthEvent> schedule;  // sorted by at_iteration

  double tm_at(std::int64_t iteration) const;
};

struct WorkerProfile {
  int id = 0;
  WorkerKind kind = WorkerKind::Cpu;
  double base_speed = 10.0;  // samples/s with full resources (CPU kind)
  GpuProfile gpu{};          // timing curve (GPU kind)
  CommModel comm{};
  int trace_index = -1;  // row into the mapped traces (trace-driven CPU workers)
};

/// Competing process that periodically consumes part of a worker's resources.
struct StragglerSpec {
  double on_probability = 0.0;  // long-run fraction of periods the competitor runs
  double cpu_consumed = 0.0;
  double mem_consumed = 0.0;
  int period = 10;  // iterations per on/off decision
};

/// Speed penalty for scarce memory: none above the threshold, then linear
/// decay down to the floor.
struct MemPenalty {
  double threshold = 0.5;
  double floor = 0.25;
  double operator()(double mem_avail) const;
};

/// v0 * cpu_avail * penalty(mem_avail); monotone in both fractions.
double effective_speed(const WorkerProfile& profile, double cpu_avail, double mem_avail);

/// Flat below the saturation point, linear up to the OOM point, error past it.
double gpu_compute_time(const GpuProfile& profile, int batch);

struct ResourceState {
  double cpu_avail = 1.0;
  double mem_avail = 1.0;
  double speed_mult = 1.0;  // transient perturbation, invisible to predictors
};

// ---------------------------------------------------------------------------
// resource dynamics

/// Synthetic availability series for predictor evaluation: CPU availability
/// alternates between a high and a low band with a fresh seeded level each
/// regime, plus rare transient speed spikes. Memory stays at 1.
struct BenchmarkTraceConfig {
  int iterations = 1200;
  int regime_length = 50;
  double high_band_lo = 0.75, high_band_hi = 1.0;
  double low_band_lo = 0.30, low_band_hi = 0.55;
  double spike_mult = 3.0;
  double spike_prob = 0.02;
};

struct SyntheticSeries {
  std::vector<ResourceState> states;
};

SyntheticSeries make_benchmark_series(std::uint64_t seed, const BenchmarkTraceConfig& cfg = {});

enum class DynamicsKind { Static, Straggler, Benchmark, Trace };

struct DynamicsConfig {
  DynamicsKind kind = DynamicsKind::Static;
  std::vector<double> static_cpu;         // per worker (Static)
  std::vector<double> static_mem;         // per worker (Static); defaults to 1
  std::vector<StragglerSpec> stragglers;  // per worker (Straggler)
  BenchmarkTraceConfig benchmark{};       // (Benchmark)
  std::vector<ResourceTrace> traces;      // per worker, already mapped (Trace)
};

/// Deterministic per-worker resource state; a pure function of
/// (config, seed, worker, iteration, time).
class Dynamics {
 public:
  Dynamics() = default;
  Dynamics(DynamicsConfig cfg, int workers, std::uint64_t seed);

  ResourceState at(int worker, std::int64_t iteration, double sim_time_s) const;

 private:
  DynamicsConfig cfg_{};
  std::vector<double> straggler_phase_;
  std::vector<SyntheticSeries> benchmark_;
};

// ---------------------------------------------------------------------------
// presets

enum class PresetName { Homo, HeteroL2, HeteroL3, HeteroL2Static, HeteroL3Static };

const char* to_string(PresetName name);
PresetName preset_from_string(std::string_view name);

struct Preset {
  std::vector<WorkerProfile> workers;
  DynamicsConfig dynamics;
};

/// Homo: identical workers, no stragglers. Hetero-L2/L3: per-worker competing
/// processes tuned so the time-averaged slowest/fastest speed ratio is 1/2 or
/// 1/3. The -static variants freeze each worker at its average availability.
Preset heterogeneity_preset(PresetName name, int n, std::uint64_t seed,
                            double base_speed = 10.0);

// ---------------------------------------------------------------------------
// simulation

struct WorkerIterationStats {
  int worker_id = 0;
  int batch = 0;
  double tp_s = 0.0;
  double tm_s = 0.0;
  double wait_s = 0.0;
  double v_pred = 0.0;  // 0 when no speed prediction applies (first iteration, GPU rows)
  double v_actual = 0.0;
};

struct IterationRecord {
  std::int64_t k = 0;  // global update index
  std::vector<WorkerIterationStats> workers;
  double grad_norm = 0.0;
  double loss = 0.0;
  double wall_s = 0.0;
};

struct Metrics {
  std::int64_t updates_to_convergence = 0;
  double mean_per_update_time = 0.0;
  double wastage = 0.0;
  double predictor_rmse = 0.0;
  bool converged = false;
};

struct SimConfig {
  SchemeConfig scheme{};
  std::vector<WorkerProfile> workers;
  DynamicsConfig dynamics{};
  PredictorConfig predictor{};
  double learning_rate = 0.5;
  std::uint64_t dataset_seed = 7;
  int dataset_size = 1000;
  int dataset_dim = 10;
  double dataset_noise = 0.1;
  double convergence_loss = 0.40;
  int convergence_consecutive = 10;
  std::int64_t max_updates = 500;
  std::uint64_t seed = 1;
  bool record_params = false;
};

struct SimResult {
  std::vector<IterationRecord> records;
  Metrics metrics;
  double total_time_s = 0.0;
  std::int64_t max_ssp_skew = 0;
  std::vector<std::vector<double>> param_trajectory;  // filled when record_params
};

/// Metrics derived from a record stream; also used by the CSV/JSON exporters.
Metrics compute_metrics(const std::vector<IterationRecord>& records, bool converged,
                        int rmse_from_iteration);

/// Deterministic simulation of n workers plus parameter server. One step()
/// yields one applied update: a barrier round under BSP/LB-BSP, a completed
/// round under SSP, a single worker update under ASP.
class Simulation {
 public:
  explicit Simulation(SimConfig cfg);

  std::optional<IterationRecord> step();
  bool done() const { return done_; }
  SimResult run();

  const ModelState& model() const { return model_; }
  const Dataset& dataset() const { return dataset_; }

 private:
  struct WorkerRuntime {
    WorkerProfile profile;
    SpeedHistory history;
    std::vector<double> comm_obs;
    SpeedPredictor predictor;
    std::int64_t completed = 0;
    // async bookkeeping
    bool running = false;
    bool blocked = false;
    double block_start = 0.0;
    double pending_wait = 0.0;
    double finish_time = 0.0;
    Gradient inflight_grad;
    WorkerIterationStats inflight_stats;
    ResourceState inflight_rs;
  };

  std::optional<IterationRecord> step_sync();
  std::optional<IterationRecord> step_async();
  void start_worker(int w, double now);
  std::int64_t min_completed() const;
  void track_skew();
  std::vector<int> initial_gpu_sizes() const;
  std::vector<int> sample_stream(std::int64_t iteration) const;
  void observe(WorkerRuntime& rt, const ResourceState& rs, double v_actual, double tm);
  void train_rotation();
  bool check_stop(double loss_value);

  SimConfig cfg_;
  Dataset dataset_;
  ModelState model_;
  Dynamics dynamics_;
  std::vector<WorkerRuntime> workers_;
  int n_ = 0;
  bool gpu_mode_ = false;
  std::vector<int> equal_sizes_;
  std::int64_t iter_ = 0;
  double now_ = 0.0;
  double last_update_time_ = 0.0;
  int below_count_ = 0;
  bool converged_ = false;
  bool done_ = false;
  int train_cursor_ = 0;
  std::int64_t max_skew_ = 0;
  std::vector<IterationRecord> records_;
  std::vector<std::vector<double>> params_;
  // SSP round assembly: updates buffered until a round has one from everyone
  std::map<std::int64_t, std::vector<PendingUpdate>> round_updates_;
  std::map<std::int64_t, std::vector<WorkerIterationStats>> round_stats_;
};

/// Replays one synthetic series through a predictor pipeline and returns the
/// RMSE of next-iteration speed predictions from `measure_from` onwards.
double predictor_series_rmse(PredictorKind kind, const PredictorConfig& base,
                             const SyntheticSeries& series, double base_speed,
                             std::uint64_t seed, int measure_from);

}  // namespace lbbsp

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lbbsp/cluster_sim.hpp"

namespace lbbsp {

/// Configuration problem: the message names the offending field or file.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GpuProfileGroup {
  GpuProfile profile;
  int count = 1;
};

struct BandwidthDrop {
  int worker = 0;
  std::int64_t at_iteration = 0;
  double comm_factor = 1.0;
};

/// One simulation scenario as read from a JSON config file. Keys are
/// lower_snake_case and match the field names here.
struct ScenarioConfig {
  std::string name;  // config file stem, set by the loader
  SchemeKind scheme = SchemeKind::Bsp;
  int staleness_threshold = 0;
  int workers = 0;
  int total_budget = 0;  // defaults to 128 * workers
  std::string preset = "homo";
  std::filesystem::path trace_path;  // trace-driven CPU cluster when set
  std::vector<GpuProfileGroup> gpu_profiles;  // GPU cluster when non-empty
  std::optional<BandwidthDrop> bandwidth_drop;
  double base_speed = 10.0;
  double base_comm_s = 0.0;
  PredictorKind predictor = PredictorKind::Ema;
  double alpha = 0.2;
  int warmup_iterations = 500;
  double speed_floor = 1e-3;
  std::filesystem::path narx_weights_path;
  double learning_rate = 0.5;
  std::uint64_t dataset_seed = 7;
  int dataset_size = 1000;
  int dataset_dim = 10;
  double dataset_noise = 0.1;
  double convergence_loss = 0.40;
  int convergence_consecutive = 10;
  std::int64_t max_iterations = 500;
  std::uint64_t seed = 1;
  BenchmarkTraceConfig benchmark{};
  bool paired_sim = true;  // predict-bench: also run LB-BSP with each predictor
};

ScenarioConfig load_scenario(const std::filesystem::path& path);
void validate_scenario(const ScenarioConfig& cfg);

/// Expands the scenario into a runnable simulation config (presets resolved,
/// traces parsed and mapped, GPU groups unrolled).
SimConfig build_sim_config(const ScenarioConfig& cfg);

SimResult run_scenario(const ScenarioConfig& cfg);

/// `k,worker_id,x,tp_s,tm_s,wait_s,v_pred,v_actual,loss,iter_wall_s`,
/// reals printed with 9 significant digits, LF line endings.
void write_records_csv(const std::vector<IterationRecord>& records,
                       const std::filesystem::path& path);

void write_metrics_json(const ScenarioConfig& cfg, const Metrics& metrics,
                        const std::filesystem::path& path);

/// "256,128,64,64"
std::string format_assignment(const BatchAssignment& a);

// CLI entry points; they print errors to stderr and return the exit status.
int cmd_run(const std::filesystem::path& config, const std::filesystem::path& out_dir,
            std::optional<std::uint64_t> seed_override);
int cmd_compare(const std::vector<std::filesystem::path>& configs,
                const std::filesystem::path& out_dir,
                std::optional<std::uint64_t> seed_override);
int cmd_predict_bench(const std::filesystem::path& config,
                      const std::filesystem::path& out_dir,
                      std::optional<std::uint64_t> seed_override);

/// True when LBBSP_LOG is set to a non-empty value other than "0"/"off".
bool log_enabled();

}  // namespace lbbsp

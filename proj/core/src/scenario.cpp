#include "lbbsp/scenario.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lbbsp/rng.hpp"

namespace lbbsp {

using nlohmann::json;

bool log_enabled() {
  const char* v = std::getenv("LBBSP_LOG");
  if (!v) return false;
  const std::string s(v);
  return !s.empty() && s != "0" && s != "off";
}

namespace {

void log_line(const std::string& msg) {
  if (log_enabled()) std::cerr << "[lbbsp] " << msg << "\n";
}

const std::set<std::string> kKnownKeys = {
    "scheme", "staleness_threshold", "workers", "total_budget", "preset", "trace_path",
    "gpu_profiles", "bandwidth_drop", "base_speed", "base_comm_s", "predictor", "alpha",
    "warmup_iterations", "speed_floor", "narx_weights_path", "learning_rate",
    "dataset_seed", "dataset_size", "dataset_dim", "dataset_noise", "convergence_loss",
    "convergence_consecutive", "max_iterations", "seed", "benchmark_iterations",
    "benchmark_regime_length", "benchmark_spike_mult", "benchmark_spike_prob",
    "benchmark_high_band", "benchmark_low_band", "paired_sim"};

template <typename T>
T require(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config: missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for field '" + key + "'");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for field '" + key + "'");
  }
}

void format_real(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  out += buf;
}

double round9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

// Exported metrics are computed from the records as written (9 significant
// digits), so recomputing them from records.csv reproduces metrics.json.
std::vector<IterationRecord> round_records(std::vector<IterationRecord> records) {
  for (auto& rec : records) {
    rec.loss = round9(rec.loss);
    rec.wall_s = round9(rec.wall_s);
    rec.grad_norm = round9(rec.grad_norm);
    for (auto& w : rec.workers) {
      w.tp_s = round9(w.tp_s);
      w.tm_s = round9(w.tm_s);
      w.wait_s = round9(w.wait_s);
      w.v_pred = round9(w.v_pred);
      w.v_actual = round9(w.v_actual);
    }
  }
  return records;
}

}  // namespace

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: invalid JSON in " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kKnownKeys.count(key)) throw ConfigError("config: unknown field '" + key + "'");

  ScenarioConfig cfg;
  cfg.name = path.stem().string();
  try {
    cfg.scheme = scheme_from_string(require<std::string>(j, "scheme"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: field 'scheme': ") + e.what());
  }
  cfg.workers = require<int>(j, "workers");
  cfg.staleness_threshold = get_or(j, "staleness_threshold", 0);
  cfg.total_budget = get_or(j, "total_budget", 128 * cfg.workers);
  cfg.preset = get_or<std::string>(j, "preset", "homo");
  cfg.trace_path = get_or<std::string>(j, "trace_path", "");
  cfg.base_speed = get_or(j, "base_speed", 10.0);
  cfg.base_comm_s = get_or(j, "base_comm_s", 0.0);
  try {
    cfg.predictor = predictor_from_string(get_or<std::string>(j, "predictor", "ema"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: field 'predictor': ") + e.what());
  }
  cfg.alpha = get_or(j, "alpha", 0.2);
  cfg.warmup_iterations = get_or(j, "warmup_iterations", 500);
  cfg.speed_floor = get_or(j, "speed_floor", 1e-3);
  cfg.narx_weights_path = get_or<std::string>(j, "narx_weights_path", "");
  cfg.learning_rate = get_or(j, "learning_rate", 0.5);
  cfg.dataset_seed = get_or<std::uint64_t>(j, "dataset_seed", 7);
  cfg.dataset_size = get_or(j, "dataset_size", 1000);
  cfg.dataset_dim = get_or(j, "dataset_dim", 10);
  cfg.dataset_noise = get_or(j, "dataset_noise", 0.1);
  cfg.convergence_loss = get_or(j, "convergence_loss", 0.40);
  cfg.convergence_consecutive = get_or(j, "convergence_consecutive", 10);
  cfg.max_iterations = get_or<std::int64_t>(j, "max_iterations", 500);
  cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
  cfg.paired_sim = get_or(j, "paired_sim", true);

  cfg.benchmark.iterations = get_or(j, "benchmark_iterations", cfg.benchmark.iterations);
  cfg.benchmark.regime_length =
      get_or(j, "benchmark_regime_length", cfg.benchmark.regime_length);
  cfg.benchmark.spike_mult = get_or(j, "benchmark_spike_mult", cfg.benchmark.spike_mult);
  cfg.benchmark.spike_prob = get_or(j, "benchmark_spike_prob", cfg.benchmark.spike_prob);
  if (j.contains("benchmark_high_band")) {
    const auto band = require<std::vector<double>>(j, "benchmark_high_band");
    if (band.size() != 2) throw ConfigError("config: field 'benchmark_high_band' needs [lo, hi]");
    cfg.benchmark.high_band_lo = band[0];
    cfg.benchmark.high_band_hi = band[1];
  }
  if (j.contains("benchmark_low_band")) {
    const auto band = require<std::vector<double>>(j, "benchmark_low_band");
    if (band.size() != 2) throw ConfigError("config: field 'benchmark_low_band' needs [lo, hi]");
    cfg.benchmark.low_band_lo = band[0];
    cfg.benchmark.low_band_hi = band[1];
  }

  if (j.contains("gpu_profiles")) {
    const json& groups = j.at("gpu_profiles");
    if (!groups.is_array()) throw ConfigError("config: field 'gpu_profiles' must be an array");
    for (const json& g : groups) {
      GpuProfileGroup group;
      group.profile.sec_per_sample = require<double>(g, "sec_per_sample");
      group.profile.base_time_s = require<double>(g, "base_time_s");
      group.profile.saturation_point = require<int>(g, "saturation_point");
      group.profile.oom_point = require<int>(g, "oom_point");
      group.count = get_or(g, "count", 1);
      cfg.gpu_profiles.push_back(group);
    }
  }
  if (j.contains("bandwidth_drop")) {
    const json& d = j.at("bandwidth_drop");
    BandwidthDrop drop;
    drop.worker = require<int>(d, "worker");
    drop.at_iteration = require<std::int64_t>(d, "at_iteration");
    drop.comm_factor = require<double>(d, "comm_factor");
    cfg.bandwidth_drop = drop;
  }

  validate_scenario(cfg);
  return cfg;
}

void validate_scenario(const ScenarioConfig& cfg) {
  if (cfg.workers < 1) throw ConfigError("config: field 'workers' must be >= 1");
  if (cfg.total_budget < cfg.workers)
    throw ConfigError("config: field 'total_budget' must be >= workers");
  if (cfg.staleness_threshold < 0)
    throw ConfigError("config: field 'staleness_threshold' must be >= 0");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0))
    throw ConfigError("config: field 'alpha' must be in (0, 1]");
  if (cfg.learning_rate <= 0.0)
    throw ConfigError("config: field 'learning_rate' must be > 0");
  if (cfg.dataset_size < 1) throw ConfigError("config: field 'dataset_size' must be >= 1");
  if (cfg.dataset_dim < 1) throw ConfigError("config: field 'dataset_dim' must be >= 1");
  if (cfg.convergence_loss <= 0.0)
    throw ConfigError("config: field 'convergence_loss' must be > 0");
  if (cfg.convergence_consecutive < 1)
    throw ConfigError("config: field 'convergence_consecutive' must be >= 1");
  if (cfg.max_iterations < 1) throw ConfigError("config: field 'max_iterations' must be >= 1");
  if (!cfg.trace_path.empty() && !std::filesystem::exists(cfg.trace_path))
    throw ConfigError("config: trace file not found: " + cfg.trace_path.string());
  if (!cfg.narx_weights_path.empty() && !std::filesystem::exists(cfg.narx_weights_path))
    throw ConfigError("config: narx weights file not found: " + cfg.narx_weights_path.string());
  if (!cfg.gpu_profiles.empty()) {
    int total = 0;
    for (const auto& g : cfg.gpu_profiles) total += g.count;
    if (total != cfg.workers)
      throw ConfigError("config: gpu_profiles counts sum to " + std::to_string(total) +
                        ", field 'workers' says " + std::to_string(cfg.workers));
    if (!cfg.trace_path.empty())
      throw ConfigError("config: gpu_profiles and trace_path cannot be combined");
  }
  if (cfg.bandwidth_drop) {
    if (cfg.bandwidth_drop->worker < 0 || cfg.bandwidth_drop->worker >= cfg.workers)
      throw ConfigError("config: bandwidth_drop worker out of range");
  }
}

SimConfig build_sim_config(const ScenarioConfig& cfg) {
  SimConfig sim;
  sim.scheme.kind = cfg.scheme;
  sim.scheme.staleness_threshold = cfg.staleness_threshold;
  sim.scheme.total_budget = cfg.total_budget;
  sim.predictor.kind = cfg.predictor;
  sim.predictor.alpha = cfg.alpha;
  sim.predictor.warmup_iterations = cfg.warmup_iterations;
  sim.predictor.speed_floor = cfg.speed_floor;
  sim.predictor.initial_weights = cfg.narx_weights_path;
  sim.learning_rate = cfg.learning_rate;
  sim.dataset_seed = cfg.dataset_seed;
  sim.dataset_size = cfg.dataset_size;
  sim.dataset_dim = cfg.dataset_dim;
  sim.dataset_noise = cfg.dataset_noise;
  sim.convergence_loss = cfg.convergence_loss;
  sim.convergence_consecutive = cfg.convergence_consecutive;
  sim.max_updates = cfg.max_iterations;
  sim.seed = cfg.seed;

  if (!cfg.gpu_profiles.empty()) {
    int id = 0;
    for (const auto& group : cfg.gpu_profiles) {
      for (int c = 0; c < group.count; ++c) {
        WorkerProfile wp;
        wp.id = id++;
        wp.kind = WorkerKind::Gpu;
        wp.gpu = group.profile;
        wp.comm.base_tm_s = cfg.base_comm_s;
        sim.workers.push_back(wp);
      }
    }
    sim.dynamics.kind = DynamicsKind::Static;
  } else if (!cfg.trace_path.empty()) {
    const std::vector<ResourceTrace> traces = parse_trace(cfg.trace_path);
    const std::vector<std::size_t> mapping = map_traces(traces, cfg.workers, cfg.seed);
    sim.dynamics.kind = DynamicsKind::Trace;
    for (int i = 0; i < cfg.workers; ++i) {
      WorkerProfile wp;
      wp.id = i;
      wp.base_speed = cfg.base_speed;
      wp.comm.base_tm_s = cfg.base_comm_s;
      wp.trace_index = static_cast<int>(mapping[static_cast<std::size_t>(i)]);
      sim.workers.push_back(wp);
      sim.dynamics.traces.push_back(traces[mapping[static_cast<std::size_t>(i)]]);
    }
  } else if (cfg.preset == "benchmark") {
    sim.dynamics.kind = DynamicsKind::Benchmark;
    sim.dynamics.benchmark = cfg.benchmark;
    for (int i = 0; i < cfg.workers; ++i) {
      WorkerProfile wp;
      wp.id = i;
      wp.base_speed = cfg.base_speed;
      wp.comm.base_tm_s = cfg.base_comm_s;
      sim.workers.push_back(wp);
    }
  } else {
    PresetName preset;
    try {
      preset = preset_from_string(cfg.preset);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: field 'preset': ") + e.what());
    }
    Preset p = heterogeneity_preset(preset, cfg.workers, cfg.seed, cfg.base_speed);
    for (auto& wp : p.workers) wp.comm.base_tm_s = cfg.base_comm_s;
    sim.workers = std::move(p.workers);
    sim.dynamics = std::move(p.dynamics);
  }

  if (cfg.bandwidth_drop) {
    auto& wp = sim.workers[static_cast<std::size_t>(cfg.bandwidth_drop->worker)];
    wp.comm.schedule.push_back(
        BandwidthEvent{cfg.bandwidth_drop->at_iteration, cfg.bandwidth_drop->comm_factor});
  }
  return sim;
}

SimResult run_scenario(const ScenarioConfig& cfg) {
  Simulation sim(build_sim_config(cfg));
  SimResult result = sim.run();
  log_line("run '" + cfg.name + "' scheme=" + to_string(cfg.scheme) +
           " updates=" + std::to_string(result.metrics.updates_to_convergence) +
           " per_update=" + std::to_string(result.metrics.mean_per_update_time) +
           (result.metrics.converged ? " converged" : " capped"));
  return result;
}

void write_records_csv(const std::vector<IterationRecord>& records,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  std::string buf;
  buf.reserve(1 << 16);
  buf += "k,worker_id,x,tp_s,tm_s,wait_s,v_pred,v_actual,loss,iter_wall_s\n";
  for (const auto& rec : records) {
    for (const auto& w : rec.workers) {
      buf += std::to_string(rec.k);
      buf += ',';
      buf += std::to_string(w.worker_id);
      buf += ',';
      buf += std::to_string(w.batch);
      buf += ',';
      format_real(buf, w.tp_s);
      buf += ',';
      format_real(buf, w.tm_s);
      buf += ',';
      format_real(buf, w.wait_s);
      buf += ',';
      format_real(buf, w.v_pred);
      buf += ',';
      format_real(buf, w.v_actual);
      buf += ',';
      format_real(buf, rec.loss);
      buf += ',';
      format_real(buf, rec.wall_s);
      buf += '\n';
      if (buf.size() > (1 << 15)) {
        out << buf;
        buf.clear();
      }
    }
  }
  out << buf;
}

void write_metrics_json(const ScenarioConfig& cfg, const Metrics& metrics,
                        const std::filesystem::path& path) {
  json j;
  j["updates_to_convergence"] = metrics.updates_to_convergence;
  j["mean_per_update_time"] = metrics.mean_per_update_time;
  j["wastage"] = metrics.wastage;
  j["predictor_rmse"] = metrics.predictor_rmse;
  j["converged"] = metrics.converged;
  j["convergence_loss"] = cfg.convergence_loss;
  j["convergence_consecutive"] = cfg.convergence_consecutive;
  j["warmup_iterations"] = cfg.warmup_iterations;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << "\n";
}

std::string format_assignment(const BatchAssignment& a) {
  std::string s;
  for (std::size_t i = 0; i < a.sizes.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(a.sizes[i]);
  }
  return s;
}

int cmd_run(const std::filesystem::path& config, const std::filesystem::path& out_dir,
            std::optional<std::uint64_t> seed_override) {
  try {
    ScenarioConfig cfg = load_scenario(config);
    if (seed_override) cfg.seed = *seed_override;
    std::filesystem::create_directories(out_dir);
    const SimResult result = run_scenario(cfg);
    const std::vector<IterationRecord> rounded = round_records(result.records);
    write_records_csv(rounded, out_dir / "records.csv");
    const Metrics exported =
        compute_metrics(rounded, result.metrics.converged, cfg.warmup_iterations);
    write_metrics_json(cfg, exported, out_dir / "metrics.json");
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "lbbsp run: " << e.what() << "\n";
    return 1;
  }
}

int cmd_compare(const std::vector<std::filesystem::path>& configs,
                const std::filesystem::path& out_dir,
                std::optional<std::uint64_t> seed_override) {
  try {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir / "comparison.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + (out_dir / "comparison.csv").string());
    out << "scenario,metric,value\n";
    for (const auto& path : configs) {
      ScenarioConfig cfg = load_scenario(path);
      if (seed_override) cfg.seed = *seed_override;
      const SimResult r = run_scenario(cfg);
      std::string row;
      auto emit = [&](const char* metric, double value) {
        row.clear();
        row += cfg.name;
        row += ',';
        row += metric;
        row += ',';
        format_real(row, value);
        row += '\n';
        out << row;
      };
      emit("updates_to_convergence",
           static_cast<double>(r.metrics.updates_to_convergence));
      emit("mean_per_update_time", r.metrics.mean_per_update_time);
      emit("wastage", r.metrics.wastage);
      emit("predictor_rmse", r.metrics.predictor_rmse);
      emit("converged", r.metrics.converged ? 1.0 : 0.0);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "lbbsp compare: " << e.what() << "\n";
    return 1;
  }
}

int cmd_predict_bench(const std::filesystem::path& config,
                      const std::filesystem::path& out_dir,
                      std::optional<std::uint64_t> seed_override) {
  try {
    ScenarioConfig cfg = load_scenario(config);
    if (seed_override) cfg.seed = *seed_override;
    std::filesystem::create_directories(out_dir);

    const SyntheticSeries series = make_benchmark_series(cfg.seed, cfg.benchmark);
    PredictorConfig base;
    base.alpha = cfg.alpha;
    base.warmup_iterations = cfg.warmup_iterations;
    base.speed_floor = cfg.speed_floor;

    // paired runs always use the benchmark dynamics on a CPU cluster
    ScenarioConfig paired_base = cfg;
    paired_base.preset = "benchmark";
    paired_base.trace_path.clear();
    paired_base.gpu_profiles.clear();
    paired_base.bandwidth_drop.reset();

    const PredictorKind kinds[] = {PredictorKind::Memoryless, PredictorKind::Ema,
                                   PredictorKind::Narx};
    double bsp_per_update = 0.0;
    if (cfg.paired_sim) {
      ScenarioConfig bsp = paired_base;
      bsp.scheme = SchemeKind::Bsp;
      bsp_per_update = run_scenario(bsp).metrics.mean_per_update_time;
    }

    std::ofstream out(out_dir / "predict_bench.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + (out_dir / "predict_bench.csv").string());
    out << "predictor,rmse,normalized_per_update_time\n";
    for (const PredictorKind kind : kinds) {
      const double rmse = predictor_series_rmse(kind, base, series, cfg.base_speed,
                                                mix_seed(cfg.seed, 0xbe11c4),
                                                cfg.warmup_iterations);
      std::string row(to_string(kind));
      row += ',';
      format_real(row, rmse);
      row += ',';
      if (cfg.paired_sim) {
        ScenarioConfig paired = paired_base;
        paired.scheme = SchemeKind::LbBsp;
        paired.predictor = kind;
        const double per_update = run_scenario(paired).metrics.mean_per_update_time;
        format_real(row, per_update / bsp_per_update);
      }
      row += '\n';
      out << row;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "lbbsp predict-bench: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lbbsp

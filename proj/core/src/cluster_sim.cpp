#include "lbbsp/cluster_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lbbsp/rng.hpp"

namespace lbbsp {

double CommModel::tm_at(std::int64_t iteration) const {
  double factor = 1.0;
  for (const auto& ev : schedule) {
    if (ev.at_iteration > iteration) break;
    factor = ev.comm_factor;
  }
  return base_tm_s * factor;
}

double MemPenalty::operator()(double mem_avail) const {
  if (mem_avail >= threshold) return 1.0;
  return floor + (1.0 - floor) * (mem_avail / threshold);
}

double effective_speed(const WorkerProfile& profile, double cpu_avail, double mem_avail) {
  return profile.base_speed * cpu_avail * MemPenalty{}(mem_avail);
}

double gpu_compute_time(const GpuProfile& profile, int batch) {
  if (batch < 1) throw std::invalid_argument("gpu_compute_time: batch must be >= 1");
  if (batch > profile.oom_point)
    throw std::runtime_error("gpu out of memory: batch " + std::to_string(batch) +
                             " exceeds oom point " + std::to_string(profile.oom_point));
  return profile.sec_per_sample *
             static_cast<double>(std::max(batch, profile.saturation_point)) +
         profile.base_time_s;
}

SyntheticSeries make_benchmark_series(std::uint64_t seed, const BenchmarkTraceConfig& cfg) {
  Rng regime_rng(mix_seed(seed, 0xbe9c0ull));
  Rng spike_rng(mix_seed(seed, 0x59c1ceull));

  const int regimes = (cfg.iterations + cfg.regime_length - 1) / cfg.regime_length;
  std::vector<double> levels(static_cast<std::size_t>(std::max(regimes, 1)));
  for (int r = 0; r < regimes; ++r) {
    const bool high = (r % 2 == 0);
    levels[static_cast<std::size_t>(r)] =
        high ? regime_rng.uniform(cfg.high_band_lo, cfg.high_band_hi)
             : regime_rng.uniform(cfg.low_band_lo, cfg.low_band_hi);
  }

  SyntheticSeries series;
  series.states.resize(static_cast<std::size_t>(cfg.iterations));
  for (int k = 0; k < cfg.iterations; ++k) {
    ResourceState rs;
    rs.cpu_avail = levels[static_cast<std::size_t>(k / cfg.regime_length)];
    rs.mem_avail = 1.0;
    rs.speed_mult = spike_rng.uniform() < cfg.spike_prob ? cfg.spike_mult : 1.0;
    series.states[static_cast<std::size_t>(k)] = rs;
  }
  return series;
}

Dynamics::Dynamics(DynamicsConfig cfg, int workers, std::uint64_t seed) : cfg_(std::move(cfg)) {
  straggler_phase_.resize(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i)
    straggler_phase_[static_cast<std::size_t>(i)] = Rng(mix_seed(seed, 0x477a5e, i)).uniform();
  if (cfg_.kind == DynamicsKind::Benchmark) {
    benchmark_.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i)
      benchmark_.push_back(make_benchmark_series(mix_seed(seed, 0xbe7c, i), cfg_.benchmark));
  }
}

ResourceState Dynamics::at(int worker, std::int64_t iteration, double sim_time_s) const {
  const auto w = static_cast<std::size_t>(worker);
  switch (cfg_.kind) {
    case DynamicsKind::Static: {
      ResourceState rs;
      if (w < cfg_.static_cpu.size()) rs.cpu_avail = cfg_.static_cpu[w];
      if (w < cfg_.static_mem.size()) rs.mem_avail = cfg_.static_mem[w];
      return rs;
    }
    case DynamicsKind::Straggler: {
      ResourceState rs;
      if (w >= cfg_.stragglers.size()) return rs;
      const StragglerSpec& s = cfg_.stragglers[w];
      if (s.on_probability <= 0.0) return rs;
      // low-discrepancy on/off schedule hitting the on-fraction exactly in the
      // long run, with a seeded phase per worker
      const auto q = static_cast<double>(iteration / std::max(s.period, 1));
      const double phase = straggler_phase_[w];
      const bool on = std::floor((q + 1.0 + phase) * s.on_probability) >
                      std::floor((q + phase) * s.on_probability);
      if (on) {
        rs.cpu_avail = 1.0 - s.cpu_consumed;
        rs.mem_avail = 1.0 - s.mem_consumed;
      }
      return rs;
    }
    case DynamicsKind::Benchmark: {
      const auto& states = benchmark_[w].states;
      const auto idx = static_cast<std::size_t>(
          std::min<std::int64_t>(iteration, static_cast<std::int64_t>(states.size()) - 1));
      return states[idx];
    }
    case DynamicsKind::Trace: {
      ResourceState rs;
      const auto [c, m] = trace_at(cfg_.traces[w], sim_time_s);
      rs.cpu_avail = c;
      rs.mem_avail = m;
      return rs;
    }
  }
  throw std::logic_error("Dynamics::at: unreachable");
}

const char* to_string(PresetName name) {
  switch (name) {
    case PresetName::Homo: return "homo";
    case PresetName::HeteroL2: return "hetero-l2";
    case PresetName::HeteroL3: return "hetero-l3";
    case PresetName::HeteroL2Static: return "hetero-l2-static";
    case PresetName::HeteroL3Static: return "hetero-l3-static";
  }
  return "?";
}

PresetName preset_from_string(std::string_view name) {
  if (name == "homo") return PresetName::Homo;
  if (name == "hetero-l2") return PresetName::HeteroL2;
  if (name == "hetero-l3") return PresetName::HeteroL3;
  if (name == "hetero-l2-static") return PresetName::HeteroL2Static;
  if (name == "hetero-l3-static") return PresetName::HeteroL3Static;
  throw std::invalid_argument("unknown preset: " + std::string(name));
}

Preset heterogeneity_preset(PresetName name, int n, std::uint64_t seed, double base_speed) {
  if (n < 2) throw std::invalid_argument("heterogeneity_preset: need n >= 2");
  Preset preset;
  preset.workers.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& wp = preset.workers[static_cast<std::size_t>(i)];
    wp.id = i;
    wp.kind = WorkerKind::Cpu;
    wp.base_speed = base_speed;
  }
  (void)seed;

  const auto ratio = [&]() -> double {
    switch (name) {
      case PresetName::Homo: return 1.0;
      case PresetName::HeteroL2:
      case PresetName::HeteroL2Static: return 0.5;
      case PresetName::HeteroL3:
      case PresetName::HeteroL3Static: return 1.0 / 3.0;
    }
    return 1.0;
  }();

  // worker i's time-averaged availability ramps from 1 down to the target ratio
  auto avg_factor = [&](int i) {
    return 1.0 - (1.0 - ratio) * static_cast<double>(i) / static_cast<double>(n - 1);
  };

  switch (name) {
    case PresetName::Homo: {
      preset.dynamics.kind = DynamicsKind::Static;
      preset.dynamics.static_cpu.assign(static_cast<std::size_t>(n), 1.0);
      break;
    }
    case PresetName::HeteroL2Static:
    case PresetName::HeteroL3Static: {
      preset.dynamics.kind = DynamicsKind::Static;
      for (int i = 0; i < n; ++i) preset.dynamics.static_cpu.push_back(avg_factor(i));
      break;
    }
    case PresetName::HeteroL2:
    case PresetName::HeteroL3: {
      preset.dynamics.kind = DynamicsKind::Straggler;
      const double on_prob = 0.75;
      for (int i = 0; i < n; ++i) {
        StragglerSpec s;
        if (i > 0) {
          s.on_probability = on_prob;
          s.cpu_consumed = (1.0 - avg_factor(i)) / on_prob;
          s.period = 10;
        }
        preset.dynamics.stragglers.push_back(s);
      }
      break;
    }
  }
  return preset;
}

// ---------------------------------------------------------------------------

namespace {

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<int> equal_split(int total, int n) {
  std::vector<int> sizes(static_cast<std::size_t>(n), total / n);
  for (int i = 0; i < total % n; ++i) sizes[static_cast<std::size_t>(i)] += 1;
  return sizes;
}

}  // namespace

Metrics compute_metrics(const std::vector<IterationRecord>& records, bool converged,
                        int rmse_from_iteration) {
  Metrics m;
  m.converged = converged;
  m.updates_to_convergence = static_cast<std::int64_t>(records.size());
  if (records.empty()) return m;

  double time_total = 0.0;
  double wait_fraction_sum = 0.0;
  std::int64_t row_count = 0;
  double sse = 0.0;
  std::int64_t sse_count = 0;
  for (const auto& rec : records) {
    time_total += rec.wall_s;
    for (const auto& w : rec.workers) {
      wait_fraction_sum += rec.wall_s > 0.0 ? w.wait_s / rec.wall_s : 0.0;
      ++row_count;
      if (w.v_pred > 0.0 && rec.k >= rmse_from_iteration) {
        const double e = w.v_pred - w.v_actual;
        sse += e * e;
        ++sse_count;
      }
    }
  }
  m.mean_per_update_time = time_total / static_cast<double>(records.size());
  m.wastage = row_count > 0 ? wait_fraction_sum / static_cast<double>(row_count) : 0.0;
  m.predictor_rmse = sse_count > 0 ? std::sqrt(sse / static_cast<double>(sse_count)) : 0.0;
  return m;
}

Simulation::Simulation(SimConfig cfg) : cfg_(std::move(cfg)) {
  n_ = static_cast<int>(cfg_.workers.size());
  if (n_ < 1) throw std::invalid_argument("simulation: need at least one worker");
  if (cfg_.scheme.total_budget < n_)
    throw std::invalid_argument("simulation: total_budget below worker count");
  if (cfg_.scheme.staleness_threshold < 0)
    throw std::invalid_argument("simulation: staleness_threshold must be >= 0");

  const bool any_gpu = std::any_of(cfg_.workers.begin(), cfg_.workers.end(),
                                   [](const WorkerProfile& w) { return w.kind == WorkerKind::Gpu; });
  const bool all_gpu = std::all_of(cfg_.workers.begin(), cfg_.workers.end(),
                                   [](const WorkerProfile& w) { return w.kind == WorkerKind::Gpu; });
  if (any_gpu && !all_gpu)
    throw std::invalid_argument("simulation: mixed CPU/GPU clusters are not supported");
  gpu_mode_ = all_gpu;

  if (cfg_.scheme.kind != SchemeKind::LbBsp &&
      cfg_.scheme.total_budget % n_ != 0)
    throw std::invalid_argument("simulation: bsp/asp/ssp need total_budget divisible by workers");

  equal_sizes_ = equal_split(cfg_.scheme.total_budget, n_);
  if (gpu_mode_) {
    for (int i = 0; i < n_; ++i) {
      const auto& wp = cfg_.workers[static_cast<std::size_t>(i)];
      if (cfg_.scheme.kind != SchemeKind::LbBsp &&
          equal_sizes_[static_cast<std::size_t>(i)] > wp.gpu.oom_point)
        throw std::invalid_argument("simulation: equal split exceeds oom point of worker " +
                                    std::to_string(i));
    }
    if (cfg_.scheme.kind == SchemeKind::LbBsp) {
      // surfaces infeasible budgets before the run starts
      std::vector<GpuProfile> profiles;
      std::vector<double> zeros(static_cast<std::size_t>(n_), 0.0);
      for (const auto& w : cfg_.workers) profiles.push_back(w.gpu);
      (void)gpu_allocate(profiles, zeros, cfg_.scheme.total_budget);
    }
  }

  dataset_ = generate_dataset(cfg_.dataset_seed, cfg_.dataset_size, cfg_.dataset_dim,
                              cfg_.dataset_noise);
  model_.params.assign(static_cast<std::size_t>(cfg_.dataset_dim), 0.0);
  model_.learning_rate = cfg_.learning_rate;
  dynamics_ = Dynamics(cfg_.dynamics, n_, cfg_.seed);

  workers_.resize(static_cast<std::size_t>(n_));
  for (int i = 0; i < n_; ++i) {
    auto& rt = workers_[static_cast<std::size_t>(i)];
    rt.profile = cfg_.workers[static_cast<std::size_t>(i)];
    rt.predictor = SpeedPredictor(cfg_.predictor, mix_seed(cfg_.seed, 0x9ced1c70, i));
  }

  if (cfg_.scheme.kind == SchemeKind::Asp || cfg_.scheme.kind == SchemeKind::Ssp)
    for (int i = 0; i < n_; ++i) start_worker(i, 0.0);
}

std::vector<int> Simulation::sample_stream(std::int64_t iteration) const {
  Rng rng(mix_seed(cfg_.seed, 0x57e3a9, static_cast<std::uint64_t>(iteration)));
  std::vector<int> indices(static_cast<std::size_t>(cfg_.scheme.total_budget));
  for (auto& idx : indices) idx = rng.uniform_int(0, cfg_.dataset_size - 1);
  return indices;
}

void Simulation::observe(WorkerRuntime& rt, const ResourceState& rs, double v_actual,
                         double tm) {
  rt.history.push(v_actual, rs.cpu_avail, rs.mem_avail);
  rt.comm_obs.push_back(tm);
}

void Simulation::train_rotation() {
  if (cfg_.predictor.kind != PredictorKind::Narx) return;
  const int budget = (n_ + 1) / 2;  // at most half the models per iteration
  for (int j = 0; j < budget; ++j) {
    const int w = (train_cursor_ + j) % n_;
    auto& rt = workers_[static_cast<std::size_t>(w)];
    rt.predictor.train(rt.history);
  }
  train_cursor_ = (train_cursor_ + budget) % n_;
}

bool Simulation::check_stop(double loss_value) {
  below_count_ = loss_value < cfg_.convergence_loss ? below_count_ + 1 : 0;
  if (below_count_ >= cfg_.convergence_consecutive) {
    converged_ = true;
    done_ = true;
  }
  if (static_cast<std::int64_t>(records_.size()) >= cfg_.max_updates) done_ = true;
  return done_;
}

std::optional<IterationRecord> Simulation::step() {
  if (done_) return std::nullopt;
  const bool sync =
      cfg_.scheme.kind == SchemeKind::Bsp || cfg_.scheme.kind == SchemeKind::LbBsp;
  auto rec = sync ? step_sync() : step_async();
  if (rec) {
    records_.push_back(*rec);
    if (cfg_.record_params) params_.push_back(model_.params);
    check_stop(rec->loss);
  }
  return rec;
}

std::optional<IterationRecord> Simulation::step_sync() {
  const std::int64_t k = iter_;
  std::vector<ResourceState> rs(static_cast<std::size_t>(n_));
  std::vector<double> v_actual(static_cast<std::size_t>(n_), 0.0);
  std::vector<double> v_pred(static_cast<std::size_t>(n_), 0.0);

  for (int i = 0; i < n_; ++i) {
    auto& rt = workers_[static_cast<std::size_t>(i)];
    rs[static_cast<std::size_t>(i)] = dynamics_.at(i, k, now_);
    if (!gpu_mode_) {
      const auto& s = rs[static_cast<std::size_t>(i)];
      v_actual[static_cast<std::size_t>(i)] =
          effective_speed(rt.profile, s.cpu_avail, s.mem_avail) * s.speed_mult;
      if (rt.history.size() >= 1) {
        v_pred[static_cast<std::size_t>(i)] =
            cfg_.predictor.kind == PredictorKind::Perfect
                ? v_actual[static_cast<std::size_t>(i)]
                : rt.predictor.predict(rt.history, s.cpu_avail, s.mem_avail);
      }
    }
  }

  // batch sizes for this iteration
  std::vector<int> sizes;
  if (cfg_.scheme.kind == SchemeKind::LbBsp) {
    if (gpu_mode_) {
      if (k < 2) {
        sizes = initial_gpu_sizes();
      } else {
        // non-blocking size updates: the background thread worked from the
        // state one iteration back, so the newest comm sample is not in yet
        std::vector<GpuProfile> profiles;
        std::vector<double> tm_hat;
        for (const auto& rt : workers_) {
          profiles.push_back(rt.profile.gpu);
          const std::span<const double> lagged(rt.comm_obs.data(), rt.comm_obs.size() - 1);
          tm_hat.push_back(predict_comm_ema(lagged, cfg_.predictor.alpha));
        }
        sizes = gpu_allocate(profiles, tm_hat, cfg_.scheme.total_budget).sizes;
      }
    } else {
      if (k == 0) {
        sizes = equal_sizes_;
      } else {
        std::vector<double> speeds;
        for (int i = 0; i < n_; ++i)
          speeds.push_back(clamp_speed_floor(v_pred[static_cast<std::size_t>(i)],
                                             cfg_.predictor.speed_floor));
        sizes = cpu_allocate(speeds, cfg_.scheme.total_budget).sizes;
      }
    }
  } else {
    sizes = equal_sizes_;
  }

  // timing
  std::vector<double> tp(static_cast<std::size_t>(n_)), tm(static_cast<std::size_t>(n_));
  double wall = 0.0;
  for (int i = 0; i < n_; ++i) {
    auto& rt = workers_[static_cast<std::size_t>(i)];
    const int x = sizes[static_cast<std::size_t>(i)];
    if (gpu_mode_) {
      tp[static_cast<std::size_t>(i)] = gpu_compute_time(rt.profile.gpu, x);
      v_actual[static_cast<std::size_t>(i)] =
          static_cast<double>(x) / tp[static_cast<std::size_t>(i)];
    } else {
      tp[static_cast<std::size_t>(i)] =
          static_cast<double>(x) / v_actual[static_cast<std::size_t>(i)];
    }
    tm[static_cast<std::size_t>(i)] = rt.profile.comm.tm_at(k);
    wall = std::max(wall, tp[static_cast<std::size_t>(i)] + tm[static_cast<std::size_t>(i)]);
  }

  // gradients over the shared per-iteration sample stream, chunked by size
  const std::vector<int> stream = sample_stream(k);
  std::vector<Gradient> grads(static_cast<std::size_t>(n_));
  std::size_t offset = 0;
  for (int i = 0; i < n_; ++i) {
    const auto x = static_cast<std::size_t>(sizes[static_cast<std::size_t>(i)]);
    grads[static_cast<std::size_t>(i)] = batch_gradient(
        model_, dataset_, std::span<const int>(stream.data() + offset, x));
    offset += x;
  }

  std::vector<PendingUpdate> ready;
  for (int i = 0; i < n_; ++i)
    ready.push_back(PendingUpdate{i, grads[static_cast<std::size_t>(i)], k + 1});
  const Gradient applied = cfg_.scheme.kind == SchemeKind::LbBsp
                               ? aggregate_weighted(grads)
                               : aggregate_naive(grads);
  model_ = ps_step(cfg_.scheme, n_, std::move(model_), ready);

  IterationRecord rec;
  rec.k = model_.clock - 1;
  rec.wall_s = wall;
  rec.grad_norm = l2_norm(applied.values);
  rec.loss = loss(model_, dataset_);
  for (int i = 0; i < n_; ++i) {
    WorkerIterationStats ws;
    ws.worker_id = i;
    ws.batch = sizes[static_cast<std::size_t>(i)];
    ws.tp_s = tp[static_cast<std::size_t>(i)];
    ws.tm_s = tm[static_cast<std::size_t>(i)];
    ws.wait_s = wall - ws.tp_s - ws.tm_s;
    ws.v_pred = v_pred[static_cast<std::size_t>(i)];
    ws.v_actual = v_actual[static_cast<std::size_t>(i)];
    rec.workers.push_back(ws);
  }

  for (int i = 0; i < n_; ++i) {
    auto& rt = workers_[static_cast<std::size_t>(i)];
    observe(rt, rs[static_cast<std::size_t>(i)], v_actual[static_cast<std::size_t>(i)],
            tm[static_cast<std::size_t>(i)]);
    rt.completed += 1;
  }
  train_rotation();

  now_ += wall;
  iter_ += 1;
  return rec;
}

std::vector<int> Simulation::initial_gpu_sizes() const {
  std::vector<int> sizes = equal_sizes_;
  bool feasible = true;
  for (int i = 0; i < n_; ++i) {
    const auto& g = cfg_.workers[static_cast<std::size_t>(i)].gpu;
    const int x = sizes[static_cast<std::size_t>(i)];
    if (x < g.saturation_point || x > g.oom_point) feasible = false;
  }
  if (feasible) return sizes;
  std::vector<GpuProfile> profiles;
  std::vector<double> zeros(static_cast<std::size_t>(n_), 0.0);
  for (const auto& w : cfg_.workers) profiles.push_back(w.gpu);
  return gpu_allocate(profiles, zeros, cfg_.scheme.total_budget).sizes;
}

std::int64_t Simulation::min_completed() const {
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  for (const auto& rt : workers_) lo = std::min(lo, rt.completed);
  return lo;
}

void Simulation::track_skew() {
  if (cfg_.scheme.kind != SchemeKind::Ssp) return;
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  for (const auto& rt : workers_) {
    const std::int64_t clock = rt.running ? rt.completed + 1 : rt.completed;
    hi = std::max(hi, clock);
    lo = std::min(lo, clock);
  }
  max_skew_ = std::max(max_skew_, hi - lo);
}

void Simulation::start_worker(int w, double now) {
  auto& rt = workers_[static_cast<std::size_t>(w)];
  const std::int64_t j = rt.completed;  // local iteration about to run
  const ResourceState rs = dynamics_.at(w, j, now);

  const int x = equal_sizes_[static_cast<std::size_t>(w)];
  double tp = 0.0, v_act = 0.0, v_prd = 0.0;
  if (gpu_mode_) {
    tp = gpu_compute_time(rt.profile.gpu, x);
    v_act = static_cast<double>(x) / tp;
  } else {
    v_act = effective_speed(rt.profile, rs.cpu_avail, rs.mem_avail) * rs.speed_mult;
    tp = static_cast<double>(x) / v_act;
    if (rt.history.size() >= 1)
      v_prd = cfg_.predictor.kind == PredictorKind::Perfect
                  ? v_act
                  : rt.predictor.predict(rt.history, rs.cpu_avail, rs.mem_avail);
  }
  const double tm = rt.profile.comm.tm_at(j);

  // gradient against the parameters pulled right now
  const std::vector<int> stream = sample_stream(j);
  std::size_t offset = 0;
  for (int i = 0; i < w; ++i) offset += static_cast<std::size_t>(equal_sizes_[static_cast<std::size_t>(i)]);
  rt.inflight_grad = batch_gradient(
      model_, dataset_, std::span<const int>(stream.data() + offset, static_cast<std::size_t>(x)));

  rt.inflight_stats = WorkerIterationStats{w, x, tp, tm, rt.pending_wait, v_prd, v_act};
  rt.pending_wait = 0.0;
  rt.inflight_rs = rs;
  rt.running = true;
  rt.finish_time = now + tp + tm;
}

std::optional<IterationRecord> Simulation::step_async() {
  while (true) {
    // earliest finish, ties to the lowest worker id
    int next = -1;
    for (int i = 0; i < n_; ++i) {
      const auto& rt = workers_[static_cast<std::size_t>(i)];
      if (!rt.running) continue;
      if (next < 0 || rt.finish_time < workers_[static_cast<std::size_t>(next)].finish_time)
        next = i;
    }
    if (next < 0) {
      done_ = true;
      return std::nullopt;
    }

    auto& rt = workers_[static_cast<std::size_t>(next)];
    now_ = rt.finish_time;
    rt.running = false;
    rt.completed += 1;
    observe(rt, rt.inflight_rs, rt.inflight_stats.v_actual, rt.inflight_stats.tm_s);
    rt.predictor.train(rt.history);

    std::optional<IterationRecord> rec;
    const PendingUpdate update{next, rt.inflight_grad, rt.completed};

    if (cfg_.scheme.kind == SchemeKind::Asp) {
      const Gradient applied = aggregate_naive(std::span<const Gradient>(&update.gradient, 1));
      model_ = ps_step(cfg_.scheme, n_, std::move(model_), std::span<const PendingUpdate>(&update, 1));
      IterationRecord r;
      r.k = model_.clock - 1;
      r.workers.push_back(rt.inflight_stats);
      r.grad_norm = l2_norm(applied.values);
      r.loss = loss(model_, dataset_);
      r.wall_s = now_ - last_update_time_;
      last_update_time_ = now_;
      rec = std::move(r);
    } else {  // SSP: buffer until the round has one update from every worker
      const std::int64_t round = rt.completed - 1;
      round_updates_[round].push_back(update);
      round_stats_[round].push_back(rt.inflight_stats);
      auto it = round_updates_.find(round);
      if (static_cast<int>(it->second.size()) == n_) {
        auto& updates = it->second;
        auto& stats = round_stats_[round];
        std::sort(updates.begin(), updates.end(),
                  [](const PendingUpdate& a, const PendingUpdate& b) {
                    return a.worker_id < b.worker_id;
                  });
        std::sort(stats.begin(), stats.end(),
                  [](const WorkerIterationStats& a, const WorkerIterationStats& b) {
                    return a.worker_id < b.worker_id;
                  });
        std::vector<Gradient> grads;
        for (const auto& u : updates) grads.push_back(u.gradient);
        const Gradient applied = aggregate_naive(grads);
        model_ = ps_step(cfg_.scheme, n_, std::move(model_), updates);
        IterationRecord r;
        r.k = model_.clock - 1;
        r.workers = stats;
        r.grad_norm = l2_norm(applied.values);
        r.loss = loss(model_, dataset_);
        r.wall_s = now_ - last_update_time_;
        last_update_time_ = now_;
        round_updates_.erase(round);
        round_stats_.erase(round);
        rec = std::move(r);
      }
    }

    // restart or park the finisher, then re-check anyone the new clock frees
    if (cfg_.scheme.kind == SchemeKind::Asp) {
      start_worker(next, now_);
    } else {
      if (ssp_gate(rt.completed, min_completed(), cfg_.scheme.staleness_threshold)) {
        start_worker(next, now_);
      } else {
        rt.blocked = true;
        rt.block_start = now_;
      }
      for (int i = 0; i < n_; ++i) {
        auto& other = workers_[static_cast<std::size_t>(i)];
        if (!other.blocked) continue;
        if (ssp_gate(other.completed, min_completed(), cfg_.scheme.staleness_threshold)) {
          other.blocked = false;
          other.pending_wait = now_ - other.block_start;
          start_worker(i, now_);
        }
      }
    }
    track_skew();

    if (rec) return rec;
  }
}

SimResult Simulation::run() {
  while (step()) {
  }
  SimResult result;
  result.records = records_;
  result.metrics = compute_metrics(records_, converged_, cfg_.predictor.warmup_iterations);
  result.total_time_s = last_update_time_ > 0.0 ? last_update_time_ : now_;
  result.max_ssp_skew = max_skew_;
  result.param_trajectory = params_;
  return result;
}

double predictor_series_rmse(PredictorKind kind, const PredictorConfig& base,
                             const SyntheticSeries& series, double base_speed,
                             std::uint64_t seed, int measure_from) {
  PredictorConfig cfg = base;
  cfg.kind = kind;
  SpeedPredictor predictor(cfg, seed);
  WorkerProfile profile;
  profile.base_speed = base_speed;

  SpeedHistory history;
  double sse = 0.0;
  std::int64_t count = 0;
  for (std::size_t k = 0; k < series.states.size(); ++k) {
    const ResourceState& rs = series.states[k];
    const double v_actual =
        effective_speed(profile, rs.cpu_avail, rs.mem_avail) * rs.speed_mult;
    if (k >= 1 && static_cast<int>(k) >= measure_from) {
      const double v_pred = predictor.predict(history, rs.cpu_avail, rs.mem_avail);
      const double e = v_pred - v_actual;
      sse += e * e;
      ++count;
    }
    history.push(v_actual, rs.cpu_avail, rs.mem_avail);
    predictor.train(history);
  }
  if (count == 0) throw std::invalid_argument("predictor_series_rmse: nothing to measure");
  return std::sqrt(sse / static_cast<double>(count));
}

}  // namespace lbbsp

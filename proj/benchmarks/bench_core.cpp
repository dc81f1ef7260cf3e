#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "lbbsp/batch_sizer.hpp"
#include "lbbsp/cluster_sim.hpp"
#include "lbbsp/predictor.hpp"
#include "lbbsp/rng.hpp"
#include "lbbsp/sgd.hpp"

namespace {

void BM_CpuAllocate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  lbbsp::Rng rng(1);
  std::vector<double> speeds(static_cast<std::size_t>(n));
  for (auto& v : speeds) v = rng.uniform(0.5, 20.0);
  for (auto _ : state) {
    auto a = lbbsp::cpu_allocate(speeds, 128 * n);
    benchmark::DoNotOptimize(a.sizes.data());
  }
}
BENCHMARK(BM_CpuAllocate)->Arg(8)->Arg(64)->Arg(512);

void BM_GpuAllocate(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  lbbsp::Rng rng(2);
  std::vector<lbbsp::GpuProfile> profiles;
  std::vector<double> comm;
  for (int i = 0; i < n; ++i) {
    lbbsp::GpuProfile p;
    p.sec_per_sample = rng.uniform(0.0005, 0.005);
    p.base_time_s = rng.uniform(0.01, 0.2);
    p.saturation_point = rng.uniform_int(16, 128);
    p.oom_point = p.saturation_point + rng.uniform_int(256, 1024);
    profiles.push_back(p);
    comm.push_back(rng.uniform(0.0, 0.3));
  }
  int budget = 0;
  for (const auto& p : profiles) budget += (p.saturation_point + p.oom_point) / 2;
  for (auto _ : state) {
    auto a = lbbsp::gpu_allocate(profiles, comm, budget);
    benchmark::DoNotOptimize(a.sizes.data());
  }
}
BENCHMARK(BM_GpuAllocate)->Arg(8)->Arg(64)->Arg(512);

void BM_BatchGradient(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const lbbsp::Dataset data = lbbsp::generate_dataset(7, 2000, 16);
  lbbsp::ModelState m;
  m.params.assign(16, 0.1);
  std::vector<int> indices(static_cast<std::size_t>(batch));
  std::iota(indices.begin(), indices.end(), 0);
  for (auto _ : state) {
    auto g = lbbsp::batch_gradient(m, data, indices);
    benchmark::DoNotOptimize(g.values.data());
  }
}
BENCHMARK(BM_BatchGradient)->Arg(128)->Arg(1024);

void BM_NarxTrainCall(benchmark::State& state) {
  const int history_len = static_cast<int>(state.range(0));
  lbbsp::Rng rng(3);
  lbbsp::SpeedHistory h;
  for (int k = 0; k < history_len; ++k) {
    const double c = rng.uniform(0.3, 1.0);
    h.push(10.0 * c + rng.uniform(-0.2, 0.2), c, 1.0);
  }
  lbbsp::NarxTrainConfig tc;
  tc.min_history = 10;
  for (auto _ : state) {
    lbbsp::NarxModel m = lbbsp::narx_init(4);
    auto r = lbbsp::narx_train_online(m, h, tc);
    benchmark::DoNotOptimize(r.final_loss);
  }
}
BENCHMARK(BM_NarxTrainCall)->Arg(200)->Arg(1000);

void BM_LbBspIteration(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const lbbsp::Preset p =
      lbbsp::heterogeneity_preset(lbbsp::PresetName::HeteroL3, n, 11);
  lbbsp::SimConfig cfg;
  cfg.scheme.kind = lbbsp::SchemeKind::LbBsp;
  cfg.scheme.total_budget = 128 * n;
  cfg.workers = p.workers;
  cfg.dynamics = p.dynamics;
  cfg.convergence_loss = 1e-12;
  cfg.max_updates = 1 << 30;
  lbbsp::Simulation sim(cfg);
  for (auto _ : state) {
    auto rec = sim.step();
    benchmark::DoNotOptimize(rec->loss);
  }
}
BENCHMARK(BM_LbBspIteration)->Arg(8)->Arg(32);

}  // namespace

BENCHMARK_MAIN();

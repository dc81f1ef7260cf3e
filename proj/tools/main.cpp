#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lbbsp/batch_sizer.hpp"
#include "lbbsp/scenario.hpp"

namespace {

std::vector<double> parse_reals(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      out.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw CLI::ValidationError(std::string(what) + ": bad number '" + field + "'");
    }
  }
  return out;
}

// m:b:saturation:oom tuples, comma separated
std::vector<lbbsp::GpuProfile> parse_profiles(const std::string& csv) {
  std::vector<lbbsp::GpuProfile> out;
  std::stringstream ss(csv);
  std::string tuple;
  while (std::getline(ss, tuple, ',')) {
    std::stringstream ts(tuple);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ts, part, ':')) parts.push_back(part);
    if (parts.size() != 4)
      throw CLI::ValidationError("--profiles: expected m:b:saturation:oom, got '" + tuple + "'");
    lbbsp::GpuProfile p;
    p.sec_per_sample = std::stod(parts[0]);
    p.base_time_s = std::stod(parts[1]);
    p.saturation_point = std::stoi(parts[2]);
    p.oom_point = std::stoi(parts[3]);
    out.push_back(p);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LB-BSP cluster simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::vector<std::string> compare_configs;
  std::optional<std::uint64_t> seed_override;
  std::uint64_t seed_value = 0;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_value, "Override the config's run seed")
        ->each([&](const std::string&) { seed_override = seed_value; });
  };

  CLI::App* run = app.add_subcommand("run", "Run one scenario, write records.csv and metrics.json");
  run->add_option("--config", config_path, "Scenario config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory");
  add_seed(run);

  CLI::App* compare = app.add_subcommand("compare", "Run several scenarios, write comparison.csv");
  compare->add_option("--config", compare_configs, "Scenario configs (JSON)")->required();
  compare->add_option("--out", out_dir, "Output directory");
  add_seed(compare);

  CLI::App* bench = app.add_subcommand(
      "predict-bench", "Compare speed predictors on the synthetic benchmark trace");
  bench->add_option("--config", config_path, "Scenario config (JSON)")->required();
  bench->add_option("--out", out_dir, "Output directory");
  add_seed(bench);

  CLI::App* solve = app.add_subcommand("solve", "Solve one batch-size allocation instance");
  std::string mode, speeds_csv, profiles_csv, comm_csv;
  int budget = 0;
  bool use_oracle = false;
  solve->add_option("mode", mode, "cpu or gpu")->required()->check(CLI::IsMember({"cpu", "gpu"}));
  solve->add_option("--speeds", speeds_csv, "Per-worker speeds, comma separated (cpu)");
  solve->add_option("--profiles", profiles_csv, "m:b:saturation:oom tuples, comma separated (gpu)");
  solve->add_option("--comm", comm_csv, "Predicted comm times, comma separated (gpu)");
  solve->add_option("--budget", budget, "Total batch budget")->required();
  solve->add_flag("--oracle", use_oracle, "Use the exhaustive-search oracle (n<=4, budget<=200)");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return lbbsp::cmd_run(config_path, out_dir, seed_override);
  if (compare->parsed()) {
    std::vector<std::filesystem::path> paths(compare_configs.begin(), compare_configs.end());
    return lbbsp::cmd_compare(paths, out_dir, seed_override);
  }
  if (bench->parsed()) return lbbsp::cmd_predict_bench(config_path, out_dir, seed_override);

  try {
    lbbsp::BatchAssignment assignment;
    if (mode == "cpu") {
      if (speeds_csv.empty()) throw CLI::ValidationError("solve cpu needs --speeds");
      const auto speeds = parse_reals(speeds_csv, "--speeds");
      assignment = use_oracle ? lbbsp::oracle_cpu_allocate(speeds, budget)
                              : lbbsp::cpu_allocate(speeds, budget);
    } else {
      if (profiles_csv.empty()) throw CLI::ValidationError("solve gpu needs --profiles");
      const auto profiles = parse_profiles(profiles_csv);
      std::vector<double> comm(profiles.size(), 0.0);
      if (!comm_csv.empty()) comm = parse_reals(comm_csv, "--comm");
      assignment = use_oracle ? lbbsp::oracle_gpu_allocate(profiles, comm, budget)
                              : lbbsp::gpu_allocate(profiles, comm, budget);
    }
    std::cout << lbbsp::format_assignment(assignment) << "\n";
    return 0;
  } catch (const CLI::Error& e) {
    std::cerr << "lbbsp solve: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "lbbsp solve: " << e.what() << "\n";
    return 1;
  }
}

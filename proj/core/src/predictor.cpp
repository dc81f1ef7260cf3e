#include "lbbsp/predictor.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "lbbsp/rng.hpp"

namespace lbbsp {

double predict_memoryless(const SpeedHistory& history) {
  if (history.size() == 0) throw std::invalid_argument("predict_memoryless: empty history");
  return history.speed.back();
}

double ema(std::span<const double> series, double alpha) {
  if (series.empty()) throw std::invalid_argument("ema: empty series");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("ema: alpha must be in (0,1]");
  double value = series.front();
  for (std::size_t k = 1; k < series.size(); ++k)
    value = alpha * series[k] + (1.0 - alpha) * value;
  return value;
}

double predict_ema(const SpeedHistory& history, double alpha) {
  return ema(history.speed, alpha);
}

double predict_comm_ema(std::span<const double> comm_s, double alpha) {
  return ema(comm_s, alpha);
}

NarxModel narx_init(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x9a4c0ull));
  NarxModel m;
  for (auto& w : m.input_weights) w = rng.uniform(-0.3, 0.3);
  m.hidden_bias = rng.uniform(-0.1, 0.1);
  m.output_weight = rng.uniform(-0.3, 0.3);
  m.output_bias = 0.0;
  static_assert(NarxModel::parameter_count() < 20);
  return m;
}

namespace {

struct NarxInput {
  std::array<double, NarxModel::kInputs> z;  // standardized
};

NarxInput standardize(const NarxModel& m, const std::array<double, 2>& v,
                      const std::array<double, 3>& c, const std::array<double, 3>& mm) {
  NarxInput in;
  in.z[0] = m.speed_scaler.norm(v[0]);
  in.z[1] = m.speed_scaler.norm(v[1]);
  for (int j = 0; j < 3; ++j) in.z[2 + j] = m.cpu_scaler.norm(c[static_cast<std::size_t>(j)]);
  for (int j = 0; j < 3; ++j) in.z[5 + j] = m.mem_scaler.norm(mm[static_cast<std::size_t>(j)]);
  return in;
}

double forward(const NarxModel& m, const NarxInput& in, double* hidden_out = nullptr) {
  double z = m.hidden_bias;
  for (int j = 0; j < NarxModel::kInputs; ++j)
    z += m.input_weights[static_cast<std::size_t>(j)] * in.z[static_cast<std::size_t>(j)];
  const double h = std::tanh(z);
  if (hidden_out) *hidden_out = h;
  return m.output_weight * h + m.output_bias;
}

SeriesScaler fit_scaler(std::span<const double> xs) {
  SeriesScaler s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (const double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double var = 0.0;
  for (const double x : xs) var += (x - s.mean) * (x - s.mean);
  var /= static_cast<double>(xs.size());
  s.stddev = var > 1e-18 ? std::sqrt(var) : 1.0;
  return s;
}

struct TrainingSet {
  std::vector<NarxInput> inputs;
  std::vector<double> targets;  // standardized speeds
};

TrainingSet build_training_set(const NarxModel& m, const SpeedHistory& h) {
  TrainingSet ts;
  // target v[t] needs v[t-1], v[t-2] and resource windows ending at t
  for (std::size_t t = 2; t < h.size(); ++t) {
    const std::array<double, 2> v = {h.speed[t - 1], h.speed[t - 2]};
    const std::array<double, 3> c = {h.cpu_avail[t], h.cpu_avail[t - 1], h.cpu_avail[t - 2]};
    const std::array<double, 3> mm = {h.mem_avail[t], h.mem_avail[t - 1], h.mem_avail[t - 2]};
    ts.inputs.push_back(standardize(m, v, c, mm));
    ts.targets.push_back(m.speed_scaler.norm(h.speed[t]));
  }
  return ts;
}

double mse(const NarxModel& m, const TrainingSet& ts) {
  double total = 0.0;
  for (std::size_t i = 0; i < ts.inputs.size(); ++i) {
    const double e = forward(m, ts.inputs[i]) - ts.targets[i];
    total += e * e;
  }
  return total / static_cast<double>(ts.inputs.size());
}

struct NarxGrad {
  std::array<double, NarxModel::kInputs> input_weights{};
  double hidden_bias = 0.0;
  double output_weight = 0.0;
  double output_bias = 0.0;
};

NarxGrad loss_gradient(const NarxModel& m, const TrainingSet& ts) {
  NarxGrad g;
  const double scale = 2.0 / static_cast<double>(ts.inputs.size());
  for (std::size_t i = 0; i < ts.inputs.size(); ++i) {
    double h = 0.0;
    const double y = forward(m, ts.inputs[i], &h);
    const double dy = scale * (y - ts.targets[i]);
    g.output_weight += dy * h;
    g.output_bias += dy;
    const double dz = dy * m.output_weight * (1.0 - h * h);
    for (int j = 0; j < NarxModel::kInputs; ++j)
      g.input_weights[static_cast<std::size_t>(j)] +=
          dz * ts.inputs[i].z[static_cast<std::size_t>(j)];
    g.hidden_bias += dz;
  }
  return g;
}

void apply_step(NarxModel& m, const NarxGrad& g, double step) {
  for (int j = 0; j < NarxModel::kInputs; ++j)
    m.input_weights[static_cast<std::size_t>(j)] -=
        step * g.input_weights[static_cast<std::size_t>(j)];
  m.hidden_bias -= step * g.hidden_bias;
  m.output_weight -= step * g.output_weight;
  m.output_bias -= step * g.output_bias;
}

}  // namespace

double narx_predict(const NarxModel& model, const std::array<double, 2>& recent_speeds,
                    const std::array<double, 3>& cpu_window,
                    const std::array<double, 3>& mem_window, double floor) {
  const NarxInput in = standardize(model, recent_speeds, cpu_window, mem_window);
  const double v = model.speed_scaler.denorm(forward(model, in));
  return v > floor ? v : floor;
}

NarxTrainReport narx_train_online(NarxModel& model, const SpeedHistory& history,
                                  const NarxTrainConfig& cfg) {
  NarxTrainReport report;
  if (static_cast<int>(history.size()) < std::max(cfg.min_history, 3)) return report;

  model.speed_scaler = fit_scaler(history.speed);
  model.cpu_scaler = fit_scaler(history.cpu_avail);
  model.mem_scaler = fit_scaler(history.mem_avail);
  const TrainingSet ts = build_training_set(model, history);

  double current = mse(model, ts);
  int stall = 0;
  report.ran = true;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const NarxGrad g = loss_gradient(model, ts);
    double step = cfg.step;
    NarxModel trial = model;
    apply_step(trial, g, step);
    double next = mse(trial, ts);
    int halvings = 0;
    while (next > current && halvings < 20) {
      step *= 0.5;
      trial = model;
      apply_step(trial, g, step);
      next = mse(trial, ts);
      ++halvings;
    }
    if (next > current) break;  // no descent direction left at this scale
    // keep the scalers; only weights moved
    model.input_weights = trial.input_weights;
    model.hidden_bias = trial.hidden_bias;
    model.output_weight = trial.output_weight;
    model.output_bias = trial.output_bias;
    model.training_loss.push_back(next);
    ++report.epochs;
    stall = (current - next < cfg.early_stop_delta) ? stall + 1 : 0;
    current = next;
    if (stall >= cfg.early_stop_patience) break;
  }
  report.final_loss = current;
  return report;
}

void save_narx_csv(const NarxModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_narx_csv: cannot open " + path.string());
  out.precision(17);
  for (int j = 0; j < NarxModel::kInputs; ++j)
    out << "input_weight_" << j << "," << model.input_weights[static_cast<std::size_t>(j)] << "\n";
  out << "hidden_bias," << model.hidden_bias << "\n";
  out << "output_weight," << model.output_weight << "\n";
  out << "output_bias," << model.output_bias << "\n";
  out << "speed_mean," << model.speed_scaler.mean << "\n";
  out << "speed_stddev," << model.speed_scaler.stddev << "\n";
  out << "cpu_mean," << model.cpu_scaler.mean << "\n";
  out << "cpu_stddev," << model.cpu_scaler.stddev << "\n";
  out << "mem_mean," << model.mem_scaler.mean << "\n";
  out << "mem_stddev," << model.mem_scaler.stddev << "\n";
}

NarxModel load_narx_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_narx_csv: cannot open " + path.string());
  std::map<std::string, double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("load_narx_csv: malformed row '" + line + "'");
    values[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
  }
  auto get = [&](const std::string& name) {
    const auto it = values.find(name);
    if (it == values.end())
      throw std::runtime_error("load_narx_csv: missing parameter '" + name + "'");
    return it->second;
  };
  NarxModel m;
  for (int j = 0; j < NarxModel::kInputs; ++j)
    m.input_weights[static_cast<std::size_t>(j)] = get("input_weight_" + std::to_string(j));
  m.hidden_bias = get("hidden_bias");
  m.output_weight = get("output_weight");
  m.output_bias = get("output_bias");
  m.speed_scaler = {get("speed_mean"), get("speed_stddev")};
  m.cpu_scaler = {get("cpu_mean"), get("cpu_stddev")};
  m.mem_scaler = {get("mem_mean"), get("mem_stddev")};
  return m;
}

const char* to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::Memoryless: return "memoryless";
    case PredictorKind::Ema: return "ema";
    case PredictorKind::Narx: return "narx";
    case PredictorKind::Perfect: return "perfect";
  }
  return "?";
}

PredictorKind predictor_from_string(std::string_view name) {
  if (name == "memoryless") return PredictorKind::Memoryless;
  if (name == "ema") return PredictorKind::Ema;
  if (name == "narx") return PredictorKind::Narx;
  if (name == "perfect") return PredictorKind::Perfect;
  throw std::invalid_argument("unknown predictor: " + std::string(name));
}

SpeedPredictor::SpeedPredictor(const PredictorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.train.min_history = cfg_.warmup_iterations;
  if (!cfg_.initial_weights.empty())
    model_ = load_narx_csv(cfg_.initial_weights);
  else
    model_ = narx_init(seed);
}

double SpeedPredictor::predict(const SpeedHistory& history, double cpu_now,
                               double mem_now) const {
  switch (cfg_.kind) {
    case PredictorKind::Memoryless:
      return predict_memoryless(history);
    case PredictorKind::Perfect:
    case PredictorKind::Ema:
      return predict_ema(history, cfg_.alpha);
    case PredictorKind::Narx: {
      const std::size_t k = history.size();
      if (static_cast<int>(k) < cfg_.warmup_iterations || k < 2)
        return predict_ema(history, cfg_.alpha);
      const std::array<double, 2> v = {history.speed[k - 1], history.speed[k - 2]};
      const std::array<double, 3> c = {cpu_now, history.cpu_avail[k - 1],
                                       history.cpu_avail[k - 2]};
      const std::array<double, 3> mm = {mem_now, history.mem_avail[k - 1],
                                        history.mem_avail[k - 2]};
      return narx_predict(model_, v, c, mm, cfg_.speed_floor);
    }
  }
  throw std::logic_error("SpeedPredictor::predict: unreachable");
}

NarxTrainReport SpeedPredictor::train(const SpeedHistory& history) {
  if (cfg_.kind != PredictorKind::Narx) return {};
  return narx_train_online(model_, history, cfg_.train);
}

}  // namespace lbbsp

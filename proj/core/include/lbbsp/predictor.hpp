#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace lbbsp {

/// Per-worker execution history, one entry per completed iteration:
/// realized sample processing speed plus the CPU/memory availability the
/// worker saw while running it.
struct SpeedHistory {
  std::vector<double> speed;
  std::vector<double> cpu_avail;
  std::vector<double> mem_avail;

  void push(double v, double c, double m) {
    speed.push_back(v);
    cpu_avail.push_back(c);
    mem_avail.push_back(m);
  }
  std::size_t size() const { return speed.size(); }
};

/// Last observed speed.
double predict_memoryless(const SpeedHistory& history);

/// Folds the whole series: ema_0 = x_0, ema_k = alpha*x_k + (1-alpha)*ema_{k-1}.
double ema(std::span<const double> series, double alpha);

double predict_ema(const SpeedHistory& history, double alpha);

/// EMA over observed communication times.
double predict_comm_ema(std::span<const double> comm_s, double alpha);

struct SeriesScaler {
  double mean = 0.0;
  double stddev = 1.0;
  double norm(double x) const { return (x - mean) / stddev; }
  double denorm(double z) const { return mean + stddev * z; }
};

/// Tiny feedforward net over windows of past speeds and current+past
/// CPU/memory availability: 8 inputs, one tanh hidden unit, linear output.
/// 11 trainable weights total.
struct NarxModel {
  static constexpr int kSpeedLags = 2;
  static constexpr int kCpuWindow = 3;  // current value plus two lags
  static constexpr int kMemWindow = 3;
  static constexpr int kInputs = kSpeedLags + kCpuWindow + kMemWindow;

  std::array<double, kInputs> input_weights{};
  double hidden_bias = 0.0;
  double output_weight = 1.0;
  double output_bias = 0.0;

  SeriesScaler speed_scaler{};
  SeriesScaler cpu_scaler{};
  SeriesScaler mem_scaler{};

  std::vector<double> training_loss;  // one entry per accepted training epoch

  static constexpr int parameter_count() { return kInputs + 3; }
};

struct NarxTrainConfig {
  double step = 0.05;
  int max_epochs = 500;
  double early_stop_delta = 1e-4;  // stop once improvement stays below this
  int early_stop_patience = 4;     // ... for this many consecutive epochs
  int min_history = 500;           // observations required before training engages
};

NarxModel narx_init(std::uint64_t seed);

/// One forward pass. Windows are ordered most-recent-first:
/// {v_{k-1}, v_{k-2}}, {c_k, c_{k-1}, c_{k-2}}, {m_k, m_{k-1}, m_{k-2}}.
/// The output is clamped to stay positive.
double narx_predict(const NarxModel& model, const std::array<double, 2>& recent_speeds,
                    const std::array<double, 3>& cpu_window,
                    const std::array<double, 3>& mem_window, double floor = 1e-3);

struct NarxTrainReport {
  bool ran = false;
  int epochs = 0;
  double final_loss = 0.0;
};

/// Full-batch gradient descent on the mean squared prediction error over the
/// history, with backtracking so the loss never increases across accepted
/// steps. No-op until the history reaches min_history.
NarxTrainReport narx_train_online(NarxModel& model, const SpeedHistory& history,
                                  const NarxTrainConfig& cfg = {});

/// Flat `name,value` CSV with the 11 weights plus the input/target scalers.
void save_narx_csv(const NarxModel& model, const std::filesystem::path& path);
NarxModel load_narx_csv(const std::filesystem::path& path);

enum class PredictorKind { Memoryless, Ema, Narx, Perfect };

const char* to_string(PredictorKind kind);
PredictorKind predictor_from_string(std::string_view name);

struct PredictorConfig {
  PredictorKind kind = PredictorKind::Ema;
  double alpha = 0.2;
  int warmup_iterations = 500;  // NARX is trusted only after this many observations
  double speed_floor = 1e-3;
  NarxTrainConfig train{};
  std::filesystem::path initial_weights;  // optional pre-trained model reuse
};

/// Per-worker prediction pipeline. For the NARX kind the EMA value is returned
/// verbatim until the warm-up threshold is reached.
class SpeedPredictor {
 public:
  SpeedPredictor() = default;
  SpeedPredictor(const PredictorConfig& cfg, std::uint64_t seed);

  /// Predicted speed for the upcoming iteration given the history so far and
  /// the currently measured resource availability. Requires >= 1 observation.
  double predict(const SpeedHistory& history, double cpu_now, double mem_now) const;

  /// Trains the NARX model when enough history is available; otherwise no-op.
  NarxTrainReport train(const SpeedHistory& history);

  const NarxModel& model() const { return model_; }
  const PredictorConfig& config() const { return cfg_; }

 private:
  PredictorConfig cfg_{};
  NarxModel model_{};
};

}  // namespace lbbsp

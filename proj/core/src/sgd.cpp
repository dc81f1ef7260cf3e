#include "lbbsp/sgd.hpp"

#include <cmath>
#include <stdexcept>

#include "lbbsp/rng.hpp"

namespace lbbsp {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// log(1 + exp(z)) without overflow
double log1p_exp(double z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::vector<double> separator_params(std::uint64_t seed, int dim) {
  Rng rng(mix_seed(seed, 0x5e9a7a70ull));
  std::vector<double> w(static_cast<std::size_t>(dim));
  for (auto& wi : w) wi = rng.uniform(-1.0, 1.0);
  return w;
}

Dataset generate_dataset(std::uint64_t seed, int n, int d, double noise_amplitude) {
  if (n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");
  if (d < 1) throw std::invalid_argument("generate_dataset: d must be >= 1");

  const std::vector<double> truth = separator_params(seed, d);
  Rng rng(mix_seed(seed, 0xda7a5e7ull));

  Dataset data;
  data.dim = d;
  data.seed = seed;
  data.samples.resize(static_cast<std::size_t>(n));
  for (auto& s : data.samples) {
    s.features.resize(static_cast<std::size_t>(d));
    for (auto& x : s.features) x = rng.uniform(-1.0, 1.0);
    const double margin = dot(truth, s.features) + rng.uniform(-noise_amplitude, noise_amplitude);
    s.label = margin > 0.0 ? 1.0 : 0.0;
  }
  return data;
}

double sample_loss(const std::vector<double>& params, const Sample& s) {
  const double z = dot(params, s.features);
  // -(y log p + (1-y) log(1-p)) with p = sigmoid(z)
  return log1p_exp(z) - s.label * z;
}

double loss(const ModelState& model, const Dataset& data) {
  if (data.samples.empty()) throw std::invalid_argument("loss: empty dataset");
  double total = 0.0;
  for (const auto& s : data.samples) total += sample_loss(model.params, s);
  return total / static_cast<double>(data.samples.size());
}

Gradient batch_gradient(const ModelState& model, const Dataset& data,
                        std::span<const int> indices) {
  if (indices.empty()) throw std::invalid_argument("batch_gradient: empty index set");

  Gradient g;
  g.values.assign(model.params.size(), 0.0);
  for (const int idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= data.samples.size())
      throw std::out_of_range("batch_gradient: sample index out of range");
    const Sample& s = data.samples[static_cast<std::size_t>(idx)];
    const double z = dot(model.params, s.features);
    const double coeff = sigmoid(z) - s.label;
    for (std::size_t j = 0; j < g.values.size(); ++j) g.values[j] += coeff * s.features[j];
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (auto& v : g.values) v *= inv;
  g.batch_size = static_cast<int>(indices.size());
  return g;
}

ModelState apply_update(ModelState model, const Gradient& g) {
  if (g.values.size() != model.params.size())
    throw std::invalid_argument("apply_update: gradient dimension mismatch");
  for (std::size_t j = 0; j < model.params.size(); ++j)
    model.params[j] -= model.learning_rate * g.values[j];
  model.clock += 1;
  return model;
}

}  // namespace lbbsp
